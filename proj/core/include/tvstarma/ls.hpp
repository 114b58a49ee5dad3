#pragma once

#include "tvstarma/model.hpp"
#include "tvstarma/spatial.hpp"
#include "tvstarma/wavelet.hpp"

#include <Eigen/Dense>

namespace tvstarma {

/**
 * Stacked regressors of the wavelet tvSTAR model, Z = Psi beta + nu.
 *
 * Rows are grouped by station block i = 1..n, with times t = p+1..T inside a
 * block, so row `(i-1)(T-p) + (t-p-1)`. Column `basis * s_a + lag` holds
 * psi_basis(t/T) * [W^(l) Z(t - s)]_i for the lag-th (s, l) of the spec.
 */
struct DesignMatrix {
    Eigen::MatrixXd psi;
    ModelSpec spec;
    WaveletDictionary dictionary;
    int T = 0;
    int n = 0;

    int first_time() const { return spec.p + 1; }
    int rows_per_station() const { return T - spec.p; }
};

/// tvSTAR design matrix. Requires spec.q == 0, T > p and a dictionary built for this T and J.
DesignMatrix build_design(const PanelSeries& Z, const WeightMatrixSet& W, const ModelSpec& spec,
                          const WaveletDictionary& dict);

/// Response vector stacked like the design rows.
Eigen::VectorXd stack_response(const PanelSeries& Z, int p);

/// Lagged regressor (W^(l) Z(t - s))' for every t = 1..T, as a T x n matrix.
Eigen::MatrixXd lagged_regressor(const PanelSeries& Z, const WeightMatrixSet& W, Lag lag);

/**
 * Least squares wavelet coefficients, (Psi'Psi)^{-1} Psi'Z, by column-pivoted QR.
 *
 * sigma2_hat = RSS / (N - K). Throws NumericalError when a QR pivot falls
 * below 1e-10 times the largest.
 */
FitResult fit_ls(const DesignMatrix& design, const PanelSeries& Z);

/// z_hat_i(t) = sum_{s,l} phi_sl(t/T) [W^(l) Z(t - s)]_i for t = p+1..T, from the fitted curves.
Eigen::MatrixXd predict_one_step(const FitResult& fit, const PanelSeries& Z, const WeightMatrixSet& W,
                                 const ModelSpec& spec);

}  // namespace tvstarma

#pragma once

#include "tvstarma/wavelet.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace tvstarma {

/**
 * Orders of a tvSTARMA(p_{lambda_1..lambda_p}, q_{m_1..m_q}) model plus its wavelet resolution.
 *
 * Coefficient vectors are laid out as c = (a, b): the AR block a first, then
 * the MA block b. Inside a block the wavelet index (j,k) is the outer index
 * and the lag (s,l) the inner one, so block entry `basis * lags + lag` belongs
 * to basis function `basis` and lag `lag`. The design matrix of the least
 * squares path uses the same column order.
 */
struct ModelSpec {
    int p = 1;
    std::vector<int> lambda{1};
    int q = 0;
    std::vector<int> m;
    int J = 2;
    WaveletFamily family = WaveletFamily::MexicanHat;

    static ModelSpec tvstar(int p, std::vector<int> lambda, int J);
    static ModelSpec tvstarma(int p, std::vector<int> lambda, int q, std::vector<int> m, int J);

    /// s_a = sum_s (1 + lambda_s).
    int ar_lag_count() const;
    /// s_m = sum_s (1 + m_s).
    int ma_lag_count() const;
    int basis_count() const { return 1 << J; }
    int coefficient_count() const { return basis_count() * (ar_lag_count() + ma_lag_count()); }
    int max_spatial_order() const;
    /// max(p, q): the first time index that can be predicted is this plus one.
    int max_time_lag() const { return std::max(p, q); }

    std::vector<Lag> ar_lags() const;
    std::vector<Lag> ma_lags() const;

    int ar_index(int basis, int lag) const { return basis * ar_lag_count() + lag; }
    int ma_index(int basis, int lag) const {
        return basis_count() * ar_lag_count() + basis * ma_lag_count() + lag;
    }

    /// tvSTAR(1_1) / tvSTARMA(1_1,1_1) style label, with the resolution appended.
    std::string label() const;

    /// Throws ValidationError on inconsistent orders or a spatial order above `max_weight_order`.
    void validate(int max_weight_order) const;

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// T x n panel: row t - 1 holds Z(t/T), column i holds station i.
struct PanelSeries {
    Eigen::MatrixXd values;
    std::vector<std::string> station_ids;

    PanelSeries() = default;
    PanelSeries(Eigen::MatrixXd values, std::vector<std::string> ids);

    int T() const { return static_cast<int>(values.rows()); }
    int n() const { return static_cast<int>(values.cols()); }
    /// Z(t) for 1-based t; zero for t <= 0.
    Eigen::VectorXd at(int t) const;

    /// Finite entries, ids matching the column count.
    void validate() const;
};

/// Default station ids `s1..sn`.
std::vector<std::string> default_station_ids(int n);

enum class FitMethod { LeastSquares, Kalman };

std::string to_string(FitMethod method);

struct FitResult {
    ModelSpec spec;
    FitMethod method = FitMethod::LeastSquares;
    Eigen::VectorXd coefficients;            // layout per ModelSpec
    std::vector<CoefficientCurve> ar_curves;  // phi_sl, in ar_lags() order
    std::vector<CoefficientCurve> ma_curves;  // theta_sl, in ma_lags() order
    int first_time = 0;                      // first predicted time index (1-based)
    Eigen::MatrixXd fitted;                  // (T - first_time + 1) x n one-step predictions
    Eigen::MatrixXd residuals;               // observed minus fitted, same shape
    double sigma2_hat = 0.0;
    Eigen::MatrixXd sigma_hat;               // n x n innovation covariance (Kalman), sigma2 I for LS
    double mse = 0.0;
    std::vector<std::string> warnings;
};

/// mean of squared residuals over the predicted cells.
double mean_squared_error(const Eigen::MatrixXd& residuals);

/// Reconstructs the AR and MA curves of `fit` from its coefficients.
void attach_curves(FitResult& fit, const WaveletDictionary& dict);

}  // namespace tvstarma

#pragma once

#include "tvstarma/model.hpp"
#include "tvstarma/spatial.hpp"
#include "tvstarma/wavelet.hpp"

#include <Eigen/Dense>

#include <deque>
#include <span>
#include <string>
#include <vector>

namespace tvstarma {

struct KalmanConfig {
    /// Initial innovation covariance h I.
    double h = 1.0;
    /// State index before the first processed observation; 0 selects max(p, q).
    int t0 = 0;
    /// Initial P = p0_scale I.
    double p0_scale = 1.0;
    /// Keep the innovation covariance at h I for the whole run.
    bool freeze_sigma = false;
    /// Abort when the coefficient norm exceeds this bound.
    double divergence_bound = 1e6;
    /// Record one TraceRow per step.
    bool trace = false;

    void validate() const;
};

/// Filter state after processing observation `t`.
struct KalmanState {
    Eigen::VectorXd c;      // coefficient estimate, ModelSpec layout
    Eigen::MatrixXd P;      // coefficient covariance, kept symmetric
    Eigen::MatrixXd P_sqrt; // square root of P propagated by kalman_step; clear it after editing P by hand
    Eigen::MatrixXd sigma;  // n x n innovation covariance estimate
    std::deque<Eigen::VectorXd> residual_lags;  // front = nu_hat(t), back = nu_hat(t - max(q,1) + 1)
    int t = 0;
    int lag_count = 0;      // s_a + s_m
    int ridge_events = 0;   // times the innovation solve needed a ridge

    /// Initial state c = 0, P = p0 I, sigma = h I, zero residual lags.
    static KalmanState initial(const ModelSpec& spec, int n, const KalmanConfig& cfg);
};

/**
 * Regressor block Y(t) of z(t) = Y(t) c + nu(t), n x 2^J (s_a + s_m).
 *
 * AR columns hold psi_basis(t/T) [W^(l) Z(t - s)]_i, MA columns
 * -psi_basis(t/T) [W^(l) nu(t - s)]_i, so b estimates theta with the
 * subtracted-MA sign convention. `residual_lags[k]` is nu(t - 1 - k); missing
 * lags count as zero.
 */
Eigen::MatrixXd build_regressor(int t, const PanelSeries& Z, std::span<const Eigen::VectorXd> residual_lags,
                                const WeightMatrixSet& W, const ModelSpec& spec, const WaveletDictionary& dict);

/// Overload reading the lags from a state's ring.
Eigen::MatrixXd build_regressor(int t, const PanelSeries& Z, const std::deque<Eigen::VectorXd>& residual_lags,
                                const WeightMatrixSet& W, const ModelSpec& spec, const WaveletDictionary& dict);

/**
 * One recursive update for observation state.t + 1.
 *
 * S = Y P Y' + Sigma, K = P Y' S^{-1}, c += K (z - Y c), P -= K S K'.
 * The a posteriori residual nu = z - Y c feeds the innovation covariance as
 * the running average Sigma <- ((k - s) Sigma + nu nu') / (k - s + 1), where k
 * is the observation index and s = s_a + s_m; the update is skipped while
 * k <= s. A failed factorization of S is retried with a ridge of
 * 1e-8 trace(Sigma) / n.
 */
KalmanState kalman_step(const KalmanState& state, const Eigen::Ref<const Eigen::VectorXd>& z,
                        const Eigen::Ref<const Eigen::MatrixXd>& Y, const KalmanConfig& cfg);

struct TraceRow {
    int t = 0;
    double coefficient_norm = 0.0;
    double trace_p = 0.0;
    double trace_sigma = 0.0;
};

struct KalmanFit {
    FitResult result;
    /// nu_hat(t) for t = first_time..T, (T - first_time + 1) x n.
    Eigen::MatrixXd filter_residuals;
    std::vector<TraceRow> trace;
    KalmanState final_state;
};

/**
 * Single forward pass over t = t0+1..T.
 *
 * The fitted values are the in-sample one-step predictions Y(t) c_T built from
 * the final coefficients and the stored residual history; mse averages their
 * squared errors. sigma2_hat is trace(Sigma_T) / n.
 */
KalmanFit fit_kalman(const PanelSeries& Z, const WeightMatrixSet& W, const ModelSpec& spec,
                     const WaveletDictionary& dict, const KalmanConfig& cfg = {});

}  // namespace tvstarma

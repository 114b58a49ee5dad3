#include "tvstarma/kalman.hpp"

#include "tvstarma/error.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <cmath>
#include <sstream>

namespace tvstarma {

namespace {

// Some B with B B' = A, for symmetric positive semidefinite A.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& A) {
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

struct ArrayUpdate {
    Eigen::MatrixXd s_sqrt;  // lower triangular, S = Y P Y' + Sigma
    Eigen::MatrixXd kbar;    // P Y' S^{-T/2}
    Eigen::MatrixXd l_next;  // square root of the updated P

    bool nonsingular() const {
        const Eigen::VectorXd d = s_sqrt.diagonal();
        return d.allFinite() && d.minCoeff() > 1e-12 * d.maxCoeff();
    }
};

// Square-root covariance update: an orthogonal transform takes [Sigma^{1/2}, Y L; 0, L] to the
// lower-triangular [S^{1/2}, 0; Kbar, L+]. P itself is never differenced, which keeps a diffuse P0 accurate.
ArrayUpdate array_update(const Eigen::MatrixXd& sigma_sqrt, const Eigen::MatrixXd& Y, const Eigen::MatrixXd& L) {
    const Eigen::Index n = Y.rows();
    const Eigen::Index d = L.rows();
    Eigen::MatrixXd pre = Eigen::MatrixXd::Zero(n + d, n + d);
    pre.topLeftCorner(n, n) = sigma_sqrt;
    pre.topRightCorner(n, d) = Y * L;
    pre.bottomRightCorner(d, d) = L;
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(pre.transpose());
    Eigen::MatrixXd post = qr.matrixQR().triangularView<Eigen::Upper>().toDenseMatrix().transpose();
    for (Eigen::Index i = 0; i < n + d; ++i)
        if (post(i, i) < 0.0) post.col(i) *= -1.0;
    return {post.topLeftCorner(n, n), post.bottomLeftCorner(d, n), post.bottomRightCorner(d, d)};
}

}  // namespace

void KalmanConfig::validate() const {
    if (!(h > 0.0)) throw ValidationError("kalman: h must be positive");
    if (!(p0_scale > 0.0)) throw ValidationError("kalman: p0_scale must be positive");
    if (t0 < 0) throw ValidationError("kalman: t0 must be >= 0");
    if (!(divergence_bound > 0.0)) throw ValidationError("kalman: divergence_bound must be positive");
}

KalmanState KalmanState::initial(const ModelSpec& spec, int n, const KalmanConfig& cfg) {
    const int dim = spec.coefficient_count();
    KalmanState state;
    state.c = Eigen::VectorXd::Zero(dim);
    state.P = cfg.p0_scale * Eigen::MatrixXd::Identity(dim, dim);
    state.P_sqrt = std::sqrt(cfg.p0_scale) * Eigen::MatrixXd::Identity(dim, dim);
    state.sigma = cfg.h * Eigen::MatrixXd::Identity(n, n);
    state.residual_lags.assign(static_cast<std::size_t>(std::max(spec.q, 1)), Eigen::VectorXd::Zero(n));
    state.t = cfg.t0 > 0 ? cfg.t0 : spec.max_time_lag();
    state.lag_count = spec.ar_lag_count() + spec.ma_lag_count();
    return state;
}

Eigen::MatrixXd build_regressor(int t, const PanelSeries& Z, std::span<const Eigen::VectorXd> residual_lags,
                                const WeightMatrixSet& W, const ModelSpec& spec, const WaveletDictionary& dict) {
    if (t <= spec.max_time_lag() || t > Z.T()) {
        throw ValidationError("build_regressor: time index " + std::to_string(t) + " outside (" +
                              std::to_string(spec.max_time_lag()) + ", " + std::to_string(Z.T()) + "]");
    }
    if (dict.T() != Z.T() || dict.J() != spec.J) throw ValidationError("build_regressor: dictionary mismatch");
    const int n = Z.n();
    const int K = spec.basis_count();
    const Eigen::VectorXd psi = dict.row(t);

    Eigen::MatrixXd Y(n, spec.coefficient_count());
    const auto ar = spec.ar_lags();
    for (int lag = 0; lag < static_cast<int>(ar.size()); ++lag) {
        const Lag lg = ar[static_cast<std::size_t>(lag)];
        const Eigen::VectorXd reg = spatial_lag(W, Z.at(t - lg.s), lg.l);
        for (int b = 0; b < K; ++b) Y.col(spec.ar_index(b, lag)) = psi[b] * reg;
    }
    const auto ma = spec.ma_lags();
    for (int lag = 0; lag < static_cast<int>(ma.size()); ++lag) {
        const Lag lg = ma[static_cast<std::size_t>(lag)];
        const auto idx = static_cast<std::size_t>(lg.s - 1);
        Eigen::VectorXd reg = Eigen::VectorXd::Zero(n);
        if (idx < residual_lags.size()) reg = spatial_lag(W, residual_lags[idx], lg.l);
        for (int b = 0; b < K; ++b) Y.col(spec.ma_index(b, lag)) = -psi[b] * reg;
    }
    return Y;
}

Eigen::MatrixXd build_regressor(int t, const PanelSeries& Z, const std::deque<Eigen::VectorXd>& residual_lags,
                                const WeightMatrixSet& W, const ModelSpec& spec, const WaveletDictionary& dict) {
    const std::vector<Eigen::VectorXd> lags(residual_lags.begin(), residual_lags.end());
    return build_regressor(t, Z, std::span<const Eigen::VectorXd>(lags), W, spec, dict);
}

KalmanState kalman_step(const KalmanState& state, const Eigen::Ref<const Eigen::VectorXd>& z,
                        const Eigen::Ref<const Eigen::MatrixXd>& Y, const KalmanConfig& cfg) {
    const Eigen::Index n = z.size();
    if (Y.rows() != n || Y.cols() != state.c.size() || state.sigma.rows() != n) {
        throw ValidationError("kalman_step: dimension mismatch");
    }

    KalmanState next = state;
    next.t = state.t + 1;

    const Eigen::MatrixXd L = state.P_sqrt.rows() == state.P.rows() ? state.P_sqrt : psd_sqrt(state.P);
    auto upd = array_update(psd_sqrt(state.sigma), Y, L);
    if (!upd.nonsingular()) {
        const double ridge = 1e-8 * state.sigma.trace() / static_cast<double>(n);
        upd = array_update(psd_sqrt(state.sigma + ridge * Eigen::MatrixXd::Identity(n, n)), Y, L);
        ++next.ridge_events;
        if (!upd.nonsingular()) {
            throw NumericalError("kalman_step: innovation covariance not positive definite at t = " +
                                 std::to_string(next.t));
        }
    }

    // gain = Kbar S^{-1/2}
    const Eigen::VectorXd innovation = z - Y * state.c;
    next.c = state.c + upd.kbar * upd.s_sqrt.triangularView<Eigen::Lower>().solve(innovation);
    next.P_sqrt = std::move(upd.l_next);
    next.P = next.P_sqrt * next.P_sqrt.transpose();
    next.P = 0.5 * (next.P + next.P.transpose()).eval();

    if (!next.c.allFinite() || next.c.norm() > cfg.divergence_bound) {
        std::ostringstream os;
        os << "kalman filter diverged at t = " << next.t << " (|c| = " << next.c.norm() << ")";
        throw NumericalError(os.str());
    }

    Eigen::VectorXd resid = z - Y * next.c;
    if (!cfg.freeze_sigma) {
        const int excess = next.t - state.lag_count;
        if (excess >= 1) {
            next.sigma = (excess * state.sigma + resid * resid.transpose()) / static_cast<double>(excess + 1);
            next.sigma = 0.5 * (next.sigma + next.sigma.transpose()).eval();
        }
    }
    next.residual_lags.push_front(std::move(resid));
    next.residual_lags.pop_back();
    return next;
}

KalmanFit fit_kalman(const PanelSeries& Z, const WeightMatrixSet& W, const ModelSpec& spec,
                     const WaveletDictionary& dict, const KalmanConfig& cfg) {
    cfg.validate();
    spec.validate(W.max_order());
    Z.validate();
    const int T = Z.T();
    const int n = Z.n();
    if (W.n() != n) throw ValidationError("fit_kalman: weight matrices do not match the panel's station count");
    if (dict.T() != T || dict.J() != spec.J || dict.family() != spec.family) {
        throw ValidationError("fit_kalman: dictionary was built for a different T, J or family");
    }
    const int lag_count = spec.ar_lag_count() + spec.ma_lag_count();
    if (T <= spec.max_time_lag() + lag_count) {
        throw ValidationError("fit_kalman: need T > max(p, q) + s_a + s_m");
    }
    if (cfg.t0 != 0 && cfg.t0 < spec.max_time_lag()) throw ValidationError("fit_kalman: t0 must be >= max(p, q)");
    if (cfg.t0 >= T) throw ValidationError("fit_kalman: t0 must be < T");

    KalmanFit out;
    KalmanState state = KalmanState::initial(spec, n, cfg);
    const int first = state.t + 1;
    const int steps = T - first + 1;
    out.filter_residuals.resize(steps, n);
    std::vector<Eigen::MatrixXd> regressors;
    regressors.reserve(static_cast<std::size_t>(steps));

    for (int t = first; t <= T; ++t) {
        Eigen::MatrixXd Y = build_regressor(t, Z, state.residual_lags, W, spec, dict);
        state = kalman_step(state, Z.at(t), Y, cfg);
        out.filter_residuals.row(t - first) = state.residual_lags.front().transpose();
        regressors.push_back(std::move(Y));
        if (cfg.trace) out.trace.push_back({t, state.c.norm(), state.P.trace(), state.sigma.trace()});
    }

    FitResult& fit = out.result;
    fit.spec = spec;
    fit.method = FitMethod::Kalman;
    fit.coefficients = state.c;
    fit.first_time = first;
    fit.fitted.resize(steps, n);
    for (int k = 0; k < steps; ++k) fit.fitted.row(k) = (regressors[static_cast<std::size_t>(k)] * state.c).transpose();
    fit.residuals = Z.values.bottomRows(steps) - fit.fitted;
    fit.sigma_hat = state.sigma;
    fit.sigma2_hat = state.sigma.trace() / static_cast<double>(n);
    fit.mse = mean_squared_error(fit.residuals);
    if (state.ridge_events > 0) {
        fit.warnings.push_back("innovation covariance needed a ridge in " + std::to_string(state.ridge_events) +
                               " step(s)");
    }
    attach_curves(fit, dict);
    out.final_state = std::move(state);
    return out;
}

}  // namespace tvstarma

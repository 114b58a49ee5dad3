#include "tvstarma/ls.hpp"

#include "tvstarma/error.hpp"

#include <cmath>
#include <sstream>

namespace tvstarma {

Eigen::MatrixXd lagged_regressor(const PanelSeries& Z, const WeightMatrixSet& W, Lag lag) {
    const int T = Z.T();
    const int n = Z.n();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(T, n);
    if (lag.s >= T) return out;
    // rows t - 1 for t = s+1..T hold Z(t - s); earlier rows stay zero.
    auto src = Z.values.topRows(T - lag.s);
    if (lag.l == 0) {
        out.bottomRows(T - lag.s) = src;
    } else {
        out.bottomRows(T - lag.s) = src * W[lag.l].transpose();
    }
    return out;
}

DesignMatrix build_design(const PanelSeries& Z, const WeightMatrixSet& W, const ModelSpec& spec,
                          const WaveletDictionary& dict) {
    if (spec.q != 0) throw ValidationError("build_design: the least squares design covers tvSTAR models (q = 0)");
    spec.validate(W.max_order());
    const int T = Z.T();
    const int n = Z.n();
    if (T <= spec.p) throw ValidationError("build_design: need T > p");
    if (W.n() != n) throw ValidationError("build_design: weight matrices do not match the panel's station count");
    if (dict.T() != T || dict.J() != spec.J || dict.family() != spec.family) {
        throw ValidationError("build_design: dictionary was built for a different T, J or family");
    }

    const auto lags = spec.ar_lags();
    const int sa = spec.ar_lag_count();
    const int K = spec.basis_count() * sa;
    const int rows = T - spec.p;
    if (K >= n * rows) {
        throw ValidationError("build_design: " + std::to_string(K) + " coefficients for only " +
                              std::to_string(n * rows) + " observations");
    }

    std::vector<Eigen::MatrixXd> regressors;
    regressors.reserve(lags.size());
    for (const Lag& lag : lags) regressors.push_back(lagged_regressor(Z, W, lag));

    DesignMatrix design{Eigen::MatrixXd(n * rows, K), spec, dict, T, n};
    const auto& basis = dict.values();
    for (int i = 0; i < n; ++i) {
        for (int t = spec.p + 1; t <= T; ++t) {
            const int row = i * rows + (t - spec.p - 1);
            for (int b = 0; b < spec.basis_count(); ++b) {
                const double w = basis(t - 1, b);
                for (int lag = 0; lag < sa; ++lag) {
                    design.psi(row, spec.ar_index(b, lag)) = w * regressors[static_cast<std::size_t>(lag)](t - 1, i);
                }
            }
        }
    }
    return design;
}

Eigen::VectorXd stack_response(const PanelSeries& Z, int p) {
    const int rows = Z.T() - p;
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows) * Z.n());
    for (int i = 0; i < Z.n(); ++i) y.segment(static_cast<Eigen::Index>(i) * rows, rows) = Z.values.col(i).tail(rows);
    return y;
}

FitResult fit_ls(const DesignMatrix& design, const PanelSeries& Z) {
    if (Z.T() != design.T || Z.n() != design.n) throw ValidationError("fit_ls: panel does not match the design");
    const Eigen::VectorXd y = stack_response(Z, design.spec.p);
    const Eigen::Index N = design.psi.rows();
    const Eigen::Index K = design.psi.cols();

    FitResult fit;
    fit.spec = design.spec;
    fit.method = FitMethod::LeastSquares;

    for (int i = 0; i < Z.n(); ++i) {
        const auto col = Z.values.col(i);
        if ((col.array() == col[0]).all()) {
            fit.warnings.push_back("station '" + Z.station_ids[static_cast<std::size_t>(i)] +
                                   "' has a constant series; its design rows carry no variation");
        }
    }
    for (Eigen::Index c = 0; c < K; ++c) {
        if (design.psi.col(c).squaredNorm() == 0.0) {
            fit.warnings.push_back("design column " + std::to_string(c) + " is identically zero");
        }
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design.psi);
    const auto r_diag = qr.matrixR().diagonal().cwiseAbs();
    const double largest = r_diag.size() ? r_diag.maxCoeff() : 0.0;
    const double smallest = r_diag.size() ? r_diag.minCoeff() : 0.0;
    if (!(largest > 0.0) || smallest <= 1e-10 * largest) {
        std::ostringstream os;
        os << "fit_ls: design matrix is rank deficient (smallest QR pivot " << smallest << ", largest " << largest
           << ")";
        throw NumericalError(os.str());
    }
    fit.coefficients = qr.solve(y);

    const Eigen::VectorXd fitted = design.psi * fit.coefficients;
    const Eigen::VectorXd resid = y - fitted;
    const int rows = design.rows_per_station();
    fit.first_time = design.first_time();
    fit.fitted = Eigen::Map<const Eigen::MatrixXd>(fitted.data(), rows, design.n);
    fit.residuals = Eigen::Map<const Eigen::MatrixXd>(resid.data(), rows, design.n);
    fit.sigma2_hat = resid.squaredNorm() / static_cast<double>(N - K);
    fit.sigma_hat = fit.sigma2_hat * Eigen::MatrixXd::Identity(design.n, design.n);
    fit.mse = mean_squared_error(fit.residuals);
    attach_curves(fit, design.dictionary);
    return fit;
}

Eigen::MatrixXd predict_one_step(const FitResult& fit, const PanelSeries& Z, const WeightMatrixSet& W,
                                 const ModelSpec& spec) {
    if (spec.q != 0) throw ValidationError("predict_one_step: AR-only spec expected");
    const auto lags = spec.ar_lags();
    if (fit.ar_curves.size() != lags.size()) throw ValidationError("predict_one_step: fit does not match spec");
    const int T = Z.T();
    for (const auto& c : fit.ar_curves)
        if (c.values.size() != T) throw ValidationError("predict_one_step: curve length differs from panel length");
    if (W.n() != Z.n()) throw ValidationError("predict_one_step: weight matrices do not match the panel");

    const int rows = T - spec.p;
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows, Z.n());
    for (std::size_t k = 0; k < lags.size(); ++k) {
        const Eigen::MatrixXd reg = lagged_regressor(Z, W, lags[k]);
        const auto& curve = fit.ar_curves[k].values;
        for (int t = spec.p + 1; t <= T; ++t) out.row(t - spec.p - 1) += curve[t - 1] * reg.row(t - 1);
    }
    return out;
}

}  // namespace tvstarma

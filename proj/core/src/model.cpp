#include "tvstarma/model.hpp"

#include "tvstarma/error.hpp"

#include <numeric>
#include <sstream>

namespace tvstarma {
namespace {

std::string orders(const std::vector<int>& spatial) {
    std::ostringstream os;
    for (std::size_t s = 0; s < spatial.size(); ++s) {
        if (s) os << ',';
        os << (s + 1) << '_' << spatial[s];
    }
    return os.str();
}

}  // namespace

ModelSpec ModelSpec::tvstar(int p, std::vector<int> lambda, int J) {
    ModelSpec spec;
    spec.p = p;
    spec.lambda = std::move(lambda);
    spec.q = 0;
    spec.m.clear();
    spec.J = J;
    return spec;
}

ModelSpec ModelSpec::tvstarma(int p, std::vector<int> lambda, int q, std::vector<int> m, int J) {
    ModelSpec spec = tvstar(p, std::move(lambda), J);
    spec.q = q;
    spec.m = std::move(m);
    return spec;
}

int ModelSpec::ar_lag_count() const {
    return std::accumulate(lambda.begin(), lambda.end(), 0, [](int acc, int order) { return acc + 1 + order; });
}

int ModelSpec::ma_lag_count() const {
    return std::accumulate(m.begin(), m.end(), 0, [](int acc, int order) { return acc + 1 + order; });
}

int ModelSpec::max_spatial_order() const {
    int out = 0;
    for (int v : lambda) out = std::max(out, v);
    for (int v : m) out = std::max(out, v);
    return out;
}

std::vector<Lag> ModelSpec::ar_lags() const {
    std::vector<Lag> out;
    for (int s = 1; s <= p; ++s)
        for (int l = 0; l <= lambda[static_cast<std::size_t>(s - 1)]; ++l) out.push_back({s, l});
    return out;
}

std::vector<Lag> ModelSpec::ma_lags() const {
    std::vector<Lag> out;
    for (int s = 1; s <= q; ++s)
        for (int l = 0; l <= m[static_cast<std::size_t>(s - 1)]; ++l) out.push_back({s, l});
    return out;
}

std::string ModelSpec::label() const {
    std::string out = q == 0 ? "tvSTAR(" + orders(lambda) + ")" : "tvSTARMA(" + orders(lambda) + ";" + orders(m) + ")";
    return out + "_J" + std::to_string(J);
}

void ModelSpec::validate(int max_weight_order) const {
    if (p < 1) throw ValidationError("model: AR order p must be >= 1");
    if (q < 0) throw ValidationError("model: MA order q must be >= 0");
    if (static_cast<int>(lambda.size()) != p) throw ValidationError("model: lambda must list p spatial orders");
    if (static_cast<int>(m.size()) != q) throw ValidationError("model: m must list q spatial orders");
    if (J < 1) throw ValidationError("model: resolution J must be >= 1");
    for (int v : lambda)
        if (v < 0) throw ValidationError("model: spatial orders must be >= 0");
    for (int v : m)
        if (v < 0) throw ValidationError("model: spatial orders must be >= 0");
    if (max_spatial_order() > max_weight_order) {
        throw ValidationError("model: spatial order " + std::to_string(max_spatial_order()) +
                              " exceeds the weight set's maximum " + std::to_string(max_weight_order));
    }
}

PanelSeries::PanelSeries(Eigen::MatrixXd v, std::vector<std::string> ids)
    : values(std::move(v)), station_ids(std::move(ids)) {}

Eigen::VectorXd PanelSeries::at(int t) const {
    if (t <= 0) return Eigen::VectorXd::Zero(values.cols());
    return values.row(t - 1).transpose();
}

void PanelSeries::validate() const {
    if (values.rows() < 2 || values.cols() < 1) throw ValidationError("panel must have T >= 2 and n >= 1");
    if (static_cast<Eigen::Index>(station_ids.size()) != values.cols()) {
        throw ValidationError("panel has " + std::to_string(values.cols()) + " columns but " +
                              std::to_string(station_ids.size()) + " station ids");
    }
    for (Eigen::Index t = 0; t < values.rows(); ++t)
        for (Eigen::Index i = 0; i < values.cols(); ++i)
            if (!std::isfinite(values(t, i))) {
                throw ValidationError("panel value at t=" + std::to_string(t + 1) + ", station '" +
                                      station_ids[static_cast<std::size_t>(i)] + "' is not finite");
            }
}

std::vector<std::string> default_station_ids(int n) {
    std::vector<std::string> ids;
    for (int i = 1; i <= n; ++i) ids.push_back("s" + std::to_string(i));
    return ids;
}

std::string to_string(FitMethod method) { return method == FitMethod::LeastSquares ? "ls" : "kalman"; }

double mean_squared_error(const Eigen::MatrixXd& residuals) {
    if (residuals.size() == 0) return 0.0;
    return residuals.squaredNorm() / static_cast<double>(residuals.size());
}

void attach_curves(FitResult& fit, const WaveletDictionary& dict) {
    const ModelSpec& spec = fit.spec;
    const int K = spec.basis_count();
    fit.ar_curves.clear();
    fit.ma_curves.clear();
    const auto ar = spec.ar_lags();
    for (int lag = 0; lag < static_cast<int>(ar.size()); ++lag) {
        Eigen::VectorXd beta(K);
        for (int b = 0; b < K; ++b) beta[b] = fit.coefficients[spec.ar_index(b, lag)];
        fit.ar_curves.push_back(reconstruct_curve(beta, dict, ar[static_cast<std::size_t>(lag)]));
    }
    const auto ma = spec.ma_lags();
    for (int lag = 0; lag < static_cast<int>(ma.size()); ++lag) {
        Eigen::VectorXd beta(K);
        for (int b = 0; b < K; ++b) beta[b] = fit.coefficients[spec.ma_index(b, lag)];
        fit.ma_curves.push_back(reconstruct_curve(beta, dict, ma[static_cast<std::size_t>(lag)]));
    }
}

}  // namespace tvstarma

#include "tvstarma/simulation.hpp"

#include "tvstarma/error.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

namespace tvstarma {

std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) { return mix_seed(mix_seed(base) ^ index); }

Rng make_rng(std::uint64_t seed) { return Rng(mix_seed(seed)); }

std::string to_string(CoefficientPreset preset) {
    switch (preset) {
        case CoefficientPreset::Group1: return "group1";
        case CoefficientPreset::Group2: return "group2";
        case CoefficientPreset::Custom: return "custom";
    }
    return "custom";
}

int CoefficientFunctions::ar_order() const {
    int p = 0;
    for (const auto& [lag, f] : phi) p = std::max(p, lag.s);
    return p;
}

int CoefficientFunctions::ma_order() const {
    int q = 0;
    for (const auto& [lag, f] : theta) q = std::max(q, lag.s);
    return q;
}

int CoefficientFunctions::max_spatial_order() const {
    int l = 0;
    for (const auto& [lag, f] : phi) l = std::max(l, lag.l);
    for (const auto& [lag, f] : theta) l = std::max(l, lag.l);
    return l;
}

Eigen::VectorXd CoefficientFunctions::ar_curve(Lag lag, int T) const {
    const auto it = phi.find(lag);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(T);
    if (it == phi.end()) return out;
    for (int t = 1; t <= T; ++t) out[t - 1] = it->second(static_cast<double>(t) / T);
    return out;
}

Eigen::VectorXd CoefficientFunctions::fitted_ma_truth(Lag lag, int T) const {
    const auto it = theta.find(lag);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(T);
    if (it == theta.end()) return out;
    for (int t = 1; t <= T; ++t) out[t - 1] = -it->second(static_cast<double>(t) / T);
    return out;
}

CoefficientFunctions preset_group1() {
    CoefficientFunctions f;
    f.preset = CoefficientPreset::Group1;
    f.phi[{1, 0}] = [](double u) { return 0.5 - std::sin(2.0 * std::numbers::pi * u) / 4.0; };
    f.phi[{1, 1}] = [](double u) { return -0.5 - std::cos(2.0 * std::numbers::pi * u) / 4.0; };
    return f;
}

CoefficientFunctions preset_group2() {
    CoefficientFunctions f;
    f.preset = CoefficientPreset::Group2;
    f.phi[{1, 0}] = [](double u) { return 0.5 * (1.0 - u) * (1.0 - u); };
    f.phi[{1, 1}] = [](double u) { return -0.5 * (1.0 - u) * (1.0 - u); };
    f.theta[{1, 0}] = [](double u) { return 0.5 * u * u; };
    f.theta[{1, 1}] = [](double u) { return -0.5 * u * u; };
    return f;
}

CoefficientFunctions constant_coefficients(const std::map<Lag, double>& phi, const std::map<Lag, double>& theta) {
    CoefficientFunctions f;
    for (const auto& [lag, v] : phi) f.phi[lag] = [v](double) { return v; };
    for (const auto& [lag, v] : theta) f.theta[lag] = [v](double) { return v; };
    return f;
}

CoefficientFunctions wavelet_coefficients(const std::map<Lag, Eigen::VectorXd>& phi, int J, WaveletFamily family) {
    CoefficientFunctions f;
    for (const auto& [lag, beta] : phi) {
        if (beta.size() != (1 << J)) throw ValidationError("wavelet_coefficients: need 2^J coefficients per curve");
        f.phi[lag] = [beta, J, family](double u) {
            double v = beta[0] * WaveletDictionary::basis_value(family, -1, 0, u);
            for (int j = 0; j < J; ++j)
                for (int k = 0; k < (1 << j); ++k)
                    v += beta[WaveletDictionary::column_index(j, k)] * WaveletDictionary::basis_value(family, j, k, u);
            return v;
        };
    }
    return f;
}

namespace {

PanelSeries simulate_process(const CoefficientFunctions& funcs, const WeightMatrixSet& W, int T, int n,
                             double sigma2, std::uint64_t seed, bool with_ma) {
    if (T < 2) throw ValidationError("simulate: T must be >= 2");
    if (n != W.n()) throw ValidationError("simulate: n does not match the weight matrices");
    if (!(sigma2 >= 0.0)) throw ValidationError("simulate: sigma2 must be >= 0");
    if (funcs.max_spatial_order() > W.max_order()) {
        throw ValidationError("simulate: coefficient spatial order exceeds the weight set");
    }

    Rng rng = make_rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sd = std::sqrt(sigma2);

    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(T + 1, n);    // row 0 holds z(0) = 0
    Eigen::MatrixXd eps = Eigen::MatrixXd::Zero(T + 1, n);  // row 0 holds eps(0) = 0
    for (int t = 1; t <= T; ++t) {
        for (int i = 0; i < n; ++i) eps(t, i) = sd * normal(rng);
    }

    const double u_scale = 1.0 / T;
    for (int t = 1; t <= T; ++t) {
        const double u = t * u_scale;
        Eigen::VectorXd next = eps.row(t).transpose();
        for (const auto& [lag, f] : funcs.phi) {
            if (t - lag.s < 0) continue;
            const Eigen::VectorXd prev = z.row(t - lag.s).transpose();
            next += f(u) * (lag.l == 0 ? prev : Eigen::VectorXd(W[lag.l] * prev));
        }
        if (with_ma) {
            for (const auto& [lag, f] : funcs.theta) {
                if (t - lag.s < 0) continue;
                const Eigen::VectorXd prev = eps.row(t - lag.s).transpose();
                next += f(u) * (lag.l == 0 ? prev : Eigen::VectorXd(W[lag.l] * prev));
            }
        }
        if (!next.allFinite() || next.norm() > 1e8) {
            throw NumericalError("simulate: explosive trajectory at t = " + std::to_string(t));
        }
        z.row(t) = next.transpose();
    }
    return PanelSeries(z.bottomRows(T), default_station_ids(n));
}

}  // namespace

PanelSeries simulate_tvstar(const CoefficientFunctions& funcs, const WeightMatrixSet& W, int T, int n,
                            double sigma2, std::uint64_t seed) {
    if (funcs.has_ma()) throw ValidationError("simulate_tvstar: coefficient set has MA terms");
    return simulate_process(funcs, W, T, n, sigma2, seed, false);
}

PanelSeries simulate_tvstarma(const CoefficientFunctions& funcs, const WeightMatrixSet& W, int T, int n,
                              double sigma2, std::uint64_t seed) {
    return simulate_process(funcs, W, T, n, sigma2, seed, true);
}

void GneitingCovarianceSpec::validate() const {
    if (!(sigma2 > 0.0)) throw ValidationError("gneiting: sigma2 must be positive");
    if (!(zeta > 0.0)) throw ValidationError("gneiting: zeta must be positive");
    if (!(delta > 0.0)) throw ValidationError("gneiting: delta must be positive");
    if (!(gamma > 0.0)) throw ValidationError("gneiting: gamma must be positive");
    if (!(nugget >= 0.0)) throw ValidationError("gneiting: nugget must be >= 0");
    if (d < 1) throw ValidationError("gneiting: spatial dimension must be >= 1");
}

std::string GneitingCovarianceSpec::label() const {
    std::ostringstream os;
    os << "gamma=" << gamma << " delta=" << delta;
    return os.str();
}

double gneiting_covariance(double h, double tau, const GneitingCovarianceSpec& spec) {
    const double lag = std::abs(tau);
    const double beta = std::pow(std::pow(lag, spec.zeta) + 1.0, spec.delta / spec.zeta);
    double c = spec.sigma2 / std::pow(beta, 0.5 * spec.d) * std::exp(-std::abs(h) / (spec.gamma * std::sqrt(beta)));
    if (h == 0.0 && tau == 0.0) c += spec.nugget;
    return c;
}

GrfSampler::GrfSampler(const StationGeometry& geom, int T, const GneitingCovarianceSpec& spec, DistanceScale scale)
    : T_(T), n_(geom.size()), spec_(spec), distances_(geom.distance_matrix(scale)), ids_(geom.ids()) {
    spec_.validate();
    if (T < 1) throw ValidationError("simulate_grf: T must be >= 1");
    const long long cells = static_cast<long long>(T) * n_;
    if (cells > kMaxCells) {
        throw ValidationError("simulate_grf: n T = " + std::to_string(cells) + " exceeds the dense limit " +
                              std::to_string(kMaxCells));
    }
    factor_ = covariance();
    Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt(factor_);
    if (llt.info() != Eigen::Success) {
        factor_ = covariance();
        factor_.diagonal().array() += 1e-8 * spec_.sigma2;
        llt.compute(factor_);
        jittered_ = true;
        if (llt.info() != Eigen::Success) {
            throw NumericalError("simulate_grf: covariance not positive definite after jitter (" + spec_.label() + ")");
        }
    }
    factor_.triangularView<Eigen::StrictlyUpper>().setZero();
}

Eigen::MatrixXd GrfSampler::covariance() const {
    const Eigen::Index N = static_cast<Eigen::Index>(T_) * n_;
    Eigen::MatrixXd cov(N, N);
    for (int t = 0; t < T_; ++t) {
        for (int s = 0; s < T_; ++s) {
            const double tau = t - s;
            for (int i = 0; i < n_; ++i)
                for (int j = 0; j < n_; ++j)
                    cov(static_cast<Eigen::Index>(t) * n_ + i, static_cast<Eigen::Index>(s) * n_ + j) =
                        gneiting_covariance(i == j ? 0.0 : distances_(i, j), tau, spec_);
        }
    }
    return cov;
}

PanelSeries GrfSampler::draw(std::uint64_t seed) const {
    Rng rng = make_rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const Eigen::Index N = factor_.rows();
    Eigen::VectorXd xi(N);
    for (Eigen::Index k = 0; k < N; ++k) xi[k] = normal(rng);
    const Eigen::VectorXd x = factor_.triangularView<Eigen::Lower>() * xi;
    Eigen::MatrixXd values(T_, n_);
    for (int t = 0; t < T_; ++t)
        for (int i = 0; i < n_; ++i) values(t, i) = x[static_cast<Eigen::Index>(t) * n_ + i];
    return PanelSeries(std::move(values), ids_);
}

PanelSeries simulate_grf(const StationGeometry& geom, int T, const GneitingCovarianceSpec& spec, std::uint64_t seed,
                         DistanceScale scale) {
    return GrfSampler(geom, T, spec, scale).draw(seed);
}

StationGeometry random_geometry(int n, const BoundingBox& box, std::uint64_t seed) {
    if (n < 2) throw ValidationError("random_geometry: n must be >= 2");
    if (!(box.lat_min < box.lat_max && box.lon_min < box.lon_max) || box.lat_min < -90.0 || box.lat_max > 90.0 ||
        box.lon_min < -180.0 || box.lon_max > 180.0) {
        throw ValidationError("random_geometry: invalid bounding box");
    }
    Rng rng = make_rng(seed);
    std::uniform_real_distribution<double> lat(box.lat_min, box.lat_max);
    std::uniform_real_distribution<double> lon(box.lon_min, box.lon_max);
    std::vector<Station> stations;
    int attempts = 0;
    while (static_cast<int>(stations.size()) < n) {
        if (++attempts > 1000 * n) throw NumericalError("random_geometry: could not place distinct stations");
        const GeoPoint p{lat(rng), lon(rng)};
        bool clash = false;
        for (const auto& s : stations) clash = clash || great_circle_distance(p, s.location) < 1e-3;
        if (clash) continue;
        char id[16];
        std::snprintf(id, sizeof id, "S%02zu", stations.size() + 1);
        stations.push_back({id, p});
    }
    return StationGeometry(std::move(stations));
}

}  // namespace tvstarma

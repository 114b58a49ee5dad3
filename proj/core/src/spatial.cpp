#include "tvstarma/spatial.hpp"

#include "tvstarma/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

namespace tvstarma {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

std::string format_alpha(double alpha) {
    std::ostringstream os;
    os << alpha;
    return os.str();
}

template <class Kernel>
Eigen::MatrixXd row_normalized(const Eigen::MatrixXd& d, const StationGeometry& geom, Kernel kernel) {
    const Eigen::Index n = d.rows();
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double row_min = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) continue;
            if (!(d(i, j) > 0.0)) {
                throw ValidationError("stations '" + geom[static_cast<int>(i)].id + "' and '" +
                                      geom[static_cast<int>(j)].id + "' share a location (zero distance)");
            }
            row_min = std::min(row_min, d(i, j));
        }
        double total = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) continue;
            w(i, j) = kernel(d(i, j), row_min);
            total += w(i, j);
        }
        w.row(i) /= total;
    }
    return w;
}

}  // namespace

double great_circle_distance(GeoPoint a, GeoPoint b, double radius) {
    // atan2 form of the central angle: the law of cosines loses about 1e-8 rad near zero.
    const double lat_a = a.lat * kDegToRad;
    const double lat_b = b.lat * kDegToRad;
    const double dlon = (b.lon - a.lon) * kDegToRad;
    const double x = std::cos(lat_b) * std::sin(dlon);
    const double y = std::cos(lat_a) * std::sin(lat_b) - std::sin(lat_a) * std::cos(lat_b) * std::cos(dlon);
    const double c = std::sin(lat_a) * std::sin(lat_b) + std::cos(lat_a) * std::cos(lat_b) * std::cos(dlon);
    return radius * std::atan2(std::hypot(x, y), c);
}

std::string to_string(DistanceScale scale) {
    switch (scale) {
        case DistanceScale::Kilometres: return "km";
        case DistanceScale::ArcDegrees: return "degrees";
        case DistanceScale::MaxNormalized: return "normalized";
    }
    return "unknown";
}

DistanceScale parse_distance_scale(std::string_view name) {
    if (name == "km") return DistanceScale::Kilometres;
    if (name == "degrees") return DistanceScale::ArcDegrees;
    if (name == "normalized") return DistanceScale::MaxNormalized;
    throw ValidationError("unknown distance scale '" + std::string(name) + "' (expected km, degrees, normalized)");
}

StationGeometry::StationGeometry(std::vector<Station> stations, double earth_radius)
    : stations_(std::move(stations)), earth_radius_(earth_radius) {
    if (stations_.size() < 2) throw ValidationError("station geometry needs at least 2 stations");
    if (!(earth_radius_ > 0.0)) throw ValidationError("earth radius must be positive");
    std::set<std::string> seen;
    for (const auto& s : stations_) {
        if (s.id.empty()) throw ValidationError("station id must be nonempty");
        if (!seen.insert(s.id).second) throw ValidationError("duplicate station id '" + s.id + "'");
        if (!(s.location.lat >= -90.0 && s.location.lat <= 90.0)) {
            throw ValidationError("station '" + s.id + "': latitude out of [-90, 90]");
        }
        if (!(s.location.lon >= -180.0 && s.location.lon <= 180.0)) {
            throw ValidationError("station '" + s.id + "': longitude out of [-180, 180]");
        }
    }
}

std::vector<std::string> StationGeometry::ids() const {
    std::vector<std::string> out;
    out.reserve(stations_.size());
    for (const auto& s : stations_) out.push_back(s.id);
    return out;
}

Eigen::MatrixXd StationGeometry::distance_matrix(DistanceScale scale) const {
    const int n = size();
    const double radius = scale == DistanceScale::ArcDegrees ? 180.0 / std::numbers::pi : earth_radius_;
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            d(i, j) = great_circle_distance(stations_[i].location, stations_[j].location, radius);
            d(j, i) = d(i, j);
        }
    }
    if (scale == DistanceScale::MaxNormalized) {
        const double dmax = d.maxCoeff();
        if (dmax > 0.0) d /= dmax;
    }
    return d;
}

StationGeometry StationGeometry::subset(const std::vector<int>& indices) const {
    std::vector<Station> out;
    out.reserve(indices.size());
    for (int i : indices) out.push_back(stations_.at(static_cast<std::size_t>(i)));
    return StationGeometry(std::move(out), earth_radius_);
}

std::string to_string(WeightKind kind) {
    return kind == WeightKind::InverseDistance ? "inverse_distance" : "negative_exponential";
}

WeightKind parse_weight_kind(std::string_view name) {
    if (name == "inverse_distance" || name == "di") return WeightKind::InverseDistance;
    if (name == "negative_exponential" || name == "ne") return WeightKind::NegativeExponential;
    throw ValidationError("unknown weight scheme '" + std::string(name) + "'");
}

std::string WeightScheme::label() const {
    return (kind == WeightKind::InverseDistance ? "di_a" : "ne_a") + format_alpha(alpha);
}

Eigen::MatrixXd inverse_distance_weights(const StationGeometry& geom, double alpha, DistanceScale scale) {
    if (!(alpha > 0.0)) throw ValidationError("inverse_distance_weights: alpha must be positive");
    const Eigen::MatrixXd d = geom.distance_matrix(scale);
    // Divide by the row minimum first; the ratio is unchanged by normalization.
    return row_normalized(d, geom, [alpha](double dij, double dmin) { return std::pow(dij / dmin, -alpha); });
}

Eigen::MatrixXd negative_exponential_weights(const StationGeometry& geom, double alpha, DistanceScale scale) {
    if (!(alpha > 0.0)) throw ValidationError("negative_exponential_weights: alpha must be positive");
    const Eigen::MatrixXd d = geom.distance_matrix(scale);
    // exp(-alpha (d - dmin)) keeps the nearest neighbour at weight 1 before normalization.
    return row_normalized(d, geom, [alpha](double dij, double dmin) { return std::exp(-alpha * (dij - dmin)); });
}

Eigen::MatrixXd simulation_weights(const StationGeometry& geom) {
    return inverse_distance_weights(geom, 0.5);
}

Eigen::MatrixXd weight_matrix(const StationGeometry& geom, const WeightScheme& scheme) {
    switch (scheme.kind) {
        case WeightKind::InverseDistance:
            return inverse_distance_weights(geom, scheme.alpha, scheme.scale);
        case WeightKind::NegativeExponential:
            return negative_exponential_weights(geom, scheme.alpha, scheme.scale);
    }
    throw ValidationError("unknown weight scheme");
}

void validate_weight_matrix(const Eigen::MatrixXd& w, double tol) {
    if (w.rows() != w.cols()) throw ValidationError("weight matrix must be square");
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        if (w(i, i) != 0.0) throw ValidationError("weight matrix row " + std::to_string(i) + ": nonzero diagonal");
        if ((w.row(i).array() < 0.0).any() || !w.row(i).allFinite()) {
            throw ValidationError("weight matrix row " + std::to_string(i) + ": negative or non-finite entry");
        }
        if (std::abs(w.row(i).sum() - 1.0) > tol) {
            throw ValidationError("weight matrix row " + std::to_string(i) + " does not sum to one");
        }
    }
}

WeightMatrixSet WeightMatrixSet::from_geometry(const StationGeometry& geom, const WeightScheme& scheme,
                                               int max_order) {
    if (max_order != 1) {
        throw ValidationError("only first-order weight matrices can be derived from geometry; supply W^(l), l >= 2 "
                              "explicitly");
    }
    return from_matrices({weight_matrix(geom, scheme)}, scheme);
}

WeightMatrixSet WeightMatrixSet::from_matrices(std::vector<Eigen::MatrixXd> higher, WeightScheme scheme) {
    if (higher.empty()) throw ValidationError("weight set needs at least W^(1)");
    const Eigen::Index n = higher.front().rows();
    WeightMatrixSet set;
    set.scheme_ = scheme;
    set.matrices_.reserve(higher.size() + 1);
    set.matrices_.push_back(Eigen::MatrixXd::Identity(n, n));
    for (auto& w : higher) {
        if (w.rows() != n) throw ValidationError("weight matrices differ in size");
        validate_weight_matrix(w);
        set.matrices_.push_back(std::move(w));
    }
    return set;
}

const Eigen::MatrixXd& WeightMatrixSet::operator[](int l) const {
    if (l < 0 || l > max_order()) {
        throw ValidationError("spatial order " + std::to_string(l) + " exceeds the weight set's maximum " +
                              std::to_string(max_order()));
    }
    return matrices_[static_cast<std::size_t>(l)];
}

WeightMatrixSet WeightMatrixSet::permuted(const std::vector<int>& perm) const {
    WeightMatrixSet out;
    out.scheme_ = scheme_;
    const auto np = static_cast<Eigen::Index>(perm.size());
    for (const auto& w : matrices_) {
        Eigen::MatrixXd p(np, np);
        for (Eigen::Index i = 0; i < np; ++i)
            for (Eigen::Index j = 0; j < np; ++j) p(i, j) = w(perm[i], perm[j]);
        out.matrices_.push_back(std::move(p));
    }
    return out;
}

Eigen::VectorXd spatial_lag(const WeightMatrixSet& weights, const Eigen::Ref<const Eigen::VectorXd>& z, int l) {
    if (z.size() != weights.n()) {
        throw ValidationError("spatial_lag: vector of length " + std::to_string(z.size()) + " for " +
                              std::to_string(weights.n()) + " stations");
    }
    if (l == 0) return z;
    return weights[l] * z;
}

}  // namespace tvstarma

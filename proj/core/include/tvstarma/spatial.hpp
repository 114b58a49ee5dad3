#pragma once

#include <Eigen/Dense>

#include <string>
#include <string_view>
#include <vector>

namespace tvstarma {

inline constexpr double kEarthRadiusKm = 6371.0;

struct GeoPoint {
    double lat = 0.0;  // degrees
    double lon = 0.0;  // degrees
};

struct Station {
    std::string id;
    GeoPoint location;
};

/// Great-circle distance (atan2 form of the central angle), in the units of `radius`.
double great_circle_distance(GeoPoint a, GeoPoint b, double radius = kEarthRadiusKm);

/// How raw great-circle distances are expressed before entering a kernel.
enum class DistanceScale {
    Kilometres,     // R * central angle
    ArcDegrees,     // central angle in degrees
    MaxNormalized,  // kilometres divided by the largest pairwise distance
};

std::string to_string(DistanceScale scale);
DistanceScale parse_distance_scale(std::string_view name);

/// Ordered station set. The order defines the station index everywhere downstream.
class StationGeometry {
public:
    StationGeometry() = default;
    explicit StationGeometry(std::vector<Station> stations, double earth_radius = kEarthRadiusKm);

    int size() const { return static_cast<int>(stations_.size()); }
    const std::vector<Station>& stations() const { return stations_; }
    const Station& operator[](int i) const { return stations_[static_cast<std::size_t>(i)]; }
    double earth_radius() const { return earth_radius_; }
    std::vector<std::string> ids() const;

    /// Symmetric n x n matrix with zero diagonal.
    Eigen::MatrixXd distance_matrix(DistanceScale scale = DistanceScale::Kilometres) const;

    /// Returns the geometry restricted (and reordered) to `indices`.
    StationGeometry subset(const std::vector<int>& indices) const;

private:
    std::vector<Station> stations_;
    double earth_radius_ = kEarthRadiusKm;
};

enum class WeightKind { InverseDistance, NegativeExponential };

std::string to_string(WeightKind kind);
WeightKind parse_weight_kind(std::string_view name);

struct WeightScheme {
    WeightKind kind = WeightKind::InverseDistance;
    double alpha = 1.0;
    DistanceScale scale = DistanceScale::ArcDegrees;

    /// Short column label, e.g. `di_a1` or `ne_a0.5`.
    std::string label() const;
};

/// w_ij = d_ij^{-alpha} / sum_{k != i} d_ik^{-alpha}, zero diagonal. Invariant to the distance scale.
Eigen::MatrixXd inverse_distance_weights(const StationGeometry& geom, double alpha,
                                         DistanceScale scale = DistanceScale::Kilometres);

/// w_ij = exp(-alpha d_ij) / sum_{k != i} exp(-alpha d_ik), zero diagonal.
Eigen::MatrixXd negative_exponential_weights(const StationGeometry& geom, double alpha,
                                             DistanceScale scale = DistanceScale::ArcDegrees);

/// Inverse-distance weights with alpha = 0.5, used by the simulation studies.
Eigen::MatrixXd simulation_weights(const StationGeometry& geom);

Eigen::MatrixXd weight_matrix(const StationGeometry& geom, const WeightScheme& scheme);

/**
 * W^(0) = I followed by row-normalized W^(1)..W^(lmax).
 *
 * Only first-order neighbourhoods can be derived from geometry; higher orders
 * must be supplied explicitly through from_matrices.
 */
class WeightMatrixSet {
public:
    WeightMatrixSet() = default;

    static WeightMatrixSet from_geometry(const StationGeometry& geom, const WeightScheme& scheme, int max_order = 1);

    /// `higher` holds W^(1)..W^(lmax); each is validated (zero diagonal, nonnegative, unit row sums).
    static WeightMatrixSet from_matrices(std::vector<Eigen::MatrixXd> higher, WeightScheme scheme = {});

    int n() const { return matrices_.empty() ? 0 : static_cast<int>(matrices_.front().rows()); }
    int max_order() const { return static_cast<int>(matrices_.size()) - 1; }
    const Eigen::MatrixXd& operator[](int l) const;
    const WeightScheme& scheme() const { return scheme_; }

    /// Same set with stations relabelled by `perm` (new index i holds old station perm[i]).
    WeightMatrixSet permuted(const std::vector<int>& perm) const;

private:
    std::vector<Eigen::MatrixXd> matrices_;
    WeightScheme scheme_;
};

/// Row sums more than `tol` away from one, negative entries, or nonzero diagonal throw ValidationError.
void validate_weight_matrix(const Eigen::MatrixXd& w, double tol = 1e-12);

/// l = 0 returns z; l >= 1 returns W^(l) z.
Eigen::VectorXd spatial_lag(const WeightMatrixSet& weights, const Eigen::Ref<const Eigen::VectorXd>& z, int l);

}  // namespace tvstarma

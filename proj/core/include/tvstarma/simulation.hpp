#pragma once

#include "tvstarma/model.hpp"
#include "tvstarma/random.hpp"
#include "tvstarma/spatial.hpp"
#include "tvstarma/wavelet.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <map>
#include <string>

namespace tvstarma {

using CurveFunction = std::function<double(double)>;

enum class CoefficientPreset { Group1, Group2, Custom };

std::string to_string(CoefficientPreset preset);

/**
 * Coefficient curves of a simulated process, keyed by (s, l).
 *
 * The MA curves enter the simulators with a plus sign,
 * z(t) = ... + theta_sl(t/T) W^(l) eps(t - s) + eps(t). The fitters use the
 * subtracted convention, so a fitted theta estimates -theta of the generator;
 * see fitted_ma_truth().
 */
struct CoefficientFunctions {
    std::map<Lag, CurveFunction> phi;
    std::map<Lag, CurveFunction> theta;
    CoefficientPreset preset = CoefficientPreset::Custom;

    int ar_order() const;
    int ma_order() const;
    int max_spatial_order() const;
    bool has_ma() const { return !theta.empty(); }

    /// phi_sl evaluated at u = t/T for t = 1..T.
    Eigen::VectorXd ar_curve(Lag lag, int T) const;
    /// -theta_sl on the grid: the curve a fitted MA coefficient should track.
    Eigen::VectorXd fitted_ma_truth(Lag lag, int T) const;
};

/// phi_10 = 0.5 - sin(2 pi u) / 4, phi_11 = -0.5 - cos(2 pi u) / 4.
CoefficientFunctions preset_group1();
/// phi_10 = 0.5 (1-u)^2, phi_11 = -0.5 (1-u)^2, theta_10 = 0.5 u^2, theta_11 = -0.5 u^2.
CoefficientFunctions preset_group2();

CoefficientFunctions constant_coefficients(const std::map<Lag, double>& phi, const std::map<Lag, double>& theta = {});

/// Curves given by wavelet coefficients against the (T-independent) basis functions.
CoefficientFunctions wavelet_coefficients(const std::map<Lag, Eigen::VectorXd>& phi, int J,
                                          WaveletFamily family = WaveletFamily::MexicanHat);

/// tvSTAR path: z(t) = sum phi_sl(t/T) W^(l) z(t - s) + eps(t), eps ~ N(0, sigma2 I), z(t <= 0) = 0.
PanelSeries simulate_tvstar(const CoefficientFunctions& funcs, const WeightMatrixSet& W, int T, int n,
                            double sigma2, std::uint64_t seed);

/// tvSTARMA path, adding + theta_sl(t/T) W^(l) eps(t - s); eps(t <= 0) = 0.
PanelSeries simulate_tvstarma(const CoefficientFunctions& funcs, const WeightMatrixSet& W, int T, int n,
                              double sigma2, std::uint64_t seed);

struct GneitingCovarianceSpec {
    double sigma2 = 1.0;
    double zeta = 1.0;
    double delta = 0.5;
    double gamma = 0.25;
    double nugget = 0.05;
    int d = 2;

    void validate() const;
    std::string label() const;
};

/// sigma2 / beta(|tau|)^{d/2} * exp(-|h| / (gamma sqrt(beta(|tau|)))) + nugget [h = 0, tau = 0],
/// beta(f) = (f^zeta + 1)^{delta / zeta}.
double gneiting_covariance(double h, double tau, const GneitingCovarianceSpec& spec);

/**
 * Zero-mean Gaussian random field on stations x times 1..T.
 *
 * The nT x nT covariance (index (t-1) n + i) is factorized once; each draw is
 * a triangular product with fresh standard normals. A jitter of 1e-8 sigma2 is
 * added if plain Cholesky fails.
 */
class GrfSampler {
public:
    static constexpr int kMaxCells = 32768;

    GrfSampler(const StationGeometry& geom, int T, const GneitingCovarianceSpec& spec,
               DistanceScale scale = DistanceScale::ArcDegrees);

    PanelSeries draw(std::uint64_t seed) const;
    /// Closed-form covariance matrix the factor was computed from.
    Eigen::MatrixXd covariance() const;
    bool jittered() const { return jittered_; }
    int T() const { return T_; }
    int n() const { return n_; }

private:
    int T_;
    int n_;
    GneitingCovarianceSpec spec_;
    Eigen::MatrixXd distances_;
    Eigen::MatrixXd factor_;  // lower triangle
    std::vector<std::string> ids_;
    bool jittered_ = false;
};

PanelSeries simulate_grf(const StationGeometry& geom, int T, const GneitingCovarianceSpec& spec, std::uint64_t seed,
                         DistanceScale scale = DistanceScale::ArcDegrees);

struct BoundingBox {
    double lat_min = 36.0;
    double lat_max = 49.0;
    double lon_min = -104.0;
    double lon_max = -80.0;
};

/// n uniform locations in `box`, rejecting any draw within 1 m of an accepted one. Ids S01, S02, ...
StationGeometry random_geometry(int n, const BoundingBox& box, std::uint64_t seed);

}  // namespace tvstarma

#pragma once

#include <Eigen/Dense>

#include <memory>
#include <string>
#include <string_view>

namespace tvstarma {

enum class WaveletFamily { MexicanHat };

std::string to_string(WaveletFamily family);
WaveletFamily parse_wavelet_family(std::string_view name);

/// Normalized Mexican hat mother wavelet, (2 / (sqrt(3) pi^{1/4})) (1 - t^2) exp(-t^2 / 2).
double mexican_hat(double t);

double mother_wavelet(WaveletFamily family, double t);

/// Smallest J with 2^J >= sqrt(T).
int default_resolution(int T, int n);

/// (time lag s, spatial lag l) of a coefficient curve.
struct Lag {
    int s = 1;
    int l = 0;

    friend bool operator==(const Lag&, const Lag&) = default;
    friend auto operator<=>(const Lag&, const Lag&) = default;
};

/**
 * Dyadic wavelet dictionary tabulated on the rescaled-time grid u = t/T, t = 1..T.
 *
 * Column 0 is the coarse-level function psi_{-1,0}, taken as the constant 1.
 * Column 2^j + k holds psi_{j,k}(u) = 2^{j/2} psi(2^j u - k) for j = 0..J-1,
 * k = 0..2^j-1, giving 2^J columns in total. Row r - 1 holds u = r/T.
 */
class WaveletDictionary {
public:
    WaveletDictionary(int T, int J, WaveletFamily family);

    int T() const { return T_; }
    int J() const { return J_; }
    WaveletFamily family() const { return family_; }
    int size() const { return static_cast<int>(values_.cols()); }

    /// T x 2^J matrix; row index t - 1 for time t.
    const Eigen::MatrixXd& values() const { return values_; }

    /// Basis evaluations at time t (1-based), length 2^J.
    Eigen::VectorXd row(int t) const { return values_.row(t - 1).transpose(); }

    /// Column position of psi_{j,k}; (j, k) = (-1, 0) is the coarse function.
    static int column_index(int j, int k);

    /// Evaluates basis function (j, k) at an arbitrary rescaled time.
    static double basis_value(WaveletFamily family, int j, int k, double u);

private:
    int T_;
    int J_;
    WaveletFamily family_;
    Eigen::MatrixXd values_;
};

/// Rejects J < 1, T < 2 and 2^J >= T.
WaveletDictionary build_dictionary(int T, int J, WaveletFamily family = WaveletFamily::MexicanHat);

/// Process-wide cache keyed by (T, J, family). Thread-safe.
std::shared_ptr<const WaveletDictionary> shared_dictionary(int T, int J,
                                                           WaveletFamily family = WaveletFamily::MexicanHat);

struct CoefficientCurve {
    Lag lag;
    Eigen::VectorXd values;  // values[t - 1] = curve(t / T)
};

/// values = dict * coeffs.
CoefficientCurve reconstruct_curve(const Eigen::Ref<const Eigen::VectorXd>& coeffs,
                                   const WaveletDictionary& dict, Lag lag);

}  // namespace tvstarma

#include "tvstarma/wavelet.hpp"

#include "tvstarma/error.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>

namespace tvstarma {

std::string to_string(WaveletFamily family) {
    switch (family) {
        case WaveletFamily::MexicanHat:
            return "mexican_hat";
    }
    return "unknown";
}

WaveletFamily parse_wavelet_family(std::string_view name) {
    if (name == "mexican_hat" || name == "MexicanHat") return WaveletFamily::MexicanHat;
    throw ValidationError("unknown wavelet family '" + std::string(name) + "'");
}

double mexican_hat(double t) {
    static const double norm = 2.0 / (std::sqrt(3.0) * std::pow(std::numbers::pi, 0.25));
    const double t2 = t * t;
    return norm * (1.0 - t2) * std::exp(-0.5 * t2);
}

double mother_wavelet(WaveletFamily family, double t) {
    switch (family) {
        case WaveletFamily::MexicanHat:
            return mexican_hat(t);
    }
    return 0.0;
}

int default_resolution(int T, int /*n*/) {
    if (T < 2) throw ValidationError("default_resolution: T must be >= 2");
    // Integer comparison 4^J >= T avoids sqrt rounding at exact powers of two.
    int J = 0;
    long long four_pow = 1;
    while (four_pow < T) {
        four_pow *= 4;
        ++J;
    }
    return std::max(J, 1);
}

int WaveletDictionary::column_index(int j, int k) {
    if (j == -1) return 0;
    return (1 << j) + k;
}

double WaveletDictionary::basis_value(WaveletFamily family, int j, int k, double u) {
    if (j == -1) return 1.0;
    const double scale = std::ldexp(1.0, j);
    return std::sqrt(scale) * mother_wavelet(family, scale * u - k);
}

WaveletDictionary::WaveletDictionary(int T, int J, WaveletFamily family)
    : T_(T), J_(J), family_(family) {
    if (T < 2) throw ValidationError("wavelet dictionary: T must be >= 2");
    if (J < 1) throw ValidationError("wavelet dictionary: J must be >= 1");
    if (J >= 30 || (1LL << J) >= T) {
        throw ValidationError("wavelet dictionary: 2^J = " + std::to_string(1LL << std::min(J, 62)) +
                              " basis functions need more than T = " + std::to_string(T) + " time points");
    }
    const int K = 1 << J;
    values_.resize(T, K);
    for (int r = 1; r <= T; ++r) {
        const double u = static_cast<double>(r) / T;
        values_(r - 1, 0) = basis_value(family, -1, 0, u);
        for (int j = 0; j < J; ++j) {
            for (int k = 0; k < (1 << j); ++k) {
                values_(r - 1, column_index(j, k)) = basis_value(family, j, k, u);
            }
        }
    }
}

WaveletDictionary build_dictionary(int T, int J, WaveletFamily family) {
    return WaveletDictionary(T, J, family);
}

std::shared_ptr<const WaveletDictionary> shared_dictionary(int T, int J, WaveletFamily family) {
    using Key = std::tuple<int, int, WaveletFamily>;
    static std::mutex mutex;
    static std::map<Key, std::shared_ptr<const WaveletDictionary>> cache;

    const Key key{T, J, family};
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    auto dict = std::make_shared<const WaveletDictionary>(T, J, family);
    cache.emplace(key, dict);
    return dict;
}

CoefficientCurve reconstruct_curve(const Eigen::Ref<const Eigen::VectorXd>& coeffs,
                                   const WaveletDictionary& dict, Lag lag) {
    if (coeffs.size() != dict.size()) {
        throw ValidationError("reconstruct_curve: got " + std::to_string(coeffs.size()) +
                              " coefficients for a dictionary of " + std::to_string(dict.size()) + " functions");
    }
    return CoefficientCurve{lag, dict.values() * coeffs};
}

}  // namespace tvstarma

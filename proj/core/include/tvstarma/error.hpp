#pragma once

#include <stdexcept>
#include <string>

namespace tvstarma {

/// Bad input: malformed files, inconsistent shapes, invalid parameters.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The numbers went wrong: rank deficiency, divergence, failed factorization.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace tvstarma

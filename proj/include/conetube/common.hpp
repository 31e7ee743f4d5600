#ifndef CONETUBE_COMMON_HPP
#define CONETUBE_COMMON_HPP

#include <complex>
#include <cmath>
#include <stdexcept>
#include <string>

namespace conetube {

using cplx = std::complex<double>;

inline constexpr double pi = 3.141592653589793238462643383279502884;

/// Thrown when an input (config value, file content, CLI argument) is
/// outside the supported domain. Maps to exit code 2 in the CLI.
struct validation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown when an internal cross-check fails (solvability, Hermiticity,
/// residual bounds). Maps to exit code 4 in the CLI.
struct internal_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline double sq(double x) { return x * x; }

inline bool approx(double a, double b, double tol) {
    return std::abs(a - b) <= tol * (1.0 + std::abs(a) + std::abs(b));
}

} // namespace conetube

#endif

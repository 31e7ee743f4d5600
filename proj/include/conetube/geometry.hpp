#ifndef CONETUBE_GEOMETRY_HPP
#define CONETUBE_GEOMETRY_HPP

#include <Eigen/Dense>

#include "conetube/common.hpp"

namespace conetube {

/// Data of the warped tube metric dr^2 + sinh(r)^2 dtheta^2 + cosh(r)^2 g_S
/// over 0 < r <= a with theta of period alpha = 2*pi/beta. The cross
/// section S (a circle for n = 3, a closed hyperbolic surface for n = 4)
/// enters only through its dimension here; spectral data is handled by the
/// mode layer.
struct Geometry {
    int n = 3;           // ambient dimension, >= 3
    double beta = 1.0;   // cone parameter, alpha = 2*pi/beta
    double a = 0.5;      // tube radius

    double alpha() const { return 2.0 * pi / beta; }

    /// Radial volume weight sinh(r) cosh(r)^(n-2); the L^2 pairing of mode
    /// coefficients is integration against V dr.
    double V(double r) const {
        return std::sinh(r) * std::pow(std::cosh(r), n - 2);
    }

    /// Logarithmic derivative V'/V = coth(r) + (n-2) tanh(r); the first
    /// order coefficient of every radial operator.
    double P(double r) const {
        return 1.0 / std::tanh(r) + (n - 2) * std::tanh(r);
    }
};

inline Geometry metric_data(int n, double beta, double a) {
    if (n < 3) throw validation_error("geometry: dimension must be >= 3");
    if (!(beta > 0.0)) throw validation_error("geometry: beta must be positive");
    if (!(a > 0.0)) throw validation_error("geometry: tube radius must be positive");
    Geometry g;
    g.n = n;
    g.beta = beta;
    g.a = a;
    return g;
}

inline Geometry metric_data_alpha(int n, double alpha, double a) {
    if (!(alpha > 0.0)) throw validation_error("geometry: alpha must be positive");
    return metric_data(n, 2.0 * pi / alpha, a);
}

/// Connection coefficients in the orthonormal frame
///   e_0 = d/dr,  e_1 = (1/sinh r) d/dtheta,  e_k = (1/cosh r) s_k
/// with s_k an orthonormal frame of the cross section (n = 4 uses the
/// half-plane chart g_S = dx^2 + e^{2x} dy^2, s_2 = d/dx, s_3 = e^{-x} d/dy).
/// Returns gamma with nabla_{e_a} e_b = sum_c gamma(c,a,b) e_c. The table is
/// x-independent because the chart frame of the hyperbolic plane has
/// constant structure coefficients.
inline double connection_coefficients(int n, double r, int c, int a, int b) {
    if (n < 3 || n > 4)
        throw validation_error("connection_coefficients: only n = 3 and n = 4 frames are tabulated");
    const double coth = 1.0 / std::tanh(r);
    const double tanh = std::tanh(r);
    if (c == 1 && a == 1 && b == 0) return coth;
    if (c == 0 && a == 1 && b == 1) return -coth;
    if (c >= 2 && a == c && b == 0) return tanh;
    if (c == 0 && a >= 2 && a == b) return -tanh;
    if (n == 4) {
        const double sech = 1.0 / std::cosh(r);
        if (c == 3 && a == 3 && b == 2) return sech;
        if (c == 2 && a == 3 && b == 3) return -sech;
    }
    return 0.0;
}

/// Action of the curvature term on symmetric 2-tensors for the hyperbolic
/// background: Rh = h - (tr h) g, expressed in any orthonormal frame.
inline Eigen::MatrixXcd curvature_action(const Eigen::MatrixXcd& h) {
    if (h.rows() != h.cols())
        throw validation_error("curvature_action: square matrix expected");
    return h - h.trace() * Eigen::MatrixXcd::Identity(h.rows(), h.cols());
}

} // namespace conetube

#endif

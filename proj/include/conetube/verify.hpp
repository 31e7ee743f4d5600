#ifndef CONETUBE_VERIFY_HPP
#define CONETUBE_VERIFY_HPP

#include <array>
#include <functional>
#include <random>

#include "conetube/geometry.hpp"

namespace conetube {

/// Finite-difference chart covering the smooth part of the model tube,
/// away from the cone axis. Axes: r (non-periodic), theta (period 2*pi/beta),
/// then z (period ell) for n=3 or the chart box x, y (non-periodic) of the
/// hyperbolic cross-section plane for n=4.
struct ChartGrid {
    int n = 3;
    double beta = 1.0;
    double ell = 2.0 * pi;       // n=3 cross-section circle length
    double r0 = 0.1, r1 = 0.45;
    double x0 = -0.5, x1 = 0.5;  // n=4 chart box
    double y0 = -0.5, y1 = 0.5;
    std::array<int, 4> dims{1, 1, 1, 1};
    std::array<double, 4> h{0, 0, 0, 0};

    int naxes() const { return n == 3 ? 3 : 4; }
    bool periodic(int axis) const { return axis == 1 || (n == 3 && axis == 2); }
    double alpha() const { return 2.0 * pi / beta; }
    size_t npts() const {
        size_t p = 1;
        for (int a = 0; a < naxes(); ++a) p *= static_cast<size_t>(dims[static_cast<size_t>(a)]);
        return p;
    }
    double origin(int axis) const {
        switch (axis) {
            case 0: return r0;
            case 1: return 0.0;
            case 2: return n == 3 ? 0.0 : x0;
            default: return y0;
        }
    }
    double coord(int axis, int i) const {
        return origin(axis) + h[static_cast<size_t>(axis)] * i;
    }
};

inline ChartGrid chart_grid_3(double beta, double ell, double r0, double r1, int Nr, int Nt,
                              int Nz) {
    if (!(beta > 0.0) || !(ell > 0.0)) throw validation_error("chart: bad beta or ell");
    if (!(r0 >= 0.05) || !(r1 > r0))
        throw validation_error("chart: radial window must sit in [0.05, a] away from the axis");
    if (Nr < 5 || Nt < 4 || Nz < 4) throw validation_error("chart: grid too small");
    ChartGrid g;
    g.n = 3;
    g.beta = beta;
    g.ell = ell;
    g.r0 = r0;
    g.r1 = r1;
    g.dims = {Nr, Nt, Nz, 1};
    g.h = {(r1 - r0) / (Nr - 1), g.alpha() / Nt, ell / Nz, 0.0};
    return g;
}

inline ChartGrid chart_grid_4(double beta, double r0, double r1, double halfbox, int Nr,
                              int Nt, int Nx, int Ny) {
    if (!(beta > 0.0)) throw validation_error("chart: bad beta");
    if (!(r0 >= 0.05) || !(r1 > r0))
        throw validation_error("chart: radial window must sit in [0.05, a] away from the axis");
    if (!(halfbox > 0.0)) throw validation_error("chart: bad cross-section box");
    if (Nr < 5 || Nt < 4 || Nx < 5 || Ny < 5) throw validation_error("chart: grid too small");
    ChartGrid g;
    g.n = 4;
    g.beta = beta;
    g.r0 = r0;
    g.r1 = r1;
    g.x0 = -halfbox;
    g.x1 = halfbox;
    g.y0 = -halfbox;
    g.y1 = halfbox;
    g.dims = {Nr, Nt, Nx, Ny};
    g.h = {(r1 - r0) / (Nr - 1), g.alpha() / Nt, 2.0 * halfbox / (Nx - 1),
           2.0 * halfbox / (Ny - 1)};
    return g;
}

/// Frame-component tensor field sampled on a chart grid. `margin` counts how
/// many cells at each non-periodic boundary hold unusable values; every
/// derivative application widens it by one.
template <class T>
struct GridField {
    ChartGrid grid;
    int rank = 0;
    int margin = 0;
    std::vector<T> data;

    int ncomp() const {
        int c = 1;
        for (int q = 0; q < rank; ++q) c *= grid.n;
        return c;
    }
    T& at(size_t pt, int comp) { return data[pt * static_cast<size_t>(ncomp()) + comp]; }
    const T& at(size_t pt, int comp) const {
        return data[pt * static_cast<size_t>(ncomp()) + comp];
    }
};

namespace detail_fd {

inline void unflatten(const ChartGrid& g, size_t pt, int idx[4]) {
    for (int a = g.naxes() - 1; a >= 0; --a) {
        int N = g.dims[static_cast<size_t>(a)];
        idx[a] = static_cast<int>(pt % static_cast<size_t>(N));
        pt /= static_cast<size_t>(N);
    }
    for (int a = g.naxes(); a < 4; ++a) idx[a] = 0;
}

inline size_t flatten(const ChartGrid& g, const int idx[4]) {
    size_t pt = 0;
    for (int a = 0; a < g.naxes(); ++a)
        pt = pt * static_cast<size_t>(g.dims[static_cast<size_t>(a)]) +
             static_cast<size_t>(idx[a]);
    return pt;
}

inline size_t shifted(const ChartGrid& g, const int idx[4], int axis, int step) {
    int nb[4] = {idx[0], idx[1], idx[2], idx[3]};
    int N = g.dims[static_cast<size_t>(axis)];
    nb[axis] = ((idx[axis] + step) % N + N) % N;  // wrap; margins police the edges
    return flatten(g, nb);
}

/// Reciprocal frame scale along an axis: e_axis = (1/scale) d/dcoord.
inline double axis_scale(const ChartGrid& g, int axis, const int idx[4]) {
    double r = g.coord(0, idx[0]);
    switch (axis) {
        case 0: return 1.0;
        case 1: return std::sinh(r);
        case 2: return std::cosh(r);
        default: return std::exp(g.coord(2, idx[2])) * std::cosh(r);
    }
}

inline int comp_index(int n, const int* I, int rank) {
    int c = 0;
    for (int s = 0; s < rank; ++s) c = c * n + I[s];
    return c;
}

inline void comp_unpack(int n, int comp, int* I, int rank) {
    for (int s = rank - 1; s >= 0; --s) {
        I[s] = comp % n;
        comp /= n;
    }
}

} // namespace detail_fd

template <class T, class F>
GridField<T> make_field(const ChartGrid& g, int rank, F&& eval) {
    GridField<T> out;
    out.grid = g;
    out.rank = rank;
    out.margin = 0;
    out.data.resize(g.npts() * static_cast<size_t>(out.ncomp()));
    int idx[4], I[4] = {0, 0, 0, 0};
    double x[4] = {0, 0, 0, 0};
    for (size_t pt = 0; pt < g.npts(); ++pt) {
        detail_fd::unflatten(g, pt, idx);
        for (int a = 0; a < g.naxes(); ++a) x[a] = g.coord(a, idx[a]);
        for (int c = 0; c < out.ncomp(); ++c) {
            detail_fd::comp_unpack(g.n, c, I, rank);
            out.at(pt, c) = eval(x, I);
        }
    }
    return out;
}

template <class T>
GridField<T> field_lin(T a, const GridField<T>& F, T b, const GridField<T>& G) {
    if (F.rank != G.rank || F.grid.npts() != G.grid.npts())
        throw validation_error("field combination needs matching shapes");
    GridField<T> out = F;
    out.margin = std::max(F.margin, G.margin);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = a * F.data[i] + b * G.data[i];
    return out;
}

template <class T>
GridField<T> field_scale(T a, const GridField<T>& F) {
    GridField<T> out = F;
    for (auto& v : out.data) v *= a;
    return out;
}

/// Covariant derivative, new first slot: out_(a, I) = (nabla_{e_a} F)_I.
template <class T>
GridField<T> op_nabla(const GridField<T>& F) {
    const ChartGrid& g = F.grid;
    GridField<T> out;
    out.grid = g;
    out.rank = F.rank + 1;
    out.margin = F.margin + 1;
    out.data.assign(g.npts() * static_cast<size_t>(out.ncomp()), T(0));

    int idx[4], I[4] = {0, 0, 0, 0}, J[4];
    for (size_t pt = 0; pt < g.npts(); ++pt) {
        detail_fd::unflatten(g, pt, idx);
        double r = g.coord(0, idx[0]);
        for (int c = 0; c < F.ncomp(); ++c) {
            detail_fd::comp_unpack(g.n, c, I, F.rank);
            for (int a = 0; a < g.n; ++a) {
                double sc = detail_fd::axis_scale(g, a, idx);
                T der = (F.at(detail_fd::shifted(g, idx, a, +1), c) -
                         F.at(detail_fd::shifted(g, idx, a, -1), c)) /
                        (2.0 * g.h[static_cast<size_t>(a)] * sc);
                for (int s = 0; s < F.rank; ++s) {
                    for (int cc = 0; cc < g.n; ++cc) {
                        double gam = connection_coefficients(g.n, r, cc, a, I[s]);
                        if (gam == 0.0) continue;
                        for (int t = 0; t < F.rank; ++t) J[t] = I[t];
                        J[s] = cc;
                        der -= gam * F.at(pt, detail_fd::comp_index(g.n, J, F.rank));
                    }
                }
                int oc = a;
                for (int s = 0; s < F.rank; ++s) oc = oc * g.n + I[s];
                out.at(pt, oc) = der;
            }
        }
    }
    return out;
}

/// Adjoint of nabla: contracts the derivative slot against the first tensor
/// slot, out_I = -sum_a (nabla_{e_a} S)_(a, I). The needed derivative values
/// are formed on the fly, so nothing above the rank of S is materialized.
template <class T>
GridField<T> op_nabla_star(const GridField<T>& S) {
    if (S.rank < 1) throw validation_error("nabla_star needs at least one slot");
    const ChartGrid& g = S.grid;
    GridField<T> out;
    out.grid = g;
    out.rank = S.rank - 1;
    out.margin = S.margin + 1;
    out.data.assign(g.npts() * static_cast<size_t>(out.ncomp()), T(0));

    const int qr = out.rank;
    int idx[4], I[4] = {0, 0, 0, 0}, AI[4], J[4];
    for (size_t pt = 0; pt < g.npts(); ++pt) {
        detail_fd::unflatten(g, pt, idx);
        double r = g.coord(0, idx[0]);
        for (int c = 0; c < out.ncomp(); ++c) {
            detail_fd::comp_unpack(g.n, c, I, qr);
            T acc(0);
            for (int a = 0; a < g.n; ++a) {
                AI[0] = a;
                for (int s = 0; s < qr; ++s) AI[s + 1] = I[s];
                int cai = detail_fd::comp_index(g.n, AI, qr + 1);
                double sc = detail_fd::axis_scale(g, a, idx);
                T term = (S.at(detail_fd::shifted(g, idx, a, +1), cai) -
                          S.at(detail_fd::shifted(g, idx, a, -1), cai)) /
                         (2.0 * g.h[static_cast<size_t>(a)] * sc);
                for (int cc = 0; cc < g.n; ++cc) {
                    double gam = connection_coefficients(g.n, r, cc, a, a);
                    if (gam != 0.0) {
                        for (int t = 1; t <= qr; ++t) J[t] = AI[t];
                        J[0] = cc;
                        term -= gam * S.at(pt, detail_fd::comp_index(g.n, J, qr + 1));
                    }
                }
                for (int s = 0; s < qr; ++s) {
                    for (int cc = 0; cc < g.n; ++cc) {
                        double gam = connection_coefficients(g.n, r, cc, a, I[s]);
                        if (gam == 0.0) continue;
                        for (int t = 0; t <= qr; ++t) J[t] = AI[t];
                        J[s + 1] = cc;
                        term -= gam * S.at(pt, detail_fd::comp_index(g.n, J, qr + 1));
                    }
                }
                acc += term;
            }
            out.at(pt, c) = -acc;
        }
    }
    return out;
}

template <class T>
GridField<T> op_rough(const GridField<T>& F) {
    return op_nabla_star(op_nabla(F));
}

template <class T>
GridField<T> op_rough_shifted(const GridField<T>& F) {
    return field_lin(T(1), op_rough(F), T(F.grid.n - 1), F);
}

/// Exterior derivative of functions, 1-forms and 2-forms.
template <class T>
GridField<T> op_d(const GridField<T>& F) {
    auto grad = op_nabla(F);
    if (F.rank == 0) return grad;
    const int n = F.grid.n;
    if (F.rank == 1) {
        GridField<T> out = grad;
        for (size_t pt = 0; pt < F.grid.npts(); ++pt)
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b)
                    out.at(pt, a * n + b) = grad.at(pt, a * n + b) - grad.at(pt, b * n + a);
        return out;
    }
    if (F.rank != 2) throw validation_error("d implemented for ranks 0..2");
    GridField<T> out = grad;
    for (size_t pt = 0; pt < F.grid.npts(); ++pt)
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                for (int c = 0; c < n; ++c)
                    out.at(pt, (a * n + b) * n + c) = grad.at(pt, (a * n + b) * n + c) +
                                                      grad.at(pt, (b * n + c) * n + a) +
                                                      grad.at(pt, (c * n + a) * n + b);
    return out;
}

/// Codifferential on forms; coincides with the contraction adjoint.
template <class T>
GridField<T> op_delta(const GridField<T>& F) {
    return op_nabla_star(F);
}

template <class T>
GridField<T> op_delta_star(const GridField<T>& alpha) {
    if (alpha.rank != 1) throw validation_error("delta_star acts on 1-forms");
    auto grad = op_nabla(alpha);
    const int n = alpha.grid.n;
    GridField<T> out = grad;
    for (size_t pt = 0; pt < alpha.grid.npts(); ++pt)
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                out.at(pt, a * n + b) =
                    0.5 * (grad.at(pt, a * n + b) + grad.at(pt, b * n + a));
    return out;
}

template <class T>
GridField<T> op_trace(const GridField<T>& h) {
    if (h.rank != 2) throw validation_error("trace acts on 2-tensors");
    const int n = h.grid.n;
    GridField<T> out;
    out.grid = h.grid;
    out.rank = 0;
    out.margin = h.margin;
    out.data.assign(h.grid.npts(), T(0));
    for (size_t pt = 0; pt < h.grid.npts(); ++pt) {
        T t(0);
        for (int a = 0; a < n; ++a) t += h.at(pt, a * n + a);
        out.data[pt] = t;
    }
    return out;
}

/// Curvature action on 2-tensors over the hyperbolic background:
/// (Rh)_{ab} = h_{ab} - (tr h) delta_{ab}.
template <class T>
GridField<T> op_curvature(const GridField<T>& h) {
    if (h.rank != 2) throw validation_error("curvature action needs a 2-tensor");
    const int n = h.grid.n;
    GridField<T> out = h;
    for (size_t pt = 0; pt < h.grid.npts(); ++pt) {
        T t(0);
        for (int a = 0; a < n; ++a) t += h.at(pt, a * n + a);
        for (int a = 0; a < n; ++a) out.at(pt, a * n + a) -= t;
    }
    return out;
}

/// Covariant exterior derivative of a T*M-valued 1-form (symmetric or not):
/// sigma_(a,b,c) = (nabla_a h)_{bc} - (nabla_b h)_{ac}.
template <class T>
GridField<T> op_d_nabla(const GridField<T>& h) {
    if (h.rank != 2) throw validation_error("d_nabla acts on 2-tensors");
    auto grad = op_nabla(h);
    const int n = h.grid.n;
    GridField<T> out = grad;
    for (size_t pt = 0; pt < h.grid.npts(); ++pt)
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                for (int c = 0; c < n; ++c)
                    out.at(pt, (a * n + b) * n + c) = grad.at(pt, (a * n + b) * n + c) -
                                                      grad.at(pt, (b * n + a) * n + c);
    return out;
}

template <class T>
GridField<T> op_delta_nabla(const GridField<T>& sigma) {
    return op_nabla_star(sigma);
}

template <class T>
GridField<T> op_laplace(const GridField<T>& F) {
    if (F.rank == 0) return op_delta(op_d(F));
    return field_lin(T(1), op_delta(op_d(F)), T(1), op_d(op_delta(F)));
}

template <class T>
GridField<T> op_bianchi(const GridField<T>& h) {
    return field_lin(T(1), op_delta(h), T(0.5), op_d(op_trace(h)));
}

/// Linearized Einstein operator in the ric(g) + (n-1) g = 0 normalization:
/// E'(h) = rough(h) - 2 Rh - delta_star(2 delta h + d tr h).
template <class T>
GridField<T> op_lin_einstein(const GridField<T>& h) {
    auto gauge = field_lin(T(2), op_delta(h), T(1), op_d(op_trace(h)));
    return field_lin(T(1), field_lin(T(1), op_rough(h), T(-2), op_curvature(h)), T(-1),
                     op_delta_star(gauge));
}

// --- measurement over the valid core -------------------------------------

namespace detail_fd {

inline bool in_core(const ChartGrid& g, const int idx[4], int margin,
                    const std::array<double, 4>& skip_phys) {
    for (int a = 0; a < g.naxes(); ++a) {
        if (g.periodic(a)) continue;
        int N = g.dims[static_cast<size_t>(a)];
        if (idx[a] < margin || idx[a] > N - 1 - margin) return false;
        double c = g.coord(a, idx[a]);
        double lo = g.origin(a), hi = g.coord(a, N - 1);
        double s = skip_phys[static_cast<size_t>(a)];
        if (c < lo + s || c > hi - s) return false;
    }
    return true;
}

inline bool in_core(const ChartGrid& g, const int idx[4], int margin, double skip_phys) {
    return in_core(g, idx, margin,
                   std::array<double, 4>{skip_phys, skip_phys, skip_phys, skip_phys});
}

inline double cell_weight(const ChartGrid& g, const int idx[4]) {
    double r = g.coord(0, idx[0]);
    double w = std::sinh(r) * std::pow(std::cosh(r), g.n - 2);
    if (g.n == 4) w *= std::exp(g.coord(2, idx[2]));
    for (int a = 0; a < g.naxes(); ++a) w *= g.h[static_cast<size_t>(a)];
    return w;
}

} // namespace detail_fd

template <class T>
double core_max(const GridField<T>& F, const std::array<double, 4>& skip_phys) {
    int idx[4];
    double m = 0.0;
    for (size_t pt = 0; pt < F.grid.npts(); ++pt) {
        detail_fd::unflatten(F.grid, pt, idx);
        if (!detail_fd::in_core(F.grid, idx, F.margin, skip_phys)) continue;
        for (int c = 0; c < F.ncomp(); ++c) m = std::max(m, std::abs(F.at(pt, c)));
    }
    return m;
}

template <class T>
double core_max(const GridField<T>& F, double skip_phys = 0.0) {
    return core_max(F, std::array<double, 4>{skip_phys, skip_phys, skip_phys, skip_phys});
}

/// Weighted L2 norm over the valid core, optionally shrunk by per-axis
/// physical skips so that measurements on nested grids integrate the same
/// window.
template <class T>
double core_norm(const GridField<T>& F, const std::array<double, 4>& skip_phys = {0, 0, 0,
                                                                                  0}) {
    int idx[4];
    double acc = 0.0;
    for (size_t pt = 0; pt < F.grid.npts(); ++pt) {
        detail_fd::unflatten(F.grid, pt, idx);
        if (!detail_fd::in_core(F.grid, idx, F.margin, skip_phys)) continue;
        double w = detail_fd::cell_weight(F.grid, idx);
        for (int c = 0; c < F.ncomp(); ++c) {
            double m = std::abs(F.at(pt, c));
            acc += w * m * m;
        }
    }
    return std::sqrt(acc);
}

template <class T>
T field_inner(const GridField<T>& F, const GridField<T>& G) {
    if (F.rank != G.rank) throw validation_error("inner product needs equal ranks");
    int idx[4];
    int margin = std::max(F.margin, G.margin);
    T acc(0);
    for (size_t pt = 0; pt < F.grid.npts(); ++pt) {
        detail_fd::unflatten(F.grid, pt, idx);
        if (!detail_fd::in_core(F.grid, idx, margin, 0.0)) continue;
        double w = detail_fd::cell_weight(F.grid, idx);
        T s(0);
        for (int c = 0; c < F.ncomp(); ++c) {
            if constexpr (std::is_same_v<T, cplx>)
                s += std::conj(F.at(pt, c)) * G.at(pt, c);
            else
                s += F.at(pt, c) * G.at(pt, c);
        }
        acc += w * s;
    }
    return acc;
}

template <class T>
double field_norm(const GridField<T>& F) {
    return std::sqrt(std::abs(field_inner(F, F)));
}

// --- seeded smooth samples ------------------------------------------------

class SampleRng {
public:
    explicit SampleRng(std::uint64_t seed) : eng_(seed) {}
    double uni() {  // uniform in [-1, 1), bit-stable across platforms
        return 2.0 * ((eng_() >> 11) * 0x1.0p-53) - 1.0;
    }
    int pick(int lo, int hi) {  // inclusive
        return lo + static_cast<int>((eng_() >> 33) % static_cast<std::uint64_t>(hi - lo + 1));
    }

private:
    std::mt19937_64 eng_;
};

using ScalarFn = std::function<double(const double*)>;

/// Compactly supported radial window, flat in the middle of [r0, r1].
inline double bump01(double t) {
    if (t <= 0.0 || t >= 1.0) return 0.0;
    double u = 4.0 * t * (1.0 - t);
    return std::exp(1.0 - 1.0 / u);
}

/// Trigonometric sample, periodic where the chart is. With `windowed` the
/// value is cut off by radial (and box, for n=4) bumps so that it is
/// compactly supported inside the chart; pointwise checks skip the window
/// since the validity margins already exclude the wrapped boundary cells.
inline ScalarFn sample_scalar(const ChartGrid& g, SampleRng& rng, bool windowed) {
    struct Term {
        double c, kt, pt, kr, kz, pz, ax, ay;
    };
    std::vector<Term> terms;
    for (int j = 0; j < 3; ++j) {
        Term t;
        t.c = rng.uni();
        t.kt = rng.pick(0, 1) * g.beta;  // theta harmonics of period alpha
        t.pt = pi * rng.uni();
        t.kr = 2.0 * rng.uni();
        t.kz = g.n == 3 ? rng.pick(0, 1) * 2.0 * pi / g.ell : 0.0;
        t.pz = pi * rng.uni();
        t.ax = 1.5 * rng.uni();
        t.ay = 1.5 * rng.uni();
        terms.push_back(t);
    }
    double r0 = g.r0, r1 = g.r1;
    double x0 = g.x0, x1 = g.x1, y0 = g.y0, y1 = g.y1;
    int n = g.n;
    return [=](const double* x) {
        double v = 0.0;
        for (const auto& t : terms) {
            double f = t.c * std::cos(t.kt * x[1] + t.pt) * std::cos(t.kr * x[0]);
            if (n == 3)
                f *= std::cos(t.kz * x[2] + t.pz);
            else
                f *= std::cos(t.ax * x[2] + t.ay * x[3] + t.pz);
            v += f;
        }
        if (!windowed) return v;
        double w = bump01((x[0] - r0) / (r1 - r0));
        if (n == 4)
            w *= bump01((x[2] - x0) / (x1 - x0)) * bump01((x[3] - y0) / (y1 - y0));
        return v * w;
    };
}

enum class SampleKind { one_form, two_form, sym2 };

inline GridField<double> sample_field(const ChartGrid& g, SampleKind kind,
                                      std::uint64_t seed, bool windowed = true) {
    SampleRng rng(seed);
    const int n = g.n;
    int rank = kind == SampleKind::one_form ? 1 : 2;
    std::vector<ScalarFn> raw;
    for (int c = 0; c < (rank == 1 ? n : n * n); ++c)
        raw.push_back(sample_scalar(g, rng, windowed));
    return make_field<double>(g, rank, [&](const double* x, const int* I) {
        if (kind == SampleKind::one_form) return raw[static_cast<size_t>(I[0])](x);
        int ab = I[0] * n + I[1], ba = I[1] * n + I[0];
        double u = raw[static_cast<size_t>(ab)](x), v = raw[static_cast<size_t>(ba)](x);
        return kind == SampleKind::sym2 ? 0.5 * (u + v) : 0.5 * (u - v);
    });
}

// --- identity suite ---------------------------------------------------------

struct IdentityResult {
    double residual = 0.0;  // weighted L2 norm of the defect over the window
    double scale = 0.0;     // same norm of the dominant constituent
    double relative = 0.0;
    bool exact_null = false;  // defect at rounding level: the discrete
                              // operators satisfy the identity algebraically
};

inline const std::vector<std::string>& identity_names() {
    static const std::vector<std::string> names{"W1",           "W2",  "WS",
                                                "BIANCHI_NORM", "EPRIME_TRIVIAL",
                                                "TRACE_ID"};
    return names;
}

/// Evaluates one curvature identity on a seeded random sample and returns the
/// finite-difference defect, which must shrink at second order in h.
inline IdentityResult identity_residual(const std::string& name, const ChartGrid& g,
                                        std::uint64_t seed,
                                        const std::array<double, 4>& skip_phys = {0, 0, 0,
                                                                                  0}) {
    using D = double;
    const double nn = g.n;
    GridField<D> R, S;
    if (name == "W1") {
        auto a = sample_field(g, SampleKind::one_form, seed, false);
        S = op_rough(a);
        R = field_lin(1.0, op_laplace(a),
                      -1.0, field_lin(1.0, S, -(nn - 1.0), a));
    } else if (name == "W2") {
        auto w = sample_field(g, SampleKind::two_form, seed, false);
        S = op_rough(w);
        R = field_lin(1.0, S,
                      -1.0, field_lin(1.0, op_laplace(w), 2.0 * (nn - 2.0), w));
    } else if (name == "WS") {
        auto h = sample_field(g, SampleKind::sym2, seed, false);
        S = op_rough(h);
        auto hodge = field_lin(1.0, op_delta_nabla(op_d_nabla(h)), 1.0,
                               op_nabla(op_nabla_star(h)));
        auto zero_order = field_lin(nn - 1.0, h, 1.0, op_curvature(h));
        R = field_lin(1.0, S, -1.0, field_lin(1.0, hodge, 1.0, zero_order));
    } else if (name == "BIANCHI_NORM") {
        auto a = sample_field(g, SampleKind::one_form, seed, false);
        S = op_rough(a);
        R = field_lin(2.0, op_bianchi(op_delta_star(a)), -1.0,
                      field_lin(1.0, S, nn - 1.0, a));
    } else if (name == "EPRIME_TRIVIAL") {
        auto a = sample_field(g, SampleKind::one_form, seed, false);
        auto lie = field_scale(2.0, op_delta_star(a));
        S = op_rough(lie);
        R = op_lin_einstein(lie);
    } else if (name == "TRACE_ID") {
        auto h = sample_field(g, SampleKind::sym2, seed, false);
        auto lhs = op_trace(field_lin(1.0, op_rough(h), -2.0, op_curvature(h)));
        auto tr = op_trace(h);
        S = lhs;
        R = field_lin(1.0, lhs, -1.0,
                      field_lin(1.0, op_laplace(tr), 2.0 * (nn - 1.0), tr));
    } else {
        throw validation_error("unknown identity: " + name);
    }
    IdentityResult res;
    res.residual = core_norm(R, skip_phys);
    res.scale = std::max(core_norm(S, skip_phys), 1e-30);
    res.relative = res.residual / res.scale;
    res.exact_null = res.relative < 1e-10;
    return res;
}

/// Convergence measurement of an identity defect between two grids covering
/// the same physical window. A pair of rounding-level defects marks the
/// identity as algebraically satisfied; the fitted order is noise then.
struct OrderMeasurement {
    IdentityResult coarse, fine;
    double order = 0.0;
    bool exact_null = false;
    bool ok(double lo, double hi) const { return exact_null || (order > lo && order < hi); }
};

inline OrderMeasurement identity_convergence(const std::string& name, const ChartGrid& coarse,
                                             const ChartGrid& fine, std::uint64_t seed) {
    std::array<double, 4> skip{0, 0, 0, 0};
    for (int a = 0; a < coarse.naxes(); ++a)
        if (!coarse.periodic(a))
            skip[static_cast<size_t>(a)] =
                3.5 * std::max(coarse.h[static_cast<size_t>(a)],
                               fine.h[static_cast<size_t>(a)]);
    // The skips trim both ends of every non-periodic axis; if they meet in
    // the middle no point is measured and the defect would read as zero.
    for (int a = 0; a < coarse.naxes(); ++a) {
        if (coarse.periodic(a)) continue;
        double lo = coarse.origin(a);
        double hi = coarse.coord(a, coarse.dims[static_cast<size_t>(a)] - 1);
        if (!(hi - lo > 2.0 * skip[static_cast<size_t>(a)]))
            throw validation_error("chart: grid too coarse for the measurement window");
    }
    OrderMeasurement m;
    m.coarse = identity_residual(name, coarse, seed, skip);
    m.fine = identity_residual(name, fine, seed, skip);
    m.order = std::log(m.coarse.relative / m.fine.relative) /
              std::log(coarse.h[0] / fine.h[0]);
    m.exact_null = m.coarse.exact_null && m.fine.exact_null;
    return m;
}

/// ||w|| <= ||nabla w|| / sqrt(2(n-2)) for compactly supported 2-forms; the
/// constant comes from the curvature term of the 2-form Weitzenboeck formula.
struct PoincareCheck {
    double lhs = 0.0;  // ||w||
    double rhs = 0.0;  // c ||nabla w||
    bool holds = false;
};

inline PoincareCheck poincare_2form_check(const ChartGrid& g, std::uint64_t seed) {
    auto w = sample_field(g, SampleKind::two_form, seed);
    auto grad = op_nabla(w);
    PoincareCheck out;
    out.lhs = field_norm(w);
    out.rhs = field_norm(grad) / std::sqrt(2.0 * (g.n - 2.0));
    out.holds = out.lhs <= out.rhs * (1.0 + 1e-2);
    return out;
}

/// Relative defect of <nabla u, v> = <u, nabla* v> on compact samples.
inline double adjointness_gap(const ChartGrid& g, std::uint64_t seed) {
    auto u = sample_field(g, SampleKind::one_form, seed);
    auto v = sample_field(g, SampleKind::sym2, seed + 101);
    auto lhs = field_inner(op_nabla(u), v);
    auto rhs = field_inner(u, op_nabla_star(v));
    double scale = field_norm(op_nabla(u)) * field_norm(v) + 1e-30;
    return std::abs(lhs - rhs) / scale;
}

} // namespace conetube

#endif

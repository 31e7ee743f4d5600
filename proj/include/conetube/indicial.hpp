#ifndef CONETUBE_INDICIAL_HPP
#define CONETUBE_INDICIAL_HPP

#include <optional>
#include <vector>

#include "conetube/modes.hpp"

namespace conetube {

/// Eigenstructure of the constant matrix C = lim r^2 Q(r). The rotation
/// coupling makes (1, -i, 0) and (1, i, 0) eigenvectors with eigenvalues
/// (p beta + 1)^2 and (p beta - 1)^2; the third direction carries
/// (p beta)^2. All of it is closed form, no numerics involved.
struct IndicialEigen {
    std::vector<double> values;
    std::vector<Eigen::VectorXcd> vectors;  // orthonormal
};

inline IndicialEigen indicial_eigenstructure(const RadialOperator& op) {
    const double pb = op.pbeta();
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    IndicialEigen e;
    switch (op.block().kind) {
        case BlockKind::coupled3: {
            Eigen::VectorXcd plus(3), minus(3), third(3);
            plus << 1.0, cplx(0, -1), 0.0;
            minus << 1.0, cplx(0, 1), 0.0;
            third << 0.0, 0.0, 1.0;
            e.values = {sq(pb + 1), sq(pb - 1), sq(pb)};
            e.vectors = {plus * inv_sqrt2, minus * inv_sqrt2, third};
            break;
        }
        case BlockKind::coupled2: {
            Eigen::VectorXcd plus(2), minus(2);
            plus << 1.0, cplx(0, -1);
            minus << 1.0, cplx(0, 1);
            e.values = {sq(pb + 1), sq(pb - 1)};
            e.vectors = {plus * inv_sqrt2, minus * inv_sqrt2};
            break;
        }
        case BlockKind::scalar: {
            Eigen::VectorXcd one(1);
            one << 1.0;
            e.values = {sq(pb)};
            e.vectors = {one};
            break;
        }
    }
    return e;
}

/// C = lim_{r->0} r^2 Q(r); the spectral shift (n-1) does not survive the
/// limit, so both operator forms share their indicial data.
inline Eigen::MatrixXcd indicial_constant(const RadialOperator& op) {
    const int m = op.m();
    Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(m, m);
    const auto e = indicial_eigenstructure(op);
    for (size_t i = 0; i < e.values.size(); ++i)
        C += e.values[i] * e.vectors[i] * e.vectors[i].adjoint();
    return C;
}

/// M(k) = -k^2 I + C; r^k v solves the frozen-coefficient equation iff
/// M(k) v = 0.
inline Eigen::MatrixXcd indicial_matrix(const RadialOperator& op, double k) {
    const int m = op.m();
    return indicial_constant(op) - sq(k) * Eigen::MatrixXcd::Identity(m, m);
}

struct IndicialRoot {
    double k = 0.0;
    int multiplicity = 1;
    bool log_required = false;
    std::vector<Eigen::VectorXcd> vectors;  // kernel basis of M(k), display scale
};

/// All indicial roots, descending. Vectors use the display convention
/// (1, -i, 0) / (1, i, 0) / (0, 0, 1). A root needs a logarithm at the
/// leading level exactly when its kernel is smaller than its multiplicity,
/// which happens for the double root k = 0 (p beta in {-1, 0, 1} for the
/// coupled blocks, p' = 0 for the scalar one).
inline std::vector<IndicialRoot> indicial_roots(const RadialOperator& op) {
    const auto e = indicial_eigenstructure(op);
    const double tol = 1e-12;

    std::vector<IndicialRoot> roots;
    auto find_root = [&](double k) -> IndicialRoot* {
        for (auto& r : roots)
            if (std::abs(r.k - k) <= tol * (1.0 + std::abs(k))) return &r;
        return nullptr;
    };

    for (size_t i = 0; i < e.values.size(); ++i) {
        double kabs = std::sqrt(e.values[i]);
        for (double k : {kabs, -kabs}) {
            IndicialRoot* root = find_root(k);
            if (!root) {
                roots.push_back({k, 0, false, {}});
                root = &roots.back();
            }
            root->multiplicity += 1;
            bool have = false;
            for (const auto& v : root->vectors)
                if ((v.normalized() - e.vectors[i]).norm() < 1e-9 ||
                    (v.normalized() + e.vectors[i]).norm() < 1e-9)
                    have = true;
            if (!have) {
                // Display scale: largest entry has magnitude one, so the
                // coupled vectors read (1, -i, 0) / (1, i, 0) literally.
                Eigen::VectorXcd display = e.vectors[i];
                display /= display.lpNorm<Eigen::Infinity>();
                root->vectors.push_back(display);
            }
        }
    }

    int mult_sum = 0;
    const Eigen::MatrixXcd C = indicial_constant(op);
    for (auto& r : roots) {
        r.log_required = static_cast<int>(r.vectors.size()) < r.multiplicity;
        mult_sum += r.multiplicity;
        Eigen::MatrixXcd M = indicial_matrix(op, r.k);
        for (const auto& v : r.vectors)
            if ((M * v).norm() > tol * (1.0 + C.norm()) * v.norm())
                throw internal_error("indicial root fails to annihilate its vector");
        double det_scale = 1.0;
        for (double c : e.values) det_scale *= std::max(1.0, std::abs(c - sq(r.k)));
        if (std::abs(M.determinant()) > 1e-10 * det_scale)
            throw internal_error("indicial determinant does not vanish at a root");
    }
    if (mult_sum != 2 * op.m())
        throw internal_error("indicial multiplicities do not sum to twice the block size");

    std::sort(roots.begin(), roots.end(),
              [](const IndicialRoot& a, const IndicialRoot& b) { return a.k > b.k; });
    return roots;
}

} // namespace conetube

#endif

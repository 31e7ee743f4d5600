#ifndef CONETUBE_FROBENIUS_HPP
#define CONETUBE_FROBENIUS_HPP

#include "conetube/indicial.hpp"

namespace conetube {

/// One generalized power-series solution
///     u(r) = r^k [ S(r) + ln(r) T(r) ],
/// with S, T polynomial in r up to order N. T is zero unless the branch
/// needed a logarithm, either because the double root at k = 0 lacks a
/// second power solution or because the recurrence hit an unsolvable
/// resonance at a root k + m.
struct FrobeniusBranch {
    double k = 0.0;
    int log_degree = 0;
    int N = 0;
    bool from_deficiency = false;  // second solution attached to a double root
    Eigen::VectorXcd leading;      // leading vector of the top log level
    // coeffs[d][m]: coefficient vector of r^(k+m) ln(r)^d, d <= log_degree
    std::vector<std::vector<Eigen::VectorXcd>> coeffs;
};

struct BranchPointValue {
    Eigen::VectorXcd u, du, ddu;
    bool outside_validity = false;
};

/// Largest coefficient magnitude across all orders and log levels; the
/// natural scale for zero tests on a branch.
inline double branch_scale(const FrobeniusBranch& b) {
    double s = 0.0;
    for (const auto& level : b.coeffs)
        for (const auto& v : level) s = std::max(s, v.lpNorm<Eigen::Infinity>());
    return s;
}

/// u, u', u'' at radius r. The series validity radius is 0.5; evaluations
/// beyond it are flagged, not refused.
inline BranchPointValue evaluate_branch(const FrobeniusBranch& b, double r) {
    if (!(r > 0.0)) throw validation_error("evaluate_branch: r must be positive");
    const int m = static_cast<int>(b.coeffs[0][0].size());
    auto poly_eval = [&](const std::vector<Eigen::VectorXcd>& c) {
        struct Out {
            Eigen::VectorXcd v, d1, d2;
        } o{Eigen::VectorXcd::Zero(m), Eigen::VectorXcd::Zero(m), Eigen::VectorXcd::Zero(m)};
        for (size_t j = c.size(); j-- > 0;) {
            o.d2 = o.d2 * r + 2.0 * o.d1;
            o.d1 = o.d1 * r + o.v;
            o.v = o.v * r + c[j];
        }
        return o;
    };

    auto S = poly_eval(b.coeffs[0]);
    const double k = b.k;
    const double rk = std::pow(r, k);
    BranchPointValue out;
    out.outside_validity = r > 0.5;
    out.u = rk * S.v;
    out.du = rk / r * (k * S.v + r * S.d1);
    out.ddu = rk / sq(r) * (k * (k - 1.0) * S.v + 2.0 * k * r * S.d1 + sq(r) * S.d2);
    if (b.log_degree >= 1) {
        auto T = poly_eval(b.coeffs[1]);
        const double lg = std::log(r);
        out.u += rk * lg * T.v;
        out.du += rk / r * (lg * (k * T.v + r * T.d1) + T.v);
        out.ddu += rk / sq(r) *
                   (lg * (k * (k - 1.0) * T.v + 2.0 * k * r * T.d1 + sq(r) * T.d2) +
                    (2.0 * k - 1.0) * T.v + 2.0 * r * T.d1);
    }
    return out;
}

struct BranchResidual {
    double abs = 0.0;
    double rel = 0.0;
};

/// Pointwise defect -u'' - P u' + Q u of a branch, measured against the
/// size of the largest constituent term. Independent of the recurrence:
/// P and Q are evaluated in closed form.
inline BranchResidual branch_residual(const RadialOperator& op, const FrobeniusBranch& b,
                                      double r) {
    auto val = evaluate_branch(b, r);
    Eigen::VectorXcd res = -val.ddu - op.P(r) * val.du + op.Q(r) * val.u;
    BranchResidual out;
    out.abs = res.norm();
    double scale = std::max({val.ddu.norm(), (op.Q(r) * val.u).norm(), op.P(r) * val.du.norm()});
    out.rel = out.abs / std::max(scale, 1e-300);
    return out;
}

/// Builds the full 2m-dimensional solution system of one radial block:
/// a branch per (root, kernel vector) pair plus a deficiency branch per
/// double root with a one-dimensional kernel. Roots are processed top
/// down so that an unsolvable resonance at k + m can always borrow the
/// already-built branch at the target root for its logarithmic correction.
class FrobeniusSystem {
public:
    FrobeniusSystem(const RadialOperator& op, int N = 20)
        : op_(op), N_(N), eig_(indicial_eigenstructure(op)) {
        if (N < 4) throw validation_error("frobenius: series order must be >= 4");
        roots_ = indicial_roots(op);
        const int mm = op_.m();

        auto P = op_.P_series(N_ + 2);
        auto Q = op_.Q_series(N_ + 2);
        pcoef_.assign(static_cast<size_t>(N_ + 2), 0.0);
        for (int d = -1; d <= N_; ++d) pcoef_[static_cast<size_t>(d + 1)] = P.coeff(d);
        qcoef_.assign(static_cast<size_t>(N_ + 3), Eigen::MatrixXcd::Zero(mm, mm));
        for (int d = -2; d <= N_; ++d) {
            Eigen::MatrixXcd& q = qcoef_[static_cast<size_t>(d + 2)];
            for (int i = 0; i < mm; ++i)
                for (int j = 0; j < mm; ++j)
                    q(i, j) = Q[static_cast<size_t>(i * mm + j)].coeff(d);
        }

        for (size_t ri = 0; ri < roots_.size(); ++ri) {
            const auto& root = roots_[ri];
            for (const auto& v : root.vectors) build_branch(root.k, v, false);
            if (root.log_required) build_branch(root.k, root.vectors[0], true);
        }
        if (static_cast<int>(branches_.size()) != 2 * mm)
            throw internal_error("frobenius: branch count does not match 2m");
    }

    const std::vector<IndicialRoot>& roots() const { return roots_; }
    const std::vector<FrobeniusBranch>& branches() const { return branches_; }

private:
    cplx pc(int d) const { return pcoef_[static_cast<size_t>(d + 1)]; }
    const Eigen::MatrixXcd& qc(int d) const { return qcoef_[static_cast<size_t>(d + 2)]; }

    Eigen::VectorXcd recurrence_rhs(double k, int m, const std::vector<Eigen::VectorXcd>& v) const {
        Eigen::VectorXcd b = Eigen::VectorXcd::Zero(op_.m());
        for (int l = 0; l < m; ++l) {
            b -= qc(m - l - 2) * v[static_cast<size_t>(l)];
            cplx p = pc(m - l - 1);
            if (p != cplx(0.0)) b += (k + l) * p * v[static_cast<size_t>(l)];
        }
        return b;
    }

    Eigen::VectorXcd log_feedback(double k, int m, const std::vector<Eigen::VectorXcd>& T) const {
        Eigen::VectorXcd d = -2.0 * (k + m) * T[static_cast<size_t>(m)];
        for (int l = 0; l < m; ++l) {
            cplx p = pc(m - l - 1);
            if (p != cplx(0.0)) d -= p * T[static_cast<size_t>(l)];
        }
        return d;
    }

    const FrobeniusBranch* find_branch(double k, const Eigen::VectorXcd& dir) const {
        for (const auto& b : branches_) {
            if (std::abs(b.k - k) > 1e-9 * (1.0 + std::abs(k))) continue;
            if (b.from_deficiency) continue;
            cplx overlap = b.leading.normalized().adjoint() * dir.normalized();
            if (std::abs(overlap) > 0.999) return &b;
        }
        return nullptr;
    }

    void build_branch(double k, const Eigen::VectorXcd& v0, bool deficiency) {
        const int mm = op_.m();
        std::vector<Eigen::VectorXcd> S(static_cast<size_t>(N_ + 1),
                                        Eigen::VectorXcd::Zero(mm));
        std::vector<Eigen::VectorXcd> T(static_cast<size_t>(N_ + 1),
                                        Eigen::VectorXcd::Zero(mm));
        bool log_used = deficiency;
        if (deficiency) {
            const FrobeniusBranch* base = find_branch(k, v0);
            if (!base) throw internal_error("frobenius: deficiency branch lacks its base");
            if (base->log_degree > 0)
                throw internal_error("frobenius: log ladder of degree >= 2 encountered");
            for (int m = 0; m <= N_; ++m) T[static_cast<size_t>(m)] = base->coeffs[0][static_cast<size_t>(m)];
        } else {
            S[0] = v0;
        }

        const double res_tol = 1e-8;
        for (int m = 1; m <= N_; ++m) {
            const double s = k + m;
            Eigen::VectorXcd rhs = recurrence_rhs(k, m, S);
            if (log_used) rhs -= log_feedback(k, m, T);

            // Resolve unsolvable resonant components by extending the log
            // part with branches rooted at s; each extension shifts the
            // feedback at this order by -2s times its leading vector.
            for (size_t i = 0; i < eig_.values.size(); ++i) {
                double denom = eig_.values[i] - sq(s);
                if (std::abs(denom) > res_tol * (1.0 + sq(s) + std::abs(eig_.values[i])))
                    continue;
                cplx g = eig_.vectors[i].adjoint() * rhs;
                if (std::abs(g) <= 1e-9 * (1.0 + rhs.norm())) continue;
                if (std::abs(s) < 1e-9)
                    throw internal_error("frobenius: obstruction at exponent zero");
                const FrobeniusBranch* target = find_branch(s, eig_.vectors[i]);
                if (!target)
                    throw internal_error("frobenius: no branch available at resonant exponent");
                if (target->log_degree > 0)
                    throw internal_error("frobenius: log ladder of degree >= 2 encountered");
                cplx lead_overlap = eig_.vectors[i].adjoint() * target->leading;
                cplx c = -g / (2.0 * s * lead_overlap);
                for (int j = 0; m + j <= N_; ++j)
                    T[static_cast<size_t>(m + j)] += c * target->coeffs[0][static_cast<size_t>(j)];
                log_used = true;
                rhs = recurrence_rhs(k, m, S) - log_feedback(k, m, T);
            }

            Eigen::VectorXcd vm = Eigen::VectorXcd::Zero(mm);
            for (size_t i = 0; i < eig_.values.size(); ++i) {
                double denom = eig_.values[i] - sq(s);
                cplx g = eig_.vectors[i].adjoint() * rhs;
                if (std::abs(denom) > res_tol * (1.0 + sq(s) + std::abs(eig_.values[i]))) {
                    vm += (g / denom) * eig_.vectors[i];
                } else if (std::abs(g) > 1e-9 * (1.0 + rhs.norm())) {
                    throw internal_error("frobenius: resonance survived log extension");
                }
            }
            S[static_cast<size_t>(m)] = vm;
        }

        FrobeniusBranch b;
        b.k = k;
        b.N = N_;
        b.from_deficiency = deficiency;
        b.log_degree = log_used ? 1 : 0;
        b.coeffs.push_back(std::move(S));
        if (log_used) b.coeffs.push_back(std::move(T));
        b.leading = log_used && deficiency ? b.coeffs[1][0] : b.coeffs[0][0];
        branches_.push_back(std::move(b));
    }

    RadialOperator op_;
    int N_;
    IndicialEigen eig_;
    std::vector<IndicialRoot> roots_;
    std::vector<FrobeniusBranch> branches_;
    std::vector<cplx> pcoef_;
    std::vector<Eigen::MatrixXcd> qcoef_;
};

inline std::vector<FrobeniusBranch> all_branches(const RadialOperator& op, int N = 20) {
    return FrobeniusSystem(op, N).branches();
}

/// The branch with a given root and leading direction (top log level).
inline FrobeniusBranch frobenius_branch(const RadialOperator& op, double k,
                                        const Eigen::VectorXcd& leading, int N = 20) {
    auto all = all_branches(op, N);
    for (auto& b : all) {
        if (std::abs(b.k - k) > 1e-9 * (1.0 + std::abs(k))) continue;
        cplx overlap = b.leading.normalized().adjoint() * leading.normalized();
        if (std::abs(overlap) > 0.999) return b;
    }
    throw validation_error("frobenius_branch: no branch with the requested root and direction");
}

/// Max recurrence defect over all orders and log levels, normalized by the
/// branch scale. Exercises the resonant orders where components were fixed
/// by log extensions rather than by division.
inline double branch_recurrence_defect(const RadialOperator& op, const FrobeniusBranch& b) {
    const int mm = op.m();
    auto P = op.P_series(b.N + 2);
    auto Q = op.Q_series(b.N + 2);
    auto qc = [&](int d) {
        Eigen::MatrixXcd q(mm, mm);
        for (int i = 0; i < mm; ++i)
            for (int j = 0; j < mm; ++j) q(i, j) = Q[static_cast<size_t>(i * mm + j)].coeff(d);
        return q;
    };
    const double scale = std::max(branch_scale(b), 1e-300);
    double worst = 0.0;
    const auto& S = b.coeffs[0];
    const std::vector<Eigen::VectorXcd>* T = b.log_degree ? &b.coeffs[1] : nullptr;
    for (int m = 0; m <= b.N; ++m) {
        const double s = b.k + m;
        Eigen::MatrixXcd M = qc(-2) - sq(s) * Eigen::MatrixXcd::Identity(mm, mm);
        Eigen::VectorXcd resS = M * S[static_cast<size_t>(m)];
        Eigen::VectorXcd resT = Eigen::VectorXcd::Zero(mm);
        if (T) resT = M * (*T)[static_cast<size_t>(m)];
        for (int l = 0; l < m; ++l) {
            Eigen::MatrixXcd chunk = qc(m - l - 2) - (b.k + l) * P.coeff(m - l - 1) *
                                                         Eigen::MatrixXcd::Identity(mm, mm);
            resS += chunk * S[static_cast<size_t>(l)];
            if (T) resT += chunk * (*T)[static_cast<size_t>(l)];
        }
        if (T) {
            resS -= 2.0 * s * (*T)[static_cast<size_t>(m)];
            for (int l = 0; l < m; ++l)
                resS -= P.coeff(m - l - 1) * (*T)[static_cast<size_t>(l)];
        }
        worst = std::max({worst, resS.norm() / scale, resT.norm() / scale});
    }
    return worst;
}

} // namespace conetube

#endif

#ifndef CONETUBE_L2CLASS_HPP
#define CONETUBE_L2CLASS_HPP

#include "conetube/frobenius.hpp"

namespace conetube {

/// Scalar radial profile of the shape r^base * sum_m (A_m + ln(r) B_m) r^m.
/// The building block for the derived fields of a branch: exterior
/// derivative, codifferential and covariant derivative of a separated mode
/// reduce to term combinations w(r) * component with w one of the frame
/// coefficient functions.
class LogPoly {
public:
    double base = 0.0;
    std::vector<cplx> A, B;

    static LogPoly from_branch(const FrobeniusBranch& b, int comp) {
        LogPoly s;
        s.base = b.k;
        size_t n = b.coeffs[0].size();
        s.A.resize(n, cplx(0.0));
        s.B.resize(n, cplx(0.0));
        for (size_t m = 0; m < n; ++m) {
            s.A[m] = b.coeffs[0][m](comp);
            if (b.log_degree >= 1) s.B[m] = b.coeffs[1][m](comp);
        }
        return s;
    }

    static LogPoly zero_like(const LogPoly& o, int base_shift) {
        LogPoly s;
        s.base = o.base + base_shift;
        s.A.assign(o.A.size(), cplx(0.0));
        s.B.assign(o.B.size(), cplx(0.0));
        return s;
    }

    LogPoly derivative() const {
        LogPoly s;
        s.base = base - 1.0;
        s.A.resize(A.size());
        s.B.resize(B.size());
        for (size_t m = 0; m < A.size(); ++m) {
            double e = base + static_cast<double>(m);
            s.A[m] = e * A[m] + B[m];
            s.B[m] = e * B[m];
        }
        return s;
    }

    /// Product with a Laurent coefficient series; the log level is inert.
    LogPoly times(const TruncatedSeries& w) const {
        LogPoly s;
        s.base = base + w.lead();
        s.A.assign(A.size(), cplx(0.0));
        s.B.assign(B.size(), cplx(0.0));
        for (size_t m = 0; m < A.size(); ++m) {
            int jmax = std::min<int>(static_cast<int>(m), w.top() - w.lead());
            for (int j = 0; j <= jmax; ++j) {
                cplx wj = w.coeff(w.lead() + j);
                if (wj == cplx(0.0)) continue;
                s.A[m] += wj * A[m - static_cast<size_t>(j)];
                s.B[m] += wj * B[m - static_cast<size_t>(j)];
            }
        }
        return s;
    }

    LogPoly scaled(cplx c) const {
        LogPoly s = *this;
        for (auto& v : s.A) v *= c;
        for (auto& v : s.B) v *= c;
        return s;
    }

    /// this += c * o. Bases may differ by a nonnegative integer (o sits
    /// higher); the common reliable window shrinks accordingly.
    LogPoly& axpy(cplx c, const LogPoly& o) {
        double d = o.base - base;
        long shift = std::lround(d);
        if (std::abs(d - static_cast<double>(shift)) > 1e-9 || shift < 0)
            throw internal_error("log-poly combination with incompatible bases");
        for (size_t m = static_cast<size_t>(shift); m < A.size(); ++m) {
            size_t j = m - static_cast<size_t>(shift);
            if (j >= o.A.size()) break;
            A[m] += c * o.A[j];
            B[m] += c * o.B[j];
        }
        return *this;
    }
};

/// Leading-exponent data of one derived field, from a coefficient scan
/// with the documented zero threshold (1e-10 times the branch scale).
struct FieldClass {
    double exponent = 0.0;
    bool exact = false;             // pinned by a nonzero coefficient
    bool identically_zero = false;  // all computed coefficients below threshold
    bool log_at_leading = false;
    bool in_L2 = false;
};

inline FieldClass scan_leading(const std::vector<LogPoly>& comps, double thresh) {
    FieldClass fc;
    if (comps.empty()) {
        fc.identically_zero = true;
        fc.in_L2 = true;
        return fc;
    }
    double base = comps[0].base;
    size_t len = comps[0].A.size();
    for (const auto& c : comps) {
        if (std::abs(c.base - base) > 1e-9)
            throw internal_error("field scan requires aligned components");
        len = std::min(len, c.A.size());
    }
    for (size_t m = 0; m < len; ++m) {
        double amax = 0.0, bmax = 0.0;
        for (const auto& c : comps) {
            amax = std::max(amax, std::abs(c.A[m]));
            bmax = std::max(bmax, std::abs(c.B[m]));
        }
        if (amax > thresh || bmax > thresh) {
            fc.exponent = base + static_cast<double>(m);
            fc.exact = true;
            fc.log_at_leading = bmax > thresh;
            fc.in_L2 = fc.exponent > -1.0 + 1e-9;
            return fc;
        }
    }
    fc.identically_zero = true;
    fc.exponent = base + static_cast<double>(len);  // lower bound
    fc.in_L2 = true;
    return fc;
}

/// Closed-form leading prediction: exponent and the coefficient pair
/// (plain, log) expected there. exact = false means the closed form only
/// bounds the exponent from below and the series scan owns the answer.
struct RuleField {
    double exponent = 0.0;
    bool exact = false;
    bool log_at_leading = false;
    bool identically_zero = false;
};

struct ModeClassification {
    double k = 0.0;
    int log_degree = 0;
    bool from_deficiency = false;

    FieldClass u, du, delta_u, grad_u, grad_du;
    RuleField rule_u, rule_du, rule_delta_u, rule_grad_u, rule_grad_du;
    bool rule_series_agree = false;

    bool admissible = false;    // u and du square integrable
    bool route_delta = false;   // u, du, delta u square integrable
    bool route_grad = false;    // u, grad u square integrable
};

namespace detail_l2 {

struct Ctx {
    double k;
    double pb;
    double s;  // sqrt(lambda')
    BlockKind kind;
    TruncatedSeries coth, tanh, inv_sinh, sech, P;
};

inline std::vector<LogPoly> du_components(const Ctx& c, const std::vector<LogPoly>& u) {
    cplx ipb(0.0, c.pb);
    std::vector<LogPoly> out;
    switch (c.kind) {
        case BlockKind::coupled3: {
            const LogPoly &f = u[0], &g = u[1], &w = u[2];
            LogPoly a = g.derivative();
            a.axpy(1.0, g.times(c.coth)).axpy(-ipb, f.times(c.inv_sinh));
            LogPoly b = w.derivative();
            b.axpy(1.0, w.times(c.tanh)).axpy(-c.s, f.times(c.sech));
            LogPoly cc = w.times(c.inv_sinh).scaled(ipb);
            cc.axpy(-c.s, g.times(c.sech));
            out = {a, b, cc};
            break;
        }
        case BlockKind::coupled2: {
            const LogPoly &f = u[0], &g = u[1];
            LogPoly a = g.derivative();
            a.axpy(1.0, g.times(c.coth)).axpy(-ipb, f.times(c.inv_sinh));
            out = {a};
            break;
        }
        case BlockKind::scalar: {
            const LogPoly& w = u[0];
            LogPoly b = w.derivative();
            b.axpy(1.0, w.times(c.tanh));
            LogPoly cc = w.times(c.inv_sinh).scaled(ipb);
            // align c (base k-1) with b (base k-1): both already match
            out = {b, cc};
            break;
        }
    }
    return out;
}

inline std::vector<LogPoly> delta_component(const Ctx& c, const std::vector<LogPoly>& u) {
    if (c.kind == BlockKind::scalar) return {};  // coclosed family: identically zero
    cplx ipb(0.0, c.pb);
    const LogPoly &f = u[0], &g = u[1];
    LogPoly d = f.derivative();
    d.axpy(1.0, f.times(c.P)).axpy(ipb, g.times(c.inv_sinh));
    if (c.kind == BlockKind::coupled3) d.axpy(-c.s, u[2].times(c.sech));
    return {d.scaled(-1.0)};
}

/// Covariant-derivative component profiles that are determined by the mode
/// data alone. Components carrying cross-section derivatives of the
/// eigenforms are omitted: they enter at the exponent of the field itself
/// and can never undercut the listed ones, so leading exponents and
/// square-integrability flags are unaffected.
inline std::vector<LogPoly> grad_components(const Ctx& c, const std::vector<LogPoly>& u,
                                            bool of_two_form) {
    cplx ipb(0.0, c.pb);
    std::vector<LogPoly> out;
    auto rot_pair = [&](const LogPoly& x, const LogPoly& y) {
        // theta-derivative slots of an (x e^r + y e^theta)-type pair:
        //   i p beta x / sinh - coth y  and  coth x + i p beta y / sinh
        LogPoly r1 = x.times(c.inv_sinh).scaled(ipb);
        r1.axpy(-1.0, y.times(c.coth));
        LogPoly r2 = x.times(c.coth);
        r2.axpy(ipb, y.times(c.inv_sinh));
        out.push_back(r1);
        out.push_back(r2);
    };
    if (!of_two_form) {
        switch (c.kind) {
            case BlockKind::coupled3: {
                const LogPoly &f = u[0], &g = u[1], &w = u[2];
                out.push_back(f.derivative());
                out.push_back(g.derivative());
                out.push_back(w.derivative());
                rot_pair(f, g);
                out.push_back(w.times(c.inv_sinh).scaled(ipb));
                LogPoly e1 = f.times(c.sech).scaled(c.s);
                e1.axpy(-1.0, w.times(c.tanh));
                out.push_back(e1);
                out.push_back(g.times(c.sech).scaled(c.s));
                out.push_back(f.times(c.tanh));
                break;
            }
            case BlockKind::coupled2: {
                const LogPoly &f = u[0], &g = u[1];
                out.push_back(f.derivative());
                out.push_back(g.derivative());
                rot_pair(f, g);
                out.push_back(f.times(c.tanh));
                break;
            }
            case BlockKind::scalar: {
                const LogPoly& w = u[0];
                out.push_back(w.derivative());
                out.push_back(w.times(c.inv_sinh).scaled(ipb));
                out.push_back(w.times(c.tanh));
                break;
            }
        }
        return out;
    }
    // Input: the du components per kind.
    switch (c.kind) {
        case BlockKind::coupled3: {
            const LogPoly &a = u[0], &b = u[1], &cc = u[2];
            out.push_back(a.derivative());
            out.push_back(b.derivative());
            out.push_back(cc.derivative());
            out.push_back(a.times(c.inv_sinh).scaled(ipb));
            rot_pair(b, cc);
            LogPoly e1 = a.times(c.sech).scaled(c.s);
            e1.axpy(1.0, cc.times(c.tanh));
            out.push_back(e1);
            out.push_back(a.times(c.tanh));
            break;
        }
        case BlockKind::coupled2: {
            const LogPoly& a = u[0];
            out.push_back(a.derivative());
            out.push_back(a.times(c.inv_sinh).scaled(ipb));
            out.push_back(a.times(c.tanh));
            break;
        }
        case BlockKind::scalar: {
            const LogPoly &b = u[0], &cc = u[1];
            out.push_back(b.derivative());
            out.push_back(cc.derivative());
            rot_pair(b, cc);
            out.push_back(cc.times(c.tanh));
            break;
        }
    }
    return out;
}

inline void align_components(std::vector<LogPoly>& comps) {
    if (comps.empty()) return;
    double base = comps[0].base;
    for (const auto& c : comps) base = std::min(base, c.base);
    for (auto& c : comps) {
        if (std::abs(c.base - base) < 1e-9) continue;
        LogPoly shifted;
        shifted.base = base;
        shifted.A.assign(c.A.size(), cplx(0.0));
        shifted.B.assign(c.B.size(), cplx(0.0));
        shifted.axpy(1.0, c);
        c = shifted;
    }
}

} // namespace detail_l2

/// Leading-order rule evaluation from the order-zero data of the branch:
/// an independent cross-check of the series scan.
namespace detail_l2 {

struct LeadPair {
    Eigen::VectorXcd A, B;
};

inline RuleField rule_from_pair(const LeadPair& lp, double exponent, double thresh) {
    RuleField rf;
    rf.exponent = exponent;
    double a = lp.A.size() ? lp.A.lpNorm<Eigen::Infinity>() : 0.0;
    double b = lp.B.size() ? lp.B.lpNorm<Eigen::Infinity>() : 0.0;
    if (a > thresh || b > thresh) {
        rf.exact = true;
        rf.log_at_leading = b > thresh;
    } else {
        rf.exact = false;
        rf.exponent = exponent + 1.0;  // lower bound only
    }
    return rf;
}

} // namespace detail_l2

class Classifier {
public:
    explicit Classifier(const RadialOperator& op, int N = 20) : op_(op), N_(N) {}

    ModeClassification classify(const FrobeniusBranch& b) const {
        if (b.coeffs[0].size() < 7)
            throw validation_error("classification needs series order at least 6");
        ModeClassification mc;
        mc.k = b.k;
        mc.log_degree = b.log_degree;
        mc.from_deficiency = b.from_deficiency;
        const double thresh = 1e-10 * std::max(branch_scale(b), 1e-300);

        detail_l2::Ctx ctx = make_ctx(std::max(N_, b.N));
        ctx.k = b.k;

        std::vector<LogPoly> u;
        for (int j = 0; j < op_.m(); ++j) u.push_back(LogPoly::from_branch(b, j));

        auto du = detail_l2::du_components(ctx, u);
        detail_l2::align_components(du);
        auto del = detail_l2::delta_component(ctx, u);
        auto gu = detail_l2::grad_components(ctx, u, false);
        detail_l2::align_components(gu);
        auto gdu = detail_l2::grad_components(ctx, du, true);
        detail_l2::align_components(gdu);

        mc.u = scan_leading(u, thresh);
        mc.du = scan_leading(du, thresh);
        mc.delta_u = del.empty() ? FieldClass{0.0, false, true, false, true}
                                 : scan_leading(del, thresh);
        mc.grad_u = scan_leading(gu, thresh);
        mc.grad_du = scan_leading(gdu, thresh);

        fill_rules(b, mc, thresh);
        mc.rule_series_agree = check_agreement(mc, thresh);

        mc.admissible = mc.u.in_L2 && mc.du.in_L2;
        mc.route_delta = mc.u.in_L2 && mc.du.in_L2 && mc.delta_u.in_L2;
        mc.route_grad = mc.u.in_L2 && mc.grad_u.in_L2;
        return mc;
    }

private:
    detail_l2::Ctx make_ctx(int N) const {
        detail_l2::Ctx ctx;
        ctx.pb = op_.pbeta();
        ctx.s = std::sqrt(std::max(op_.block().lambda, 0.0));
        ctx.kind = op_.block().kind;
        ctx.coth = coefficient_expansion("coth", N + 3);
        ctx.tanh = coefficient_expansion("tanh", N + 3);
        ctx.inv_sinh = coefficient_expansion("inv_sinh", N + 3);
        ctx.sech = coefficient_expansion("sech", N + 3);
        ctx.P = op_.P_series(N + 3);
        return ctx;
    }

    void fill_rules(const FrobeniusBranch& b, ModeClassification& mc, double thresh) const {
        using detail_l2::LeadPair;
        const double k = b.k;
        const cplx ipb(0.0, op_.pbeta());
        const double s = std::sqrt(std::max(op_.block().lambda, 0.0));
        const int m = op_.m();
        Eigen::VectorXcd S0 = b.coeffs[0][0];
        Eigen::VectorXcd T0 = Eigen::VectorXcd::Zero(m);
        if (b.log_degree >= 1) T0 = b.coeffs[1][0];

        mc.rule_u.exponent = k;
        mc.rule_u.exact = true;
        mc.rule_u.log_at_leading = T0.lpNorm<Eigen::Infinity>() > thresh;

        LeadPair du, gu;
        switch (op_.block().kind) {
            case BlockKind::coupled3: {
                cplx fS = S0(0), gS = S0(1), wS = S0(2);
                cplx fT = T0(0), gT = T0(1), wT = T0(2);
                du.A.resize(3);
                du.B.resize(3);
                du.A << (k + 1.0) * gS + gT - ipb * fS, k * wS + wT, ipb * wS;
                du.B << (k + 1.0) * gT - ipb * fT, k * wT, ipb * wT;
                gu.A.resize(6);
                gu.B.resize(6);
                gu.A << k * fS + fT, k * gS + gT, k * wS + wT, ipb * fS - gS, fS + ipb * gS,
                    ipb * wS;
                gu.B << k * fT, k * gT, k * wT, ipb * fT - gT, fT + ipb * gT, ipb * wT;
                mc.rule_delta_u = detail_l2::rule_from_pair(
                    {(Eigen::VectorXcd(1) << -((k + 1.0) * fS + fT + ipb * gS)).finished(),
                     (Eigen::VectorXcd(1) << -((k + 1.0) * fT + ipb * gT)).finished()},
                    k - 1.0, thresh);
                (void)s;
                break;
            }
            case BlockKind::coupled2: {
                cplx fS = S0(0), gS = S0(1), fT = T0(0), gT = T0(1);
                du.A.resize(1);
                du.B.resize(1);
                du.A << (k + 1.0) * gS + gT - ipb * fS;
                du.B << (k + 1.0) * gT - ipb * fT;
                gu.A.resize(4);
                gu.B.resize(4);
                gu.A << k * fS + fT, k * gS + gT, ipb * fS - gS, fS + ipb * gS;
                gu.B << k * fT, k * gT, ipb * fT - gT, fT + ipb * gT;
                mc.rule_delta_u = detail_l2::rule_from_pair(
                    {(Eigen::VectorXcd(1) << -((k + 1.0) * fS + fT + ipb * gS)).finished(),
                     (Eigen::VectorXcd(1) << -((k + 1.0) * fT + ipb * gT)).finished()},
                    k - 1.0, thresh);
                break;
            }
            case BlockKind::scalar: {
                cplx wS = S0(0), wT = T0(0);
                du.A.resize(2);
                du.B.resize(2);
                du.A << k * wS + wT, ipb * wS;
                du.B << k * wT, ipb * wT;
                gu.A.resize(2);
                gu.B.resize(2);
                gu.A << k * wS + wT, ipb * wS;
                gu.B << k * wT, ipb * wT;
                mc.rule_delta_u.identically_zero = true;
                mc.rule_delta_u.exact = true;
                mc.rule_delta_u.exponent = 0.0;
                break;
            }
        }
        mc.rule_du = detail_l2::rule_from_pair(du, k - 1.0, thresh);
        mc.rule_grad_u = detail_l2::rule_from_pair(gu, k - 1.0, thresh);

        if (mc.rule_du.exact) {
            const double kp = k - 1.0;
            LeadPair g2;
            switch (op_.block().kind) {
                case BlockKind::coupled3: {
                    cplx aA = du.A(0), bA = du.A(1), cA = du.A(2);
                    cplx aB = du.B(0), bB = du.B(1), cB = du.B(2);
                    g2.A.resize(6);
                    g2.B.resize(6);
                    g2.A << kp * aA + aB, kp * bA + bB, kp * cA + cB, ipb * aA, ipb * bA - cA,
                        bA + ipb * cA;
                    g2.B << kp * aB, kp * bB, kp * cB, ipb * aB, ipb * bB - cB, bB + ipb * cB;
                    break;
                }
                case BlockKind::coupled2: {
                    cplx aA = du.A(0), aB = du.B(0);
                    g2.A.resize(2);
                    g2.B.resize(2);
                    g2.A << kp * aA + aB, ipb * aA;
                    g2.B << kp * aB, ipb * aB;
                    break;
                }
                case BlockKind::scalar: {
                    cplx bA = du.A(0), cA = du.A(1), bB = du.B(0), cB = du.B(1);
                    g2.A.resize(4);
                    g2.B.resize(4);
                    g2.A << kp * bA + bB, kp * cA + cB, ipb * bA - cA, bA + ipb * cA;
                    g2.B << kp * bB, kp * cB, ipb * bB - cB, bB + ipb * cB;
                    break;
                }
            }
            mc.rule_grad_du = detail_l2::rule_from_pair(g2, k - 2.0, thresh);
        } else {
            mc.rule_grad_du.exact = false;
            mc.rule_grad_du.exponent = k - 1.0;  // du at least k, so its gradient at least k-1
        }
    }

    bool check_agreement(const ModeClassification& mc, double thresh) const {
        (void)thresh;
        auto one = [&](const RuleField& r, const FieldClass& s) {
            if (r.identically_zero) return s.identically_zero;
            if (r.exact)
                return s.exact && std::abs(s.exponent - r.exponent) < 1e-9 &&
                       s.log_at_leading == r.log_at_leading;
            // Lower bound: the scan must sit at or above it.
            return s.identically_zero || s.exponent >= r.exponent - 1e-9;
        };
        return one(mc.rule_u, mc.u) && one(mc.rule_du, mc.du) &&
               one(mc.rule_delta_u, mc.delta_u) && one(mc.rule_grad_u, mc.grad_u) &&
               one(mc.rule_grad_du, mc.grad_du);
    }

    RadialOperator op_;
    int N_;
};

inline ModeClassification classify(const RadialOperator& op, const FrobeniusBranch& b,
                                   int N = 20) {
    return Classifier(op, N).classify(b);
}

struct AdmissibleBasis {
    std::vector<FrobeniusBranch> branches;          // all 2m branches
    std::vector<ModeClassification> classes;        // parallel to branches
    std::vector<size_t> admissible;                 // indices into branches
};

inline AdmissibleBasis admissible_basis(const RadialOperator& op, int N = 20) {
    AdmissibleBasis out;
    out.branches = all_branches(op, N);
    Classifier cl(op, N);
    for (size_t i = 0; i < out.branches.size(); ++i) {
        out.classes.push_back(cl.classify(out.branches[i]));
        if (out.classes.back().admissible) out.admissible.push_back(i);
    }
    return out;
}

/// Least-squares slope of ln(V |u|^2) against ln r over a geometric radius
/// ladder; for a clean branch of exponent k this approaches 2k + 1.
inline double boundary_decay_probe(const RadialOperator& op, const FrobeniusBranch& b,
                                   double r_lo = 1e-3, double r_hi = 1e-2, int npts = 8) {
    if (!(r_lo > 0.0) || !(r_hi > r_lo) || npts < 2)
        throw validation_error("boundary_decay_probe: bad radius ladder");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < npts; ++i) {
        double t = static_cast<double>(i) / (npts - 1);
        double r = r_lo * std::pow(r_hi / r_lo, t);
        auto val = evaluate_branch(b, r);
        double y = std::log(op.geometry().V(r) * val.u.squaredNorm());
        double x = std::log(r);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    double n = npts;
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

} // namespace conetube

#endif

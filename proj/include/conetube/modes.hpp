#ifndef CONETUBE_MODES_HPP
#define CONETUBE_MODES_HPP

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "conetube/geometry.hpp"
#include "conetube/series.hpp"

namespace conetube {

/// Separated 1-form modes on the tube come in three shapes:
///  - coupled3: (f, g, w) coefficients against (e^r, e^theta, phi) built
///    from a cross-section eigenfunction with eigenvalue lambda' > 0,
///  - coupled2: (f, g) built from the constant eigenfunction (lambda' = 0),
///  - scalar: a single coefficient against a coclosed cross-section
///    eigenform with rough-Laplacian eigenvalue mu' >= 0.
enum class BlockKind { coupled2, coupled3, scalar };

inline const char* to_string(BlockKind k) {
    switch (k) {
        case BlockKind::coupled2: return "coupled2";
        case BlockKind::coupled3: return "coupled3";
        case BlockKind::scalar: return "scalar";
    }
    return "?";
}

struct ModeBlock {
    BlockKind kind = BlockKind::coupled2;
    int p = 0;            // theta frequency (the coclosed family carries its own p)
    double lambda = 0.0;  // lambda' for coupled3, mu' for scalar, unused otherwise
    int count = 1;        // multiplicity in an enumeration

    int size() const {
        switch (kind) {
            case BlockKind::coupled3: return 3;
            case BlockKind::coupled2: return 2;
            case BlockKind::scalar: return 1;
        }
        return 0;
    }
};

inline void check_block(const ModeBlock& b) {
    switch (b.kind) {
        case BlockKind::coupled3:
            if (!(b.lambda > 0.0))
                throw validation_error("mode block: coupled3 requires lambda' > 0");
            break;
        case BlockKind::scalar:
            if (!(b.lambda >= 0.0))
                throw validation_error("mode block: scalar requires mu' >= 0");
            break;
        case BlockKind::coupled2:
            if (b.lambda != 0.0)
                throw validation_error("mode block: coupled2 carries no eigenvalue");
            break;
    }
    if (b.count < 1) throw validation_error("mode block: count must be >= 1");
}

inline std::string block_key(const ModeBlock& b) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s p=%d lam=%.17g", to_string(b.kind), b.p, b.lambda);
    return buf;
}

inline bool block_less(const ModeBlock& a, const ModeBlock& b) {
    if (a.kind != b.kind) return static_cast<int>(a.kind) < static_cast<int>(b.kind);
    if (a.p != b.p) return a.p < b.p;
    return a.lambda < b.lambda;
}

/// Mode blocks of the flat circle cross section of circumference `length`
/// (n = 3). Frequencies q and -q give the same radial problem, so q >= 1
/// blocks carry count = 2. The only coclosed 1-forms on a circle are the
/// constant multiples of the arc form, hence one scalar block per p.
inline std::vector<ModeBlock> circle_cross_section_modes(double length, int p_max, int q_max) {
    if (!(length > 0.0)) throw validation_error("circle cross section: length must be positive");
    if (p_max < 0 || q_max < 0)
        throw validation_error("circle cross section: frequency bounds must be >= 0");
    std::vector<ModeBlock> out;
    for (int p = -p_max; p <= p_max; ++p) {
        out.push_back({BlockKind::coupled2, p, 0.0, 1});
        out.push_back({BlockKind::scalar, p, 0.0, 1});
        for (int q = 1; q <= q_max; ++q) {
            double lam = sq(2.0 * pi * q / length);
            out.push_back({BlockKind::coupled3, p, lam, 2});
        }
    }
    std::sort(out.begin(), out.end(), block_less);
    return out;
}

/// Reads mode blocks from a JSON-lines stream: one object per line with
/// "kind" in {coupled3, coupled2, scalar} and the matching spectral fields
/// (lambda_prime / mu_prime, p / p_prime). Blank lines are skipped. Parse
/// or domain errors carry the 1-based line number.
inline std::vector<ModeBlock> load_cross_section_modes(std::istream& in) {
    std::vector<ModeBlock> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw validation_error("eigendata line " + std::to_string(lineno) + ": " + e.what());
        }
        try {
            ModeBlock b;
            std::string kind = j.at("kind").get<std::string>();
            if (kind == "coupled3") {
                b.kind = BlockKind::coupled3;
                b.lambda = j.at("lambda_prime").get<double>();
                b.p = j.at("p").get<int>();
            } else if (kind == "coupled2") {
                b.kind = BlockKind::coupled2;
                b.p = j.at("p").get<int>();
            } else if (kind == "scalar") {
                b.kind = BlockKind::scalar;
                b.lambda = j.at("mu_prime").get<double>();
                b.p = j.at("p_prime").get<int>();
            } else {
                throw validation_error("unknown kind '" + kind + "'");
            }
            if (j.contains("count")) b.count = j.at("count").get<int>();
            check_block(b);
            out.push_back(b);
        } catch (const nlohmann::json::exception& e) {
            throw validation_error("eigendata line " + std::to_string(lineno) + ": " + e.what());
        } catch (const validation_error& e) {
            throw validation_error("eigendata line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

inline std::vector<ModeBlock> load_cross_section_modes(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("eigendata: cannot open '" + path + "'");
    return load_cross_section_modes(in);
}

enum class OperatorForm { rough, shifted };

/// One separated radial block of the rough Laplacian (form = rough) or of
/// L = nabla*nabla + (n-1) (form = shifted) acting on 1-forms:
///     A[u] = -u'' - P(r) u' + Q(r) u
/// on the mode coefficients. Q is Hermitian for every r > 0; its entries
/// blow up like 1/r^2 towards the cone axis.
class RadialOperator {
public:
    RadialOperator(Geometry geom, ModeBlock block, OperatorForm form)
        : geom_(geom), block_(block), form_(form) {
        check_block(block_);
        s_ = std::sqrt(std::max(block_.lambda, 0.0));
    }

    const Geometry& geometry() const { return geom_; }
    const ModeBlock& block() const { return block_; }
    OperatorForm form() const { return form_; }
    int m() const { return block_.size(); }
    double shift() const { return form_ == OperatorForm::shifted ? geom_.n - 1.0 : 0.0; }
    double pbeta() const { return block_.p * geom_.beta; }

    double P(double r) const { return geom_.P(r); }

    Eigen::MatrixXcd Q(double r) const {
        const int n = geom_.n;
        const double pb = pbeta();
        const double sh = std::sinh(r), ch = std::cosh(r);
        const double coth2 = sq(ch / sh), tanh2 = sq(sh / ch);
        const double csch2 = 1.0 / sq(sh), sech2 = 1.0 / sq(ch);
        Eigen::MatrixXcd Q = Eigen::MatrixXcd::Zero(m(), m());
        const cplx coupling_fg(0.0, 2.0 * pb * ch / sq(sh));
        const double coupling_fw = -2.0 * s_ * (sh / ch) / ch;
        switch (block_.kind) {
            case BlockKind::coupled3:
                Q(0, 0) = coth2 + (n - 2) * tanh2 + sq(pb) * csch2 + block_.lambda * sech2;
                Q(0, 1) = coupling_fg;
                Q(0, 2) = coupling_fw;
                Q(1, 0) = -coupling_fg;
                Q(1, 1) = coth2 + sq(pb) * csch2 + block_.lambda * sech2;
                Q(2, 0) = coupling_fw;
                Q(2, 2) = tanh2 + sq(pb) * csch2 + (block_.lambda + n - 3) * sech2;
                break;
            case BlockKind::coupled2:
                Q(0, 0) = coth2 + (n - 2) * tanh2 + sq(pb) * csch2;
                Q(0, 1) = coupling_fg;
                Q(1, 0) = -coupling_fg;
                Q(1, 1) = coth2 + sq(pb) * csch2;
                break;
            case BlockKind::scalar:
                Q(0, 0) = tanh2 + sq(pb) * csch2 + block_.lambda * sech2;
                break;
        }
        Q += shift() * Eigen::MatrixXcd::Identity(m(), m());
        return Q;
    }

    /// P as a Laurent series: 1/r + (n - 5/3) r/3-type odd tail.
    TruncatedSeries P_series(int N = 20) const {
        return coefficient_expansion("coth", N) +
               coefficient_expansion("tanh", N).scaled(geom_.n - 2.0);
    }

    /// Row-major m*m array of entry series, shift included, reliable
    /// through order >= N - 1.
    std::vector<TruncatedSeries> Q_series(int N = 20) const {
        const int n = geom_.n;
        const double pb = pbeta();
        auto csch2 = coefficient_expansion("csch2", N);
        auto sech2 = coefficient_expansion("sech2", N);
        auto one = TruncatedSeries::constant(1.0, N);
        auto coth2 = csch2 + one;
        auto tanh2 = one - sech2;
        auto cosh_over_sinh2 = csch2 * detail::cosh_series(N + 2);
        auto tanh_sech = coefficient_expansion("tanh_sech", N);

        const int mm = m();
        std::vector<TruncatedSeries> Q(static_cast<size_t>(mm * mm),
                                       TruncatedSeries::zero(N - 1));
        auto at = [&](int i, int j) -> TruncatedSeries& {
            return Q[static_cast<size_t>(i * mm + j)];
        };
        auto shift_series = TruncatedSeries::constant(shift(), N);
        switch (block_.kind) {
            case BlockKind::coupled3:
                at(0, 0) = coth2 + tanh2.scaled(n - 2.0) + csch2.scaled(sq(pb)) +
                           sech2.scaled(block_.lambda) + shift_series;
                at(0, 1) = cosh_over_sinh2.scaled(cplx(0.0, 2.0 * pb));
                at(0, 2) = tanh_sech.scaled(-2.0 * s_);
                at(1, 0) = cosh_over_sinh2.scaled(cplx(0.0, -2.0 * pb));
                at(1, 1) = coth2 + csch2.scaled(sq(pb)) + sech2.scaled(block_.lambda) + shift_series;
                at(2, 0) = tanh_sech.scaled(-2.0 * s_);
                at(2, 2) = tanh2 + csch2.scaled(sq(pb)) +
                           sech2.scaled(block_.lambda + n - 3.0) + shift_series;
                break;
            case BlockKind::coupled2:
                at(0, 0) = coth2 + tanh2.scaled(n - 2.0) + csch2.scaled(sq(pb)) + shift_series;
                at(0, 1) = cosh_over_sinh2.scaled(cplx(0.0, 2.0 * pb));
                at(1, 0) = cosh_over_sinh2.scaled(cplx(0.0, -2.0 * pb));
                at(1, 1) = coth2 + csch2.scaled(sq(pb)) + shift_series;
                break;
            case BlockKind::scalar:
                at(0, 0) = tanh2 + csch2.scaled(sq(pb)) + sech2.scaled(block_.lambda) + shift_series;
                break;
        }
        return Q;
    }

    /// A[u] = -u'' - P u' + Q u applied to series profiles.
    std::vector<TruncatedSeries> apply_to_series(const std::vector<TruncatedSeries>& u,
                                                 int N = 20) const {
        if (static_cast<int>(u.size()) != m())
            throw validation_error("radial operator: profile count mismatch");
        auto P = P_series(N);
        auto Q = Q_series(N);
        std::vector<TruncatedSeries> out;
        out.reserve(u.size());
        const int mm = m();
        for (int i = 0; i < mm; ++i) {
            auto acc = u[static_cast<size_t>(i)].derivative().derivative().scaled(-1.0) -
                       P * u[static_cast<size_t>(i)].derivative();
            for (int j = 0; j < mm; ++j)
                acc = acc + Q[static_cast<size_t>(i * mm + j)] * u[static_cast<size_t>(j)];
            out.push_back(acc);
        }
        return out;
    }

    /// Pointwise A[u](r) given u, u', u'' stacked as vectors.
    Eigen::VectorXcd apply_pointwise(double r, const Eigen::VectorXcd& u,
                                     const Eigen::VectorXcd& du,
                                     const Eigen::VectorXcd& ddu) const {
        return -ddu - P(r) * du + Q(r) * u;
    }

private:
    Geometry geom_;
    ModeBlock block_;
    OperatorForm form_;
    double s_ = 0.0;  // sqrt(lambda')
};

inline RadialOperator radial_operator(const Geometry& g, const ModeBlock& b, OperatorForm form) {
    return RadialOperator(g, b, form);
}

} // namespace conetube

#endif

#ifndef CONETUBE_REPORT_HPP
#define CONETUBE_REPORT_HPP

#include <chrono>
#include <cstdio>

#include "json.hpp"

#include "conetube/indicial.hpp"
#include "conetube/l2class.hpp"
#include "conetube/solver.hpp"
#include "conetube/verify.hpp"

namespace conetube {

/// Wall-clock section timer. Reports carry timings only when enabled, so a
/// fixed config yields identical report bytes run to run.
class SectionTimings {
public:
    explicit SectionTimings(bool enabled = false) : enabled_(enabled) {}

    bool enabled() const { return enabled_; }

    template <class F>
    auto time(const std::string& name, F&& body) {
        if (!enabled_) return body();
        auto t0 = std::chrono::steady_clock::now();
        auto finish = [&] {
            std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
            entries_.emplace_back(name, dt.count());
        };
        if constexpr (std::is_void_v<decltype(body())>) {
            body();
            finish();
        } else {
            auto out = body();
            finish();
            return out;
        }
    }

    nlohmann::json to_json() const {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [name, sec] : entries_) j[name] = sec;
        return j;
    }

private:
    bool enabled_;
    std::vector<std::pair<std::string, double>> entries_;
};

namespace report {

using nlohmann::json;

inline json complex_json(cplx z) { return json::array({z.real(), z.imag()}); }

inline json vector_json(const Eigen::VectorXcd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(complex_json(v(i)));
    return a;
}

inline json geometry_json(const Geometry& g) {
    return json{{"n", g.n}, {"beta", g.beta}, {"alpha", g.alpha()}, {"a", g.a}};
}

inline json block_json(const ModeBlock& b) {
    json j{{"kind", to_string(b.kind)},
           {"p", b.p},
           {"count", b.count},
           {"components", b.size()},
           {"key", block_key(b)}};
    if (b.kind == BlockKind::coupled3) j["lambda_prime"] = b.lambda;
    if (b.kind == BlockKind::scalar) j["mu_prime"] = b.lambda;
    return j;
}

inline json roots_json(const RadialOperator& op) {
    json arr = json::array();
    for (const auto& root : indicial_roots(op)) {
        json r{{"k", root.k},
               {"multiplicity", root.multiplicity},
               {"log_required", root.log_required}};
        json vecs = json::array();
        for (const auto& v : root.vectors) vecs.push_back(vector_json(v));
        r["vectors"] = vecs;
        arr.push_back(r);
    }
    return arr;
}

inline json field_class_json(const FieldClass& fc) {
    return json{{"exponent", fc.exponent},
                {"exact", fc.exact},
                {"identically_zero", fc.identically_zero},
                {"log_at_leading", fc.log_at_leading},
                {"in_l2", fc.in_L2}};
}

inline json rule_field_json(const RuleField& rf) {
    return json{{"exponent", rf.exponent},
                {"exact", rf.exact},
                {"identically_zero", rf.identically_zero},
                {"log_at_leading", rf.log_at_leading}};
}

inline json classification_json(const ModeClassification& mc) {
    return json{{"k", mc.k},
                {"log_degree", mc.log_degree},
                {"from_deficiency", mc.from_deficiency},
                {"u", field_class_json(mc.u)},
                {"du", field_class_json(mc.du)},
                {"delta_u", field_class_json(mc.delta_u)},
                {"grad_u", field_class_json(mc.grad_u)},
                {"grad_du", field_class_json(mc.grad_du)},
                {"rule_du", rule_field_json(mc.rule_du)},
                {"rule_delta_u", rule_field_json(mc.rule_delta_u)},
                {"rule_grad_u", rule_field_json(mc.rule_grad_u)},
                {"rule_grad_du", rule_field_json(mc.rule_grad_du)},
                {"rule_series_agree", mc.rule_series_agree},
                {"admissible", mc.admissible},
                {"route_delta", mc.route_delta},
                {"route_grad", mc.route_grad}};
}

inline json audit_json(const AuditReport& rep) {
    json blocks = json::array();
    for (const auto& b : rep.blocks)
        blocks.push_back(
            json{{"block", b.block}, {"eigmin", b.eigmin}, {"kernel_empty", b.kernel_empty}});
    json wit = json::array();
    for (const auto& w : rep.witnesses)
        wit.push_back(json{{"block", w.block},
                           {"k", w.k},
                           {"grad_u_exponent", w.grad_u_exponent}});
    return json{{"wide_angle", rep.wide_angle},
                {"all_kernel_empty", rep.all_kernel_empty},
                {"blocks", blocks},
                {"witnesses", wit}};
}

inline json solution_json(const BVPSolution& sol) {
    json exps = json::array();
    for (double e : sol.inner_exponents) exps.push_back(e);
    return json{{"nodes", sol.mesh.M},
                {"components", sol.m},
                {"solution_norm", sol.solution_norm},
                {"rhs_norm", sol.rhs_norm},
                {"residual", sol.residual},
                {"inner_matching", vector_json(sol.inner_matching)},
                {"inner_exponents", exps}};
}

inline json field_solution_json(const FieldSolution& fs) {
    json per = json::array();
    for (size_t i = 0; i < fs.solutions.size(); ++i) {
        json s = solution_json(fs.solutions[i]);
        s["block"] = fs.block_keys[i];
        per.push_back(s);
    }
    return json{{"aggregate_solution_norm", fs.aggregate_solution_norm},
                {"aggregate_rhs_norm", fs.aggregate_rhs_norm},
                {"modes", per}};
}

inline json identity_convergence_json(const std::string& name, const OrderMeasurement& m) {
    return json{{"identity", name},
                {"order", m.order},
                {"exact_null", m.exact_null},
                {"coarse_relative", m.coarse.relative},
                {"fine_relative", m.fine.relative}};
}

/// Canonical serialization: sorted keys (nlohmann objects are ordered maps)
/// and shortest round-trip decimals, so equal values mean equal bytes.
inline std::string render(const json& doc) { return doc.dump(2) + "\n"; }

// --- CSV projection ---------------------------------------------------------

inline std::string csv_number(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline constexpr const char* blocks_csv_header = "kind,p,lambda,count,components,key";

inline std::string blocks_csv_row(const ModeBlock& b) {
    std::string out = to_string(b.kind);
    out += ',' + std::to_string(b.p) + ',' + csv_number(b.lambda) + ',' +
           std::to_string(b.count) + ',' + std::to_string(b.size()) + ',' + block_key(b);
    return out;
}

inline constexpr const char* roots_csv_header =
    "block,p,lambda,k,multiplicity,log_required";

inline std::string roots_csv_row(const ModeBlock& b, const IndicialRoot& r) {
    std::string out = to_string(b.kind);
    out += ',';
    out += std::to_string(b.p);
    out += ',';
    out += csv_number(b.lambda);
    out += ',';
    out += csv_number(r.k);
    out += ',';
    out += std::to_string(r.multiplicity);
    out += ',';
    out += r.log_required ? "1" : "0";
    return out;
}

inline constexpr const char* classification_csv_header =
    "block,p,lambda,k,log_degree,from_deficiency,"
    "u_exponent,u_in_l2,du_exponent,du_in_l2,delta_u_exponent,delta_u_in_l2,"
    "grad_u_exponent,grad_u_in_l2,grad_du_exponent,grad_du_in_l2,"
    "rule_series_agree,admissible,route_delta,route_grad";

inline std::string classification_csv_row(const ModeBlock& b, const ModeClassification& mc) {
    auto flag = [](bool v) { return v ? std::string("1") : std::string("0"); };
    auto fc = [&](const FieldClass& f) {
        return csv_number(f.exponent) + ',' + flag(f.in_L2);
    };
    std::string out = to_string(b.kind);
    out += ',' + std::to_string(b.p) + ',' + csv_number(b.lambda);
    out += ',' + csv_number(mc.k) + ',' + std::to_string(mc.log_degree) + ',' +
           flag(mc.from_deficiency);
    out += ',' + fc(mc.u) + ',' + fc(mc.du) + ',' + fc(mc.delta_u) + ',' + fc(mc.grad_u) +
           ',' + fc(mc.grad_du);
    out += ',' + flag(mc.rule_series_agree) + ',' + flag(mc.admissible) + ',' +
           flag(mc.route_delta) + ',' + flag(mc.route_grad);
    return out;
}

inline constexpr const char* audit_csv_header = "block,eigmin,kernel_empty";

inline std::string audit_csv_row(const BlockAudit& b) {
    return b.block + ',' + csv_number(b.eigmin) + ',' + (b.kernel_empty ? "1" : "0");
}

// Wide angles skip the eigenvalue audit, so their CSV lists the domain
// witnesses instead of an empty block table.
inline constexpr const char* witness_csv_header = "block,k,grad_u_exponent";

inline std::string witness_csv_row(const DomainWitness& w) {
    return w.block + ',' + csv_number(w.k) + ',' + csv_number(w.grad_u_exponent);
}

} // namespace report

} // namespace conetube

#endif

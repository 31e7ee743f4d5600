#define DOCTEST_CONFIG_IMPLEMENT
#include "doctest.h"

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

using nlohmann::json;

namespace {

std::string g_cli;

struct RunResult {
    int status = -1;
    std::string out;
};

// Runs the CLI with a shell-formatted argument string.  stderr is discarded
// unless merge_stderr is set (validation errors print JSON there and nothing
// on stdout, so merging keeps the output parseable).
RunResult run_cli(const std::string& args, bool merge_stderr = false) {
    std::string cmd = g_cli + " " + args + (merge_stderr ? " 2>&1" : " 2>/dev/null");
    FILE* pipe = popen(cmd.c_str(), "r");
    RunResult res;
    if (!pipe) return res;
    char buf[4096];
    size_t got;
    while ((got = fread(buf, 1, sizeof buf, pipe)) > 0) res.out.append(buf, got);
    int rc = pclose(pipe);
    if (WIFEXITED(rc)) res.status = WEXITSTATUS(rc);
    return res;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    size_t start = 0;
    while (start < text.size()) {
        size_t nl = text.find('\n', start);
        if (nl == std::string::npos) {
            out.push_back(text.substr(start));
            break;
        }
        out.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return out;
}

size_t comma_count(const std::string& line) {
    size_t c = 0;
    for (char ch : line)
        if (ch == ',') ++c;
    return c;
}

std::string temp_path(const std::string& stem) {
    return "/tmp/conetube_cli_test_" + stem + "_" + std::to_string(getpid());
}

}  // namespace

TEST_CASE("indicial roots for the reference coupled block") {
    auto r = run_cli("indicial --beta 2 --block coupled3 --p 1 --lambda 1");
    REQUIRE(r.status == 0);
    json doc = json::parse(r.out);
    CHECK(doc.at("config_echo").at("beta").get<double>() == 2.0);
    CHECK(doc.at("geometry").at("n").get<int>() == 3);
    REQUIRE(doc.at("roots").size() == 1);
    const json& roots = doc["roots"][0]["roots"];
    std::vector<double> ks;
    for (const auto& root : roots) {
        ks.push_back(root.at("k").get<double>());
        CHECK(root.at("multiplicity").get<int>() == 1);
        CHECK_FALSE(root.at("log_required").get<bool>());
        CHECK(root.at("vectors").size() == 1);
    }
    REQUIRE(ks.size() == 6);
    std::vector<double> want{3, 2, 1, -1, -2, -3};
    for (size_t i = 0; i < 6; ++i) CHECK(ks[i] == doctest::Approx(want[i]).epsilon(1e-12));
}

TEST_CASE("classify distinguishes narrow and wide angles by exit code") {
    auto wide = run_cli("classify --beta 0.8 --block coupled3 --p 1 --lambda 1");
    REQUIRE(wide.status == 3);
    json doc = json::parse(wide.out);
    bool found_witness = false;
    for (const auto& rep : doc.at("reports"))
        for (const auto& br : rep.at("branches")) {
            CHECK(br.at("rule_series_agree").get<bool>());
            if (br.at("admissible").get<bool>() && !br.at("grad_u").at("in_l2").get<bool>()) {
                found_witness = true;
                CHECK(br.at("k").get<double>() == doctest::Approx(-0.2).epsilon(1e-9));
                CHECK(br.at("grad_u").at("exponent").get<double>() ==
                      doctest::Approx(-1.2).epsilon(1e-9));
            }
        }
    CHECK(found_witness);

    auto narrow = run_cli("classify --beta 2 --block coupled3 --p 1 --lambda 1");
    CHECK(narrow.status == 0);
    json ndoc = json::parse(narrow.out);
    for (const auto& rep : ndoc.at("reports"))
        for (const auto& br : rep.at("branches"))
            if (br.at("admissible").get<bool>()) CHECK(br.at("grad_u").at("in_l2").get<bool>());
}

TEST_CASE("audit exit codes and kernel flags") {
    auto narrow = run_cli(
        "audit --alpha 3.141592653589793 --n 3 --length 6.283185307179586 "
        "--pmax 1 --qmax 1 --nodes 96");
    REQUIRE(narrow.status == 0);
    json doc = json::parse(narrow.out);
    CHECK(doc.at("audit").at("all_kernel_empty").get<bool>());
    CHECK_FALSE(doc["audit"].at("wide_angle").get<bool>());
    CHECK(doc["audit"].at("witnesses").empty());
    for (const auto& b : doc["audit"].at("blocks")) CHECK(b.at("kernel_empty").get<bool>());

    auto wide = run_cli("audit --beta 0.8 --pmax 1 --qmax 1 --nodes 96");
    REQUIRE(wide.status == 3);
    json wdoc = json::parse(wide.out);
    CHECK_FALSE(wdoc.at("audit").at("all_kernel_empty").get<bool>());
    CHECK(wdoc["audit"].at("wide_angle").get<bool>());
    CHECK(!wdoc["audit"].at("witnesses").empty());

    // The CSV projection of a wide-angle audit lists the witnesses, not an
    // empty eigenvalue table.
    auto wide_csv = run_cli("audit --beta 0.8 --pmax 1 --qmax 1 --nodes 96 --format csv");
    CHECK(wide_csv.status == 3);
    auto lines = lines_of(wide_csv.out);
    REQUIRE(lines.size() >= 2);
    CHECK(lines[0] == "block,k,grad_u_exponent");
    CHECK(lines.size() == wdoc["audit"]["witnesses"].size() + 1);
}

TEST_CASE("validation failures exit 2 with a structured error") {
    auto check_validation = [](const std::string& args) {
        auto r = run_cli(args, true);
        CHECK(r.status == 2);
        json err = json::parse(r.out);
        CHECK(err.at("error").at("type").get<std::string>() == "validation");
        CHECK(!err["error"].at("message").get<std::string>().empty());
    };
    check_validation("modes --alpha 3.14 --beta 2");
    check_validation("modes");
    check_validation("indicial --beta 2 --block coupled3 --p 1 --lambda 0");
    check_validation("indicial --beta 2 --block coupled2 --p 0 --lambda 5");
    check_validation("indicial --beta 2 --block nosuch --p 0");
    check_validation("modes --beta 0");

    // Parser-level usage errors share the validation exit code, though their
    // message is CLI11's usage text rather than the JSON object.
    CHECK(run_cli("modes --beta 2 --no-such-flag 1", true).status == 2);
    CHECK(run_cli("--beta 2", true).status == 2);
    CHECK(run_cli("modes --beta 2 --beta 3", true).status == 2);
    CHECK(run_cli("--help", true).status == 0);
}

TEST_CASE("reports are byte deterministic") {
    std::string args = "classify --beta 1.5 --pmax 1 --qmax 1 --seed 7";
    auto a = run_cli(args);
    auto b = run_cli(args);
    REQUIRE(a.status == 0);
    CHECK(a.out == b.out);
    CHECK(!a.out.empty());
}

TEST_CASE("config file supplies defaults and explicit flags override it") {
    std::string path = temp_path("cfg.json");
    {
        std::ofstream f(path);
        f << json{{"beta", 2.0}, {"p_max", 1}, {"q_max", 0}, {"format", "csv"}} << "\n";
    }
    auto base = run_cli("modes --config " + path);
    REQUIRE(base.status == 0);
    auto base_lines = lines_of(base.out);
    REQUIRE(base_lines.size() == 7);  // header + (coupled2 + scalar) per p in {-1,0,1}
    CHECK(base_lines[0] == "kind,p,lambda,count,components,key");

    auto over = run_cli("modes --config " + path + " --pmax 0");
    REQUIRE(over.status == 0);
    auto over_lines = lines_of(over.out);
    REQUIRE(over_lines.size() == 3);
    for (size_t i = 1; i < over_lines.size(); ++i)
        CHECK(over_lines[i].find(",0,") != std::string::npos);

    std::string bad = temp_path("cfg_bad.json");
    {
        std::ofstream f(bad);
        f << json{{"alpha", 3.14}, {"beta", 2.0}} << "\n";
    }
    auto conflict = run_cli("modes --config " + bad, true);
    CHECK(conflict.status == 2);
    std::remove(path.c_str());
    std::remove(bad.c_str());
}

TEST_CASE("csv rows match their headers") {
    auto modes = run_cli("modes --beta 2 --pmax 1 --qmax 1 --format csv");
    REQUIRE(modes.status == 0);
    auto ml = lines_of(modes.out);
    REQUIRE(ml.size() >= 2);
    // three p values, each contributing coupled2 + scalar + one coupled3
    CHECK(ml.size() == 1 + 9);
    for (size_t i = 1; i < ml.size(); ++i) CHECK(comma_count(ml[i]) == comma_count(ml[0]));

    auto roots = run_cli("indicial --beta 2 --pmax 1 --qmax 1 --format csv");
    REQUIRE(roots.status == 0);
    auto rl = lines_of(roots.out);
    CHECK(rl[0] == "block,p,lambda,k,multiplicity,log_required");
    for (size_t i = 1; i < rl.size(); ++i) CHECK(comma_count(rl[i]) == comma_count(rl[0]));

    auto cls = run_cli("classify --beta 2 --block scalar --p 1 --lambda 0 --format csv");
    REQUIRE(cls.status == 0);
    auto cl = lines_of(cls.out);
    REQUIRE(cl.size() >= 2);
    for (size_t i = 1; i < cl.size(); ++i) CHECK(comma_count(cl[i]) == comma_count(cl[0]));
}

TEST_CASE("modes enumeration covers both orientations of each frequency") {
    auto r = run_cli("modes --beta 2 --pmax 1 --qmax 1");
    REQUIRE(r.status == 0);
    json doc = json::parse(r.out);
    const json& blocks = doc.at("blocks");
    REQUIRE(blocks.size() == 9);
    int with_p_plus = 0, with_p_minus = 0, c3 = 0;
    for (const auto& b : blocks) {
        int p = b.at("p").get<int>();
        if (p == 1) ++with_p_plus;
        if (p == -1) ++with_p_minus;
        if (b.at("kind").get<std::string>() == "coupled3") {
            ++c3;
            CHECK(b.at("lambda_prime").get<double>() == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(b.at("count").get<int>() == 2);
        }
    }
    CHECK(with_p_plus == 3);
    CHECK(with_p_minus == 3);
    CHECK(c3 == 3);
}

TEST_CASE("eigendata file drives the block list") {
    std::string path = temp_path("eig.jsonl");
    {
        std::ofstream f(path);
        f << R"({"kind":"coupled3","lambda_prime":2.5,"p":0,"count":2})" << "\n";
        f << R"({"kind":"scalar","mu_prime":0,"p_prime":1})" << "\n";
    }
    auto r = run_cli("modes --beta 2 --eigendata " + path);
    REQUIRE(r.status == 0);
    json doc = json::parse(r.out);
    REQUIRE(doc.at("blocks").size() == 2);

    std::string bad = temp_path("eig_bad.jsonl");
    {
        std::ofstream f(bad);
        f << R"({"kind":"coupled3","lambda_prime":-1,"p":0})" << "\n";
    }
    auto rb = run_cli("modes --beta 2 --eigendata " + bad, true);
    CHECK(rb.status == 2);
    json err = json::parse(rb.out);
    CHECK(err.at("error").at("message").get<std::string>().find("line 1") != std::string::npos);
    std::remove(path.c_str());
    std::remove(bad.c_str());
}

TEST_CASE("solve respects the spectral lower bound") {
    auto r = run_cli("solve --beta 2 --pmax 1 --qmax 0 --nodes 64");
    REQUIRE(r.status == 0);
    json doc = json::parse(r.out);
    const json& reports = doc.at("reports");
    CHECK(reports.at("aggregate_rhs_norm").get<double>() > 0);
    for (const auto& m : reports.at("modes")) {
        double un = m.at("solution_norm").get<double>();
        double fn = m.at("rhs_norm").get<double>();
        CHECK(un <= fn / 2.0 * (1.0 + 1e-6));
        CHECK(m.at("residual").get<double>() < 1e-8);
    }
}

TEST_CASE("table output renders aligned columns") {
    auto r = run_cli("modes --beta 2 --pmax 0 --qmax 0 --format table");
    REQUIRE(r.status == 0);
    auto tl = lines_of(r.out);
    REQUIRE(tl.size() >= 3);
    CHECK(tl[0].find("kind") != std::string::npos);
    CHECK(r.out.find("coupled2") != std::string::npos);
    CHECK(r.out.find(',') == std::string::npos);
}

TEST_CASE("output flag writes the report to a file") {
    std::string path = temp_path("out.json");
    auto r = run_cli("indicial --beta 2 --block scalar --p 0 --lambda 0 --output " + path);
    REQUIRE(r.status == 0);
    CHECK(r.out.empty());
    std::ifstream f(path);
    REQUIRE(f.good());
    json doc = json::parse(f);
    CHECK(doc.contains("roots"));
    std::remove(path.c_str());
}

TEST_CASE("timings section appears only when requested") {
    auto plain = run_cli("audit --beta 2 --pmax 0 --qmax 0 --nodes 48");
    REQUIRE(plain.status == 0);
    CHECK_FALSE(json::parse(plain.out).contains("timings"));
    auto timed = run_cli("audit --beta 2 --pmax 0 --qmax 0 --nodes 48 --timings");
    REQUIRE(timed.status == 0);
    json doc = json::parse(timed.out);
    REQUIRE(doc.contains("timings"));
    CHECK(doc["timings"].contains("kernel_audit"));
}

int main(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) {
        if (argv[i][0] != '-') {
            g_cli = argv[i];
            break;
        }
    }
    if (g_cli.empty()) {
        std::fprintf(stderr, "usage: test_cli <path-to-cli-binary> [doctest args]\n");
        return 1;
    }
    doctest::Context ctx;
    ctx.applyCommandLine(argc, argv);
    return ctx.run();
}

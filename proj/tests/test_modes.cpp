#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "conetube/modes.hpp"

using namespace conetube;

TEST_CASE("circle mode enumeration matches frozen examples") {
    // p_max = q_max = 0: one 2-block and one scalar block.
    auto blocks = circle_cross_section_modes(2 * pi, 0, 0);
    REQUIRE(blocks.size() == 2);
    CHECK(blocks[0].kind == BlockKind::coupled2);
    CHECK(blocks[0].p == 0);
    CHECK(blocks[1].kind == BlockKind::scalar);
    CHECK(blocks[1].lambda == 0.0);

    // length 2*pi, q = 1 gives lambda' = 1; length pi gives lambda' = 4.
    auto b1 = circle_cross_section_modes(2 * pi, 0, 1);
    REQUIRE(b1.size() == 3);
    CHECK(b1[1].kind == BlockKind::coupled3);
    CHECK(b1[1].lambda == doctest::Approx(1.0));
    CHECK(b1[1].count == 2);

    auto b2 = circle_cross_section_modes(pi, 1, 1);
    int found = 0;
    for (const auto& b : b2)
        if (b.kind == BlockKind::coupled3 && b.p == 1) {
            CHECK(b.lambda == doctest::Approx(4.0));
            ++found;
        }
    CHECK(found == 1);
    CHECK(b2.size() == 9);

    CHECK_THROWS_AS(circle_cross_section_modes(0.0, 1, 1), validation_error);
    CHECK_THROWS_AS(circle_cross_section_modes(2 * pi, -1, 0), validation_error);
}

TEST_CASE("eigendata loader") {
    std::istringstream good(R"({"kind":"coupled3","lambda_prime":2.5,"p":1}

{"kind":"scalar","mu_prime":0.0,"p_prime":-2}
{"kind":"coupled2","p":0}
)");
    auto blocks = load_cross_section_modes(good);
    REQUIRE(blocks.size() == 3);
    CHECK(blocks[0].kind == BlockKind::coupled3);
    CHECK(blocks[0].lambda == 2.5);
    CHECK(blocks[1].p == -2);
    CHECK(blocks[2].kind == BlockKind::coupled2);

    std::istringstream bad1(R"({"kind":"coupled3","lambda_prime":2.5,"p":1}
{"kind":"coupled3","lambda_prime":-1.0,"p":0}
)");
    try {
        load_cross_section_modes(bad1);
        FAIL("expected validation error");
    } catch (const validation_error& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }

    std::istringstream bad2("{oops\n");
    CHECK_THROWS_AS(load_cross_section_modes(bad2), validation_error);

    std::istringstream empty("\n  \n");
    CHECK(load_cross_section_modes(empty).empty());

    CHECK_THROWS_AS(load_cross_section_modes(std::string("/nonexistent/path.jsonl")),
                    validation_error);
}

TEST_CASE("Q is Hermitian for all block kinds") {
    Geometry g = metric_data(3, 1.7, 0.5);
    Geometry g4 = metric_data(4, 0.8, 0.5);
    std::vector<std::pair<Geometry, ModeBlock>> cases = {
        {g, {BlockKind::coupled3, 2, 1.0, 1}},
        {g, {BlockKind::coupled3, -1, 4.0, 1}},
        {g, {BlockKind::coupled2, 1, 0.0, 1}},
        {g, {BlockKind::scalar, 3, 2.0, 1}},
        {g4, {BlockKind::coupled3, 1, 3.5, 1}},
    };
    for (auto& [geom, blk] : cases)
        for (auto form : {OperatorForm::rough, OperatorForm::shifted}) {
            RadialOperator op(geom, blk, form);
            for (double r : {0.05, 0.2, 0.45}) {
                Eigen::MatrixXcd Q = op.Q(r);
                CHECK((Q - Q.adjoint()).norm() < 1e-12 * (1.0 + Q.norm()));
            }
        }
}

TEST_CASE("entry series agree with the closed forms") {
    Geometry g = metric_data(4, 1.3, 0.5);
    ModeBlock blk{BlockKind::coupled3, 2, 2.25, 1};
    RadialOperator op(g, blk, OperatorForm::shifted);
    auto Q = op.Q_series(20);
    for (double r : {0.1, 0.3}) {
        Eigen::MatrixXcd Qr = op.Q(r);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                cplx series_val = Q[static_cast<size_t>(i * 3 + j)].evaluate(r);
                CHECK(std::abs(series_val - Qr(i, j)) < 1e-10 * (1.0 + std::abs(Qr(i, j))));
            }
        CHECK(std::abs(op.P_series(20).evaluate(r) - op.P(r)) < 1e-12 * (1.0 + op.P(r)));
    }
}

TEST_CASE("closed-form solutions annihilated by the shifted operator") {
    Geometry g = metric_data(3, 1.4, 0.5);

    // The arc-form family with mu' = 0, p' = 0: cosh(r) is in the kernel of
    // L and 1/cosh(r) is an eigenvector with eigenvalue 2(n-1).
    RadialOperator sc(g, {BlockKind::scalar, 0, 0.0, 1}, OperatorForm::shifted);
    for (double r : {0.1, 0.25, 0.4}) {
        Eigen::VectorXcd u(1), du(1), ddu(1);
        u << std::cosh(r);
        du << std::sinh(r);
        ddu << std::cosh(r);
        CHECK(sc.apply_pointwise(r, u, du, ddu).norm() < 1e-13);

        double ch = std::cosh(r);
        u << 1.0 / ch;
        du << -std::sinh(r) / sq(ch);
        ddu << (2.0 * sq(std::sinh(r)) - sq(ch)) / (ch * sq(ch));
        Eigen::VectorXcd res = sc.apply_pointwise(r, u, du, ddu) - 2.0 * (g.n - 1.0) * u;
        CHECK(res.norm() < 1e-12);
    }

    // The p = 0 function family: (0, sinh(r)) is in the kernel of L.
    RadialOperator c2(g, {BlockKind::coupled2, 0, 0.0, 1}, OperatorForm::shifted);
    for (double r : {0.1, 0.25, 0.4}) {
        Eigen::VectorXcd u(2), du(2), ddu(2);
        u << 0.0, std::sinh(r);
        du << 0.0, std::cosh(r);
        ddu << 0.0, std::sinh(r);
        CHECK(c2.apply_pointwise(r, u, du, ddu).norm() < 1e-13);
    }
}

TEST_CASE("block validation") {
    Geometry g = metric_data(3, 1.0, 0.5);
    CHECK_THROWS_AS(RadialOperator(g, {BlockKind::coupled3, 0, 0.0, 1}, OperatorForm::rough),
                    validation_error);
    CHECK_THROWS_AS(RadialOperator(g, {BlockKind::coupled3, 0, -1.0, 1}, OperatorForm::rough),
                    validation_error);
    CHECK_THROWS_AS(RadialOperator(g, {BlockKind::scalar, 0, -0.5, 1}, OperatorForm::rough),
                    validation_error);
    CHECK_NOTHROW(RadialOperator(g, {BlockKind::scalar, 0, 0.0, 1}, OperatorForm::rough));
}

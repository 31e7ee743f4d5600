#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "conetube/modes.hpp"
#include "conetube/verify.hpp"

using namespace conetube;

namespace {

ChartGrid grid3(int Nr, int Nt, int Nz, double beta = 2.0) {
    return chart_grid_3(beta, 2.0 * pi, 0.1, 0.45, Nr, Nt, Nz);
}

} // namespace

TEST_CASE("chart grids validate their windows") {
    CHECK_THROWS_AS(chart_grid_3(2.0, 2.0 * pi, 0.01, 0.45, 9, 8, 8), validation_error);
    CHECK_THROWS_AS(chart_grid_3(2.0, 2.0 * pi, 0.2, 0.1, 9, 8, 8), validation_error);
    CHECK_THROWS_AS(chart_grid_3(2.0, 2.0 * pi, 0.1, 0.45, 3, 8, 8), validation_error);
    CHECK_THROWS_AS(chart_grid_4(0.0, 0.1, 0.45, 0.5, 9, 8, 9, 9), validation_error);

    auto g = grid3(9, 8, 10);
    CHECK(g.alpha() == doctest::Approx(pi));
    CHECK(g.npts() == 9u * 8u * 10u);
    CHECK(g.coord(0, 8) == doctest::Approx(0.45));
    CHECK(g.coord(1, 8) == doctest::Approx(pi));  // wraps once around the cone
    CHECK(g.periodic(1));
    CHECK(g.periodic(2));
    CHECK(!g.periodic(0));

    auto g4 = chart_grid_4(2.0, 0.1, 0.45, 0.6, 9, 8, 9, 9);
    CHECK(g4.naxes() == 4);
    CHECK(!g4.periodic(2));
    CHECK(g4.coord(2, 8) == doctest::Approx(0.6));
    CHECK(g4.coord(3, 0) == doctest::Approx(-0.6));

    // A grid whose end skips meet in the middle leaves nothing to measure
    // and must refuse instead of reporting a zero defect.
    auto tiny = grid3(7, 8, 8);
    CHECK_THROWS_AS(identity_convergence("W1", tiny, grid3(13, 16, 16), 1),
                    validation_error);
}

TEST_CASE("covariant derivative reproduces hand values on a closed form field") {
    auto g = grid3(41, 32, 24);
    double beta = g.beta;
    auto u = make_field<double>(g, 0, [&](const double* x, const int*) {
        return std::sinh(x[0]) * std::cos(beta * x[1]) * std::cos(x[2]);
    });
    auto grad = op_nabla(u);
    int idx[4] = {12, 7, 5, 0};
    size_t pt = detail_fd::flatten(g, idx);
    double r = g.coord(0, 12), th = g.coord(1, 7), z = g.coord(2, 5);
    CHECK(grad.at(pt, 0) ==
          doctest::Approx(std::cosh(r) * std::cos(beta * th) * std::cos(z)).epsilon(1e-2));
    CHECK(grad.at(pt, 1) ==
          doctest::Approx(-beta * std::sin(beta * th) * std::cos(z)).epsilon(1e-2));
    CHECK(grad.at(pt, 2) ==
          doctest::Approx(-std::tanh(r) * std::cos(beta * th) * std::sin(z)).epsilon(1e-2));
}

TEST_CASE("connection terms carry the frame bracket exactly") {
    // The covector field with constant components (0,1,0) differentiates to
    // pure connection values: (nabla_a e^1)_b = -Gamma(1,a,b), and finite
    // differences of constants vanish identically, wrap included.
    auto g = grid3(17, 12, 10);
    auto e1 = make_field<double>(g, 1, [](const double*, const int* I) {
        return I[0] == 1 ? 1.0 : 0.0;
    });
    auto grad = op_nabla(e1);
    int idx[4] = {5, 3, 2, 0};
    size_t pt = detail_fd::flatten(g, idx);
    double r = g.coord(0, 5);
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            CHECK(grad.at(pt, a * 3 + b) ==
                  doctest::Approx(-connection_coefficients(3, r, 1, a, b)).epsilon(1e-14));

    // Metric compatibility: the identity 2-tensor is parallel, exactly.
    auto id2 = make_field<double>(g, 2, [](const double*, const int* I) {
        return I[0] == I[1] ? 1.0 : 0.0;
    });
    CHECK(core_max(op_nabla(id2)) < 1e-14);
    auto curved = op_curvature(id2);
    for (int a = 0; a < 3; ++a)
        CHECK(curved.at(pt, a * 3 + a) == doctest::Approx(1.0 - 3.0));

    // Same bracket structure in the n=4 chart, including the cross-section
    // connection pair.
    auto g4 = chart_grid_4(2.0, 0.1, 0.45, 0.6, 9, 8, 9, 9);
    auto e3 = make_field<double>(g4, 1, [](const double*, const int* I) {
        return I[0] == 3 ? 1.0 : 0.0;
    });
    auto grad4 = op_nabla(e3);
    int idx4[4] = {4, 3, 4, 4};
    size_t pt4 = detail_fd::flatten(g4, idx4);
    double r4 = g4.coord(0, 4);
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            CHECK(grad4.at(pt4, a * 4 + b) ==
                  doctest::Approx(-connection_coefficients(4, r4, 3, a, b)).epsilon(1e-14));
}

TEST_CASE("curvature identities close at second order on the 3d chart") {
    auto coarse = grid3(13, 14, 14);
    auto fine = grid3(25, 28, 28);
    for (const auto& name : identity_names()) {
        for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
            auto m = identity_convergence(name, coarse, fine, seed);
            INFO(name << " seed " << seed << " order " << m.order << " exact "
                      << m.exact_null);
            CHECK(m.ok(1.7, 2.3));
            CHECK(m.fine.relative < 1e-2);
        }
    }
}

TEST_CASE("one form and symmetric identities close on the 4d chart") {
    auto coarse = chart_grid_4(2.0, 0.1, 0.45, 0.6, 11, 12, 11, 11);
    auto fine = chart_grid_4(2.0, 0.1, 0.45, 0.6, 16, 18, 16, 16);
    for (const std::string name : {"W1", "WS"}) {
        for (std::uint64_t seed : {1u, 2u}) {
            auto m = identity_convergence(name, coarse, fine, seed);
            INFO(name << " seed " << seed << " order " << m.order << " exact "
                      << m.exact_null);
            CHECK(m.ok(1.7, 2.3));
        }
    }
}

TEST_CASE("compactly supported two forms obey the curvature Poincare bound") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        auto pc = poincare_2form_check(grid3(21, 16, 16), seed);
        CHECK(pc.lhs > 0.0);
        CHECK(pc.holds);
    }
    auto pc4 = poincare_2form_check(chart_grid_4(2.0, 0.1, 0.45, 0.6, 13, 12, 13, 13), 1);
    CHECK(pc4.lhs > 0.0);
    CHECK(pc4.holds);
}

TEST_CASE("derivative and contraction are adjoint up to quadrature error") {
    double gap_c = adjointness_gap(grid3(13, 12, 12), 7);
    double gap_f = adjointness_gap(grid3(25, 24, 24), 7);
    CHECK(gap_f < 5e-3);
    CHECK(gap_f < 0.45 * gap_c);
}

TEST_CASE("chart computation reproduces the separated radial blocks") {
    Geometry geom = metric_data(3, 2.0, 0.5);
    auto g = grid3(33, 36, 28);
    const double pb = 1.0 * geom.beta;  // p = 1
    const double qt = 1.0;              // z frequency, lambda' = 1

    auto psi = [&](const double* x) {
        return std::exp(cplx(0.0, pb * x[1] + qt * x[2]));
    };
    auto f = [](double r) { return std::sin(1.0 + r); };
    auto fp = [](double r) { return std::cos(1.0 + r); };
    auto fpp = [](double r) { return -std::sin(1.0 + r); };
    auto gg = [](double r) { return std::cos(2.0 * r); };
    auto ggp = [](double r) { return -2.0 * std::sin(2.0 * r); };
    auto ggpp = [](double r) { return -4.0 * std::cos(2.0 * r); };
    auto w = [](double r) { return r * std::exp(r); };
    auto wp = [](double r) { return (1.0 + r) * std::exp(r); };
    auto wpp = [](double r) { return (2.0 + r) * std::exp(r); };

    SUBCASE("three component block: operator, exterior derivative, divergence") {
        RadialOperator op(geom, ModeBlock{BlockKind::coupled3, 1, qt * qt, 1},
                          OperatorForm::shifted);
        auto u = make_field<cplx>(g, 1, [&](const double* x, const int* I) {
            double r = x[0];
            cplx amp = I[0] == 0 ? cplx(f(r)) : I[0] == 1 ? cplx(gg(r)) : cplx(0.0, w(r));
            return amp * psi(x);
        });

        auto Lu = op_rough_shifted(u);
        auto expected_L = make_field<cplx>(g, 1, [&](const double* x, const int* I) {
            double r = x[0];
            Eigen::VectorXcd v(3), dv(3), ddv(3);
            v << f(r), gg(r), w(r);
            dv << fp(r), ggp(r), wp(r);
            ddv << fpp(r), ggpp(r), wpp(r);
            Eigen::VectorXcd A = op.apply_pointwise(r, v, dv, ddv);
            cplx unit = I[0] == 2 ? cplx(0.0, 1.0) : cplx(1.0);
            return unit * A(I[0]) * psi(x);
        });
        expected_L.margin = Lu.margin;
        auto diff_L = field_lin(cplx(1.0), Lu, cplx(-1.0), expected_L);
        double scale_L = core_max(expected_L);
        CHECK(scale_L > 1.0);
        CHECK(core_max(diff_L) / scale_L < 2e-2);

        auto du = op_d(u);
        auto expected_d = make_field<cplx>(g, 2, [&](const double* x, const int* I) {
            double r = x[0], sh = std::sinh(r), ch = std::cosh(r);
            cplx a = ggp(r) + (ch / sh) * gg(r) - cplx(0.0, pb) * f(r) / sh;
            cplx b = wp(r) + (sh / ch) * w(r) - qt * f(r) / ch;
            cplx c = cplx(0.0, pb) * w(r) / sh - qt * gg(r) / ch;
            int lo = std::min(I[0], I[1]), hi = std::max(I[0], I[1]);
            cplx val(0.0);
            if (lo == 0 && hi == 1) val = a;
            if (lo == 0 && hi == 2) val = cplx(0.0, 1.0) * b;
            if (lo == 1 && hi == 2) val = cplx(0.0, 1.0) * c;
            if (I[0] > I[1]) val = -val;
            return val * psi(x);
        });
        expected_d.margin = du.margin;
        auto diff_d = field_lin(cplx(1.0), du, cplx(-1.0), expected_d);
        CHECK(core_max(expected_d) > 0.5);
        CHECK(core_max(diff_d) / core_max(expected_d) < 2e-2);

        auto divu = op_delta(u);
        auto expected_div = make_field<cplx>(g, 0, [&](const double* x, const int*) {
            double r = x[0];
            cplx inner = fp(r) + geom.P(r) * f(r) +
                         cplx(0.0, pb) * gg(r) / std::sinh(r) - qt * w(r) / std::cosh(r);
            return -inner * psi(x);
        });
        expected_div.margin = divu.margin;
        auto diff_div = field_lin(cplx(1.0), divu, cplx(-1.0), expected_div);
        CHECK(core_max(diff_div) / core_max(expected_div) < 2e-2);
    }

    SUBCASE("two component block stays closed under the operator") {
        RadialOperator op(geom, ModeBlock{BlockKind::coupled2, 1, 0.0, 1},
                          OperatorForm::shifted);
        auto psi0 = [&](const double* x) { return std::exp(cplx(0.0, pb * x[1])); };
        auto u = make_field<cplx>(g, 1, [&](const double* x, const int* I) {
            double r = x[0];
            if (I[0] == 2) return cplx(0.0);
            return cplx(I[0] == 0 ? f(r) : gg(r)) * psi0(x);
        });
        auto Lu = op_rough_shifted(u);
        auto expected_L = make_field<cplx>(g, 1, [&](const double* x, const int* I) {
            double r = x[0];
            if (I[0] == 2) return cplx(0.0);
            Eigen::VectorXcd v(2), dv(2), ddv(2);
            v << f(r), gg(r);
            dv << fp(r), ggp(r);
            ddv << fpp(r), ggpp(r);
            return op.apply_pointwise(r, v, dv, ddv)(I[0]) * psi0(x);
        });
        expected_L.margin = Lu.margin;
        auto diff = field_lin(cplx(1.0), Lu, cplx(-1.0), expected_L);
        CHECK(core_max(diff) / core_max(expected_L) < 2e-2);
    }

    SUBCASE("cross section block stays closed under the operator") {
        RadialOperator op(geom, ModeBlock{BlockKind::scalar, 1, 0.0, 1},
                          OperatorForm::shifted);
        auto psi0 = [&](const double* x) { return std::exp(cplx(0.0, geom.beta * x[1])); };
        auto u = make_field<cplx>(g, 1, [&](const double* x, const int* I) {
            if (I[0] != 2) return cplx(0.0);
            return cplx(0.0, w(x[0])) * psi0(x);
        });
        auto Lu = op_rough_shifted(u);
        auto expected_L = make_field<cplx>(g, 1, [&](const double* x, const int* I) {
            if (I[0] != 2) return cplx(0.0);
            double r = x[0];
            Eigen::VectorXcd v(1), dv(1), ddv(1);
            v << w(r);
            dv << wp(r);
            ddv << wpp(r);
            return cplx(0.0, 1.0) * op.apply_pointwise(r, v, dv, ddv)(0) * psi0(x);
        });
        expected_L.margin = Lu.margin;
        auto diff = field_lin(cplx(1.0), Lu, cplx(-1.0), expected_L);
        CHECK(core_max(diff) / core_max(expected_L) < 2e-2);

        auto du = op_d(u);
        auto expected_d = make_field<cplx>(g, 2, [&](const double* x, const int* I) {
            double r = x[0];
            cplx b = wp(r) + std::tanh(r) * w(r);
            cplx c = cplx(0.0, geom.beta) * w(r) / std::sinh(r);
            int lo = std::min(I[0], I[1]), hi = std::max(I[0], I[1]);
            cplx val(0.0);
            if (lo == 0 && hi == 2) val = cplx(0.0, 1.0) * b;
            if (lo == 1 && hi == 2) val = cplx(0.0, 1.0) * c;
            if (I[0] > I[1]) val = -val;
            return val * psi0(x);
        });
        expected_d.margin = du.margin;
        auto diff_d = field_lin(cplx(1.0), du, cplx(-1.0), expected_d);
        CHECK(core_max(diff_d) / core_max(expected_d) < 2e-2);

        auto divu = op_delta(u);
        CHECK(core_max(divu) / core_max(op_nabla(u)) < 2e-2);  // coclosed family
    }
}

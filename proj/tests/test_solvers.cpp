#include <cmath>
#include <stdexcept>
#include <vector>

#include "cosim/analysis.hpp"
#include "cosim/solvers.hpp"
#include "doctest.h"

using namespace cosim;

namespace {

const Rhs decay = [](double, const Vec& x) { return Vec{-x[0]}; };

const Rhs oscillator = [](double, const Vec& x) { return Vec{x[1], -x[0]}; };

}  // namespace

TEST_CASE("fixed RK4 shows fourth-order convergence on exponential decay") {
    std::vector<double> hs = {0.1, 0.05, 0.025, 0.0125};
    std::vector<double> errs;
    for (double h : hs) {
        IntegratorConfig cfg;
        cfg.method = IntegratorMethod::FixedRK4;
        cfg.initial_step = h;
        const auto res = integrate(decay, Vec{1.0}, 0.0, 1.0, cfg);
        errs.push_back(std::abs(res.x_end[0] - std::exp(-1.0)));
    }
    const double slope = fit_order(hs, errs);
    CHECK(slope == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("adaptive RK54 keeps the oscillator endpoint error near the tolerance") {
    for (double tol : {1e-8, 1e-10, 1e-12}) {
        IntegratorConfig cfg;
        cfg.abs_tol = tol;
        const auto res = integrate(oscillator, Vec{1.0, 0.0}, 0.0, 20.0, cfg);
        const double err = std::hypot(res.x_end[0] - std::cos(20.0), res.x_end[1] + std::sin(20.0));
        CHECK(err < 100.0 * tol);
    }
}

TEST_CASE("implicit trapezoidal is stable on a stiff decay far beyond the explicit limit") {
    IntegratorConfig cfg;
    cfg.method = IntegratorMethod::ImplicitTrapezoidal;
    cfg.initial_step = 0.1;
    const Rhs stiff = [](double, const Vec& x) { return Vec{-1e6 * x[0]}; };
    const auto res = integrate(stiff, Vec{1.0}, 0.0, 1.0, cfg);
    const auto& dense = res.dense;
    double prev = 1.0;
    for (std::size_t i = 1; i < dense.breakpoints().size(); ++i) {
        const double cur = std::abs(dense.node_state(i)[0]);
        CHECK(cur <= prev + 1e-15);
        prev = cur;
    }
    CHECK(std::abs(res.x_end[0]) < 1.0);
}

TEST_CASE("dense output reproduces the accepted grid states bit-exactly") {
    const auto res = integrate(oscillator, Vec{1.0, 0.0}, 0.0, 5.0);
    const auto& bp = res.dense.breakpoints();
    REQUIRE(bp.size() >= 3);
    for (std::size_t i = 0; i < bp.size(); ++i) {
        const Vec at = res.dense.eval(bp[i]);
        const Vec& node = res.dense.node_state(i);
        CHECK(at[0] == node[0]);
        CHECK(at[1] == node[1]);
    }
    const Vec at_end = res.dense.eval(5.0);
    CHECK(at_end[0] == res.x_end[0]);
    CHECK(at_end[1] == res.x_end[1]);
}

TEST_CASE("dense output of a constant solution is that constant everywhere") {
    const Rhs zero = [](double, const Vec& x) { return Vec(x.size(), 0.0); };
    const auto res = integrate(zero, Vec{3.25}, 0.0, 2.0);
    for (double t : {0.0, 0.3, 0.777, 1.5, 2.0}) {
        CHECK(res.dense.eval(t)[0] == 3.25);
    }
}

TEST_CASE("dense output tracks the analytic decay between grid points") {
    const auto res = integrate(decay, Vec{1.0}, 0.0, 1.0);
    CHECK(res.dense.eval(0.5)[0] == doctest::Approx(std::exp(-0.5)).epsilon(1e-8));
}

TEST_CASE("dense evaluation outside the covered span is rejected") {
    const auto res = integrate(decay, Vec{1.0}, 0.0, 1.0);
    CHECK_THROWS_AS((void)res.dense.eval(-0.1), std::out_of_range);
    CHECK_THROWS_AS((void)res.dense.eval(1.1), std::out_of_range);
}

TEST_CASE("fixed-step methods require a positive step") {
    IntegratorConfig cfg;
    cfg.method = IntegratorMethod::FixedRK4;
    CHECK_THROWS_AS((void)integrate(decay, Vec{1.0}, 0.0, 1.0, cfg), std::invalid_argument);
    cfg.method = IntegratorMethod::ImplicitTrapezoidal;
    CHECK_THROWS_AS((void)integrate(decay, Vec{1.0}, 0.0, 1.0, cfg), std::invalid_argument);
}

TEST_CASE("integrate validates its time span and state") {
    CHECK_THROWS_AS((void)integrate(decay, Vec{1.0}, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS((void)integrate(decay, Vec{}, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("a finite-time blow-up aborts with the reached time reported") {
    const Rhs quad = [](double, const Vec& x) { return Vec{x[0] * x[0]}; };
    IntegratorConfig cfg;
    cfg.abs_tol = 1e-6;
    try {
        (void)integrate(quad, Vec{1.0}, 0.0, 1.5, cfg);
        FAIL("expected IntegrationError");
    } catch (const IntegrationError& e) {
        CHECK(e.t_reached > 0.5);
        CHECK(e.t_reached <= 1.05);
    }
}

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "cosim/analysis.hpp"
#include "cosim/extrapolation.hpp"
#include "doctest.h"

using namespace cosim;

namespace {

SampleHistory sine_history(double t_newest, double step, bool with_rates) {
    SampleHistory h(1);
    for (double t : {t_newest - step, t_newest}) {
        Vec v{std::sin(t)};
        Vec d = with_rates ? Vec{std::cos(t)} : Vec{};
        h.push(t, v, d);
    }
    return h;
}

}  // namespace

TEST_CASE("constant hold repeats the newest sample") {
    SampleHistory h(2);
    h.push(0.0, Vec{1.0, -2.0});
    h.push(0.5, Vec{3.0, 4.0});
    const Extrapolant e = build_constant(h);
    CHECK(e.degree == 0);
    CHECK(e.eval_component(0.5, 0) == 3.0);
    CHECK(e.eval_component(0.9, 0) == 3.0);
    CHECK(e.eval_component(0.9, 1) == 4.0);
}

TEST_CASE("secant hold reproduces a linear signal exactly") {
    SampleHistory h(1);
    h.push(0.0, Vec{1.0});
    h.push(0.5, Vec{2.0});  // u(t) = 1 + 2t
    const Extrapolant e = build_linear(h);
    CHECK(e.degree == 1);
    CHECK(e.eval_component(0.5, 0) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(e.eval_component(1.0, 0) == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("derivative-based hold uses the sampled rate, not the secant") {
    SampleHistory h(1);
    h.push(0.0, Vec{0.0}, Vec{0.0});
    h.push(1.0, Vec{5.0}, Vec{-1.0});
    const Extrapolant e = build_hermite_linear(h);
    CHECK(e.eval_component(1.0, 0) == doctest::Approx(5.0));
    CHECK(e.eval_component(2.0, 0) == doctest::Approx(4.0));  // slope -1, not the secant's +5
}

TEST_CASE("derivative-based hold falls back to the secant without rate data") {
    SampleHistory h(1);
    h.push(0.0, Vec{1.0});
    h.push(0.5, Vec{2.0});
    const Extrapolant e = build_hermite_linear(h);
    CHECK(e.eval_component(1.0, 0) == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("single-sample histories: secant refuses, rate-based hold still works") {
    SampleHistory h(1);
    h.push(0.0, Vec{7.0}, Vec{1.0});
    CHECK_THROWS_AS((void)build_linear(h), std::invalid_argument);
    CHECK(build_hermite_linear(h).eval_component(3.0, 0) == 10.0);  // slope from the rate
    SampleHistory bare(1);
    bare.push(0.0, Vec{7.0});
    CHECK(build_hermite_linear(bare).eval_component(3.0, 0) == 7.0);  // no data, constant
}

TEST_CASE("hold error of a smooth signal shrinks at first resp. second order") {
    // Forward error of the hold built at t = 1 measured half a step ahead.
    std::vector<double> hs = {0.2, 0.1, 0.05, 0.025};
    std::vector<double> err0, err1, err1h;
    for (double H : hs) {
        const double t_probe = 1.0 + 0.5 * H;
        {
            const auto e = build_constant(sine_history(1.0, H, false));
            err0.push_back(std::abs(e.eval_component(t_probe, 0) - std::sin(t_probe)));
        }
        {
            const auto e = build_linear(sine_history(1.0, H, false));
            err1.push_back(std::abs(e.eval_component(t_probe, 0) - std::sin(t_probe)));
        }
        {
            const auto e = build_hermite_linear(sine_history(1.0, H, true));
            err1h.push_back(std::abs(e.eval_component(t_probe, 0) - std::sin(t_probe)));
        }
    }
    CHECK(fit_order(hs, err0) == doctest::Approx(1.0).epsilon(0.1));
    CHECK(fit_order(hs, err1) == doctest::Approx(2.0).epsilon(0.1));
    CHECK(fit_order(hs, err1h) == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("refeed bump is a unit-integral triangle vanishing at the ends") {
    const HatShape s = refeed_shape(2.0, 2.5);
    CHECK(s(2.0) == 0.0);
    CHECK(s(2.5) == 0.0);
    CHECK(s(2.25) == doctest::Approx(4.0));  // peak 2/H with H = 0.5
    CHECK(s.integral(2.0, 2.5) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(s.integral(2.0, 2.25) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(s.integral(1.0, 4.0) == doctest::Approx(1.0).epsilon(1e-14));  // clipped to support
    const double mid_quad = quadrature_gl8([&](double t) { return s(t); }, {2.0, 2.25, 2.5});
    CHECK(mid_quad == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("attaching a correction shifts the interval integral by exactly that amount") {
    SampleHistory h(1);
    h.push(0.0, Vec{1.0});
    h.push(0.2, Vec{1.5});
    Extrapolant e = build_linear(h);
    const double before = quadrature_gl8([&](double t) { return e.eval_component(t, 0); }, 0.2, 0.4);
    const Extrapolant c = with_correction(e, Vec{0.125}, refeed_shape(0.2, 0.4));
    const double after =
        quadrature_gl8([&](double t) { return c.eval_component(t, 0); }, {0.2, 0.3, 0.4});
    CHECK(after - before == doctest::Approx(0.125).epsilon(1e-12));
}

TEST_CASE("eight-node Gauss quadrature integrates high-degree polynomials exactly") {
    const auto poly = [](double t) {
        double p = 1.0;
        for (int k = 0; k < 15; ++k) p *= t;
        return p;  // t^15
    };
    CHECK(quadrature_gl8(poly, 0.0, 1.0) == doctest::Approx(1.0 / 16.0).epsilon(1e-14));
    CHECK(quadrature_gl8([](double t) { return std::sin(t); }, 0.0, 3.14) ==
          doctest::Approx(1.0 - std::cos(3.14)).epsilon(1e-12));
}

TEST_CASE("interval defect of a quadratic signal against a linear hold") {
    // actual u(t) = t^2 versus the hold -t on [0, 1]: defect 1/3 + 1/2.
    Extrapolant used;
    used.anchor = 0.0;
    used.degree = 1;
    used.c0 = Vec{0.0};
    used.c1 = Vec{-1.0};
    const auto actual = [](double t) { return Vec{t * t}; };
    const Vec d = balance_error(actual, used, 0.0, 1.0);
    CHECK(d[0] == doctest::Approx(5.0 / 6.0).epsilon(1e-14));
}

TEST_CASE("interval defect vanishes when the hold matches the signal") {
    SampleHistory h(1);
    h.push(-0.3, Vec{1.0 - 3 * 0.3});
    h.push(0.0, Vec{1.0});
    const Extrapolant e = build_linear(h);
    const auto actual = [&](double t) { return Vec{1.0 + 3.0 * t}; };
    const Vec d = balance_error(actual, e, 0.0, 0.7, {0.0, 0.2, 0.7});
    CHECK(std::abs(d[0]) < 1e-14);
}

TEST_CASE("interval defect is additive in the signal and antisymmetric under swap") {
    Extrapolant zero_hold;
    zero_hold.c0 = Vec{0.0};
    const auto f = [](double t) { return Vec{std::exp(t)}; };
    const auto g = [](double t) { return Vec{t * t * t}; };
    const auto fg = [&](double t) { return Vec{f(t)[0] + g(t)[0]}; };
    const Vec df = balance_error(f, zero_hold, 0.0, 1.0);
    const Vec dg = balance_error(g, zero_hold, 0.0, 1.0);
    const Vec dfg = balance_error(fg, zero_hold, 0.0, 1.0);
    CHECK(dfg[0] == doctest::Approx(df[0] + dg[0]).epsilon(1e-13));

    // Swapping the roles of signal and hold negates the defect.
    SampleHistory ha(1);
    ha.push(0.0, Vec{2.0});
    const Extrapolant hold_a = build_constant(ha);  // holds the value 2
    const auto signal_a = [](double) { return Vec{2.0}; };
    SampleHistory hb(1);
    hb.push(-1.0, Vec{-3.0});
    hb.push(0.0, Vec{0.0});
    const Extrapolant hold_b = build_linear(hb);  // reproduces 3t
    const auto signal_b = [](double t) { return Vec{3.0 * t}; };
    const Vec ab = balance_error(signal_a, hold_b, 0.0, 1.0);
    const Vec ba = balance_error(signal_b, hold_a, 0.0, 1.0);
    CHECK(ab[0] == doctest::Approx(2.0 - 1.5).epsilon(1e-13));
    CHECK(ba[0] == doctest::Approx(-ab[0]).epsilon(1e-13));
}

TEST_CASE("constant hold of a ramp leaves the textbook half-step-squared defect") {
    // u(t) = u0 + s*t held at u(t0): defect over [t0, t0+H] is s*H^2/2.
    const double s = 3.0, H = 0.2, t0 = 1.4;
    SampleHistory h(1);
    h.push(t0, Vec{5.0 + s * t0});
    const Extrapolant e = build_constant(h);
    const auto actual = [&](double t) { return Vec{5.0 + s * t}; };
    const Vec d = balance_error(actual, e, t0, t0 + H);
    CHECK(d[0] == doctest::Approx(s * H * H / 2.0).epsilon(1e-13));
}

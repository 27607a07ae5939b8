#include <cmath>
#include <cstring>
#include <stdexcept>
#include <vector>

#include "cosim/analysis.hpp"
#include "cosim/models.hpp"
#include "doctest.h"

using namespace cosim;

namespace {

// Minimal hand-built trace: one interval, prescribed endpoint sample.
SimulationTrace stub_trace(Vec end_state) {
    SimulationTrace t;
    t.exchange_times = {0.0, 1.0};
    t.sample_times = {0.0, 1.0};
    t.sample_states = {Vec(end_state.size(), 0.0), std::move(end_state)};
    return t;
}

SimulationTrace oscillator_run(Scheme scheme, double H, double t_end, int degree = 0) {
    const CoupledSystem sys = make_spring_mass(SpringMassModel{});
    MasterConfig cfg;
    cfg.scheme = scheme;
    cfg.extrap_degree = degree;
    cfg.H = H;
    cfg.t_end = t_end;
    return run_master(sys.blocks, sys.connections, sys.x0, cfg, sys.energy);
}

}  // namespace

TEST_CASE("order fit recovers exact power laws to high precision") {
    const std::vector<double> hs = {0.2, 0.1, 0.05, 0.025};
    std::vector<double> quad, lin;
    for (double h : hs) {
        quad.push_back(h * h);
        lin.push_back(3.0 * h);
    }
    CHECK(std::abs(fit_order(hs, quad) - 2.0) < 1e-10);
    CHECK(std::abs(fit_order(hs, lin) - 1.0) < 1e-10);
}

TEST_CASE("order fit rejects degenerate inputs") {
    CHECK_THROWS_AS((void)fit_order({0.1, 0.05}, {1e-3, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS((void)fit_order({0.1, 0.05}, {1e-3, -1e-4}), std::invalid_argument);
    CHECK_THROWS_AS((void)fit_order({0.1}, {1e-3}), std::invalid_argument);
    CHECK_THROWS_AS((void)fit_order({0.1, 0.1}, {1e-3, 1e-3}), std::invalid_argument);
}

TEST_CASE("endpoint error is the Euclidean distance at the final time") {
    const auto ref = [](double) { return Vec{1.0, -2.0}; };
    CHECK(endpoint_error(stub_trace(Vec{1.0, -2.0}), ref) == 0.0);
    CHECK(endpoint_error(stub_trace(Vec{1.0 + 3e-4, -2.0}), ref) == doctest::Approx(3e-4));
    CHECK(endpoint_error(stub_trace(Vec{1.0 + 3e-4, -2.0 - 4e-4}), ref) ==
          doctest::Approx(5e-4).epsilon(1e-12));

    // triangle inequality among three synthetic endpoints
    const Vec a{0.3, 0.4}, b{-0.1, 0.9}, c{1.0, -1.0};
    const auto dist = [&](const Vec& x, const Vec& y) {
        return std::hypot(x[0] - y[0], x[1] - y[1]);
    };
    const auto ref_b = [&](double) { return b; };
    const auto ref_c = [&](double) { return c; };
    const double ab = endpoint_error(stub_trace(a), ref_b);
    const double bc = endpoint_error(stub_trace(b), ref_c);
    const double ac = endpoint_error(stub_trace(a), ref_c);
    CHECK(ab == doctest::Approx(dist(a, b)));
    CHECK(ac <= ab + bc + 1e-15);
}

TEST_CASE("convergence cells give identical results run concurrently or one by one") {
    const SpringMassModel m;
    const std::vector<double> hs = {0.2, 0.1, 0.05, 0.025};
    const auto cell = [&](double H) { return oscillator_run(Scheme::Plain, H, 4.0); };
    const auto ref = [&](double t) { return spring_mass_state(m, t); };
    const ConvergenceStudy par = convergence_study(hs, cell, ref, true);
    const ConvergenceStudy seq = convergence_study(hs, cell, ref, false);
    REQUIRE(par.errors.size() == seq.errors.size());
    for (std::size_t i = 0; i < par.errors.size(); ++i) {
        CHECK(std::memcmp(&par.errors[i], &seq.errors[i], sizeof(double)) == 0);
        CHECK(par.component_errors[i].size() == 2);
    }
    CHECK(par.slope == seq.slope);
    CHECK(par.slope > 0.5);  // the held-input scheme converges at first order
    CHECK(par.slope < 1.6);
}

TEST_CASE("the energy report of a conservative reference stays flat") {
    // A single uncoupled block integrating the whole oscillator tightly.
    const CoupledSystem whole = make_spring_mass(SpringMassModel{});
    SubsystemBlock block;
    block.name = "whole";
    block.state_dim = 2;
    block.rhs = [rhs = whole.monolithic_rhs](double t, const Vec& x, const Vec&) {
        return rhs(t, x);
    };
    MasterConfig cfg;
    cfg.H = 0.5;
    cfg.t_end = 20.0;
    const SimulationTrace trace = run_master({block}, {}, whole.x0, cfg, whole.energy);
    const EnergyReport rep = energy_drift(trace, whole.energy);
    CHECK(rep.initial_energy == doctest::Approx(0.5));
    CHECK(rep.relative_drift <= 1e-8);
    CHECK(rep.interval_production.size() == trace.intervals());
    for (char f : rep.interval_has_span) CHECK(f == 0);
    CHECK(rep.abs_production_in_spans == 0.0);
}

TEST_CASE("interval productions telescope to the total energy change") {
    const SimulationTrace trace = oscillator_run(Scheme::Plain, 0.2, 10.0);
    const CoupledSystem sys = make_spring_mass(SpringMassModel{});
    const EnergyReport rep = energy_drift(trace, sys.energy);
    double sum = 0.0;
    for (double p : rep.interval_production) sum += p;
    CHECK(sum == doctest::Approx(rep.final_energy - rep.initial_energy).epsilon(1e-12));
    CHECK(rep.relative_drift >= 0.0);

    double total = 0.0, in_spans = 0.0, max_outside = 0.0;
    for (std::size_t k = 0; k < rep.interval_production.size(); ++k) {
        const double p = std::abs(rep.interval_production[k]);
        total += p;
        if (rep.interval_has_span[k])
            in_spans += p;
        else
            max_outside = std::max(max_outside, p);
    }
    CHECK(rep.abs_production_total == doctest::Approx(total).epsilon(1e-15));
    CHECK(rep.abs_production_in_spans == doctest::Approx(in_spans).epsilon(1e-15));
    CHECK(rep.max_abs_production_outside_spans == doctest::Approx(max_outside).epsilon(1e-15));
}

TEST_CASE("span flags land on the intervals that contain the logged spans") {
    const SimulationTrace trace = oscillator_run(Scheme::PowerNegotiated, 0.2, 6.0, 1);
    REQUIRE(!trace.spans.empty());
    const CoupledSystem sys = make_spring_mass(SpringMassModel{});
    const EnergyReport rep = energy_drift(trace, sys.energy);
    CHECK(rep.interval_has_span[0] == 1);  // the startup freeze is logged
    for (const SingularSpan& s : trace.spans) {
        bool covered = false;
        for (std::size_t k = 0; k < rep.interval_production.size(); ++k) {
            if (!rep.interval_has_span[k]) continue;
            if (s.t_begin <= rep.times[k + 1] && s.t_end >= rep.times[k]) covered = true;
        }
        CHECK(covered);
    }
}

TEST_CASE("balance table mirrors the trace and tracks the largest defect per signal") {
    const SimulationTrace trace = oscillator_run(Scheme::BalanceCorrected, 0.2, 3.0);
    const BalanceTable tab = interval_balance_report(trace);
    REQUIRE(tab.signals.size() == 2);
    REQUIRE(tab.defect.size() == trace.intervals());
    REQUIRE(tab.refed.size() == trace.intervals());
    for (std::size_t s = 0; s < tab.signals.size(); ++s) {
        double m = 0.0;
        for (const Vec& row : tab.defect) m = std::max(m, std::abs(row[s]));
        CHECK(tab.max_abs_defect[s] == m);
        CHECK(m > 0.0);
    }
}

TEST_CASE("energy drift demands an energy functional and a run") {
    const SimulationTrace trace = oscillator_run(Scheme::Plain, 0.2, 1.0);
    CHECK_THROWS_AS((void)energy_drift(trace, {}), std::invalid_argument);
}

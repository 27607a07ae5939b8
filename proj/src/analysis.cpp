#include "cosim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <stdexcept>

namespace cosim {

double endpoint_error(const SimulationTrace& trace, const std::function<Vec(double)>& reference) {
    if (trace.sample_states.empty()) throw std::invalid_argument("endpoint_error: empty trace");
    const double t_end = trace.exchange_times.back();
    const Vec ref = reference(t_end);
    const Vec& got = trace.sample_states.back();
    if (ref.size() != got.size())
        throw std::invalid_argument("endpoint_error: reference dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        const double d = got[i] - ref[i];
        s += d * d;
    }
    return std::sqrt(s);
}

double fit_order(const std::vector<double>& H_values, const std::vector<double>& errors) {
    if (H_values.size() != errors.size() || H_values.size() < 2)
        throw std::invalid_argument("fit_order: need matching lists with at least two entries");
    const std::size_t n = H_values.size();
    double mx = 0.0, my = 0.0;
    std::vector<double> lx(n), ly(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(H_values[i] > 0.0) || !(errors[i] > 0.0))
            throw std::invalid_argument("fit_order: H values and errors must be positive");
        lx[i] = std::log(H_values[i]);
        ly[i] = std::log(errors[i]);
        mx += lx[i];
        my += ly[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        num += (lx[i] - mx) * (ly[i] - my);
        den += (lx[i] - mx) * (lx[i] - mx);
    }
    if (den == 0.0) throw std::invalid_argument("fit_order: H values must differ");
    return num / den;
}

ConvergenceStudy convergence_study(const std::vector<double>& H_values,
                                   const std::function<SimulationTrace(double)>& run_cell,
                                   const std::function<Vec(double)>& reference, bool parallel) {
    if (H_values.empty()) throw std::invalid_argument("convergence_study: no H values");
    ConvergenceStudy st;
    st.H_values = H_values;
    st.errors.resize(H_values.size());
    st.component_errors.resize(H_values.size());

    auto cell = [&](std::size_t i) {
        const SimulationTrace trace = run_cell(H_values[i]);
        const double t_end = trace.exchange_times.back();
        const Vec ref = reference(t_end);
        const Vec& got = trace.sample_states.back();
        Vec comp(ref.size());
        for (std::size_t j = 0; j < ref.size(); ++j) comp[j] = std::abs(got[j] - ref[j]);
        return std::make_pair(endpoint_error(trace, reference), std::move(comp));
    };

    if (parallel && H_values.size() > 1) {
        std::vector<std::future<std::pair<double, Vec>>> futs;
        futs.reserve(H_values.size());
        for (std::size_t i = 0; i < H_values.size(); ++i)
            futs.push_back(std::async(std::launch::async, cell, i));
        for (std::size_t i = 0; i < H_values.size(); ++i) {
            auto [err, comp] = futs[i].get();
            st.errors[i] = err;
            st.component_errors[i] = std::move(comp);
        }
    } else {
        for (std::size_t i = 0; i < H_values.size(); ++i) {
            auto [err, comp] = cell(i);
            st.errors[i] = err;
            st.component_errors[i] = std::move(comp);
        }
    }
    st.slope = fit_order(st.H_values, st.errors);
    return st;
}

EnergyReport energy_drift(const SimulationTrace& trace,
                          const std::function<double(const Vec&)>& energy) {
    if (!energy) throw std::invalid_argument("energy_drift: no energy functional");
    if (trace.exchange_states.size() < 2)
        throw std::invalid_argument("energy_drift: trace has no intervals");

    EnergyReport rep;
    rep.times = trace.exchange_times;
    rep.energy.reserve(trace.exchange_states.size());
    for (const Vec& x : trace.exchange_states) rep.energy.push_back(energy(x));
    rep.initial_energy = rep.energy.front();
    rep.final_energy = rep.energy.back();

    const double e0 = rep.initial_energy;
    const double denom = std::abs(e0) > 1e-300 ? std::abs(e0) : 1.0;
    for (double e : rep.energy)
        rep.relative_drift = std::max(rep.relative_drift, std::abs(e - e0) / denom);

    const std::size_t n = trace.intervals();
    rep.interval_production.resize(n);
    rep.interval_has_span.assign(n, 0);
    for (std::size_t k = 0; k < n; ++k)
        rep.interval_production[k] = rep.energy[k + 1] - rep.energy[k];
    for (const auto& span : trace.spans) {
        for (std::size_t k = 0; k < n; ++k) {
            const double a = trace.exchange_times[k], b = trace.exchange_times[k + 1];
            if (span.t_end >= a && span.t_begin <= b) rep.interval_has_span[k] = 1;
        }
    }
    for (std::size_t k = 0; k < n; ++k) {
        const double p = std::abs(rep.interval_production[k]);
        rep.abs_production_total += p;
        if (rep.interval_has_span[k])
            rep.abs_production_in_spans += p;
        else
            rep.max_abs_production_outside_spans =
                std::max(rep.max_abs_production_outside_spans, p);
    }
    return rep;
}

BalanceTable interval_balance_report(const SimulationTrace& trace) {
    BalanceTable tab;
    tab.signals = trace.tracked_signals;
    tab.defect = trace.balance_errors;
    tab.refed = trace.refed_amounts;
    tab.max_abs_defect.assign(tab.signals.size(), 0.0);
    for (const Vec& row : tab.defect)
        for (std::size_t s = 0; s < row.size() && s < tab.max_abs_defect.size(); ++s)
            tab.max_abs_defect[s] = std::max(tab.max_abs_defect[s], std::abs(row[s]));
    return tab;
}

}  // namespace cosim

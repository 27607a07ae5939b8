#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "cosim/coupling.hpp"

namespace cosim {

/// Euclidean distance between the simulated endpoint state and reference(t_end).
double endpoint_error(const SimulationTrace& trace, const std::function<Vec(double)>& reference);

/// Least-squares slope of log(error) against log(H).
double fit_order(const std::vector<double>& H_values, const std::vector<double>& errors);

struct ConvergenceStudy {
    std::vector<double> H_values;
    std::vector<double> errors;               // endpoint norm per H
    std::vector<Vec> component_errors;        // per H: absolute endpoint error per state component
    double slope = 0.0;
};

/// Runs one cell per H value (concurrently when asked to) and fits the
/// observed order of the endpoint error.
ConvergenceStudy convergence_study(const std::vector<double>& H_values,
                                   const std::function<SimulationTrace(double)>& run_cell,
                                   const std::function<Vec(double)>& reference,
                                   bool parallel = true);

struct EnergyReport {
    std::vector<double> times;   // exchange times
    std::vector<double> energy;  // energy at those times
    double initial_energy = 0.0;
    double final_energy = 0.0;
    /// max_k |E(T_k) - E(T_0)| relative to |E(T_0)| (absolute when E(T_0) ~ 0)
    double relative_drift = 0.0;
    std::vector<double> interval_production;  // E(T_k) - E(T_{k-1})
    std::vector<char> interval_has_span;      // interval intersects a logged guard span
    double abs_production_total = 0.0;
    double abs_production_in_spans = 0.0;
    double max_abs_production_outside_spans = 0.0;
};

EnergyReport energy_drift(const SimulationTrace& trace,
                          const std::function<double(const Vec&)>& energy);

struct BalanceTable {
    std::vector<std::pair<std::size_t, std::size_t>> signals;  // (block, input component)
    std::vector<Vec> defect;  // [interval][signal], integral of (actual - held) input
    std::vector<Vec> refed;   // [interval][signal], bump amounts fed back
    Vec max_abs_defect;       // per signal
};

BalanceTable interval_balance_report(const SimulationTrace& trace);

}  // namespace cosim

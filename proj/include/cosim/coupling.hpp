#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "cosim/extrapolation.hpp"
#include "cosim/solvers.hpp"

namespace cosim {

/// One independently integrated subsystem.  `rhs` and `output_map` receive the
/// subsystem state together with the current values of its coupling inputs.
/// The power members describe the energy flow through the block's coupling
/// boundary from the block's own point of view (positive = energy gained) and
/// are only needed by the power-negotiated scheme.
struct SubsystemBlock {
    std::string name;
    std::size_t state_dim = 0;
    std::size_t input_dim = 0;
    std::size_t output_dim = 0;

    std::function<Vec(double, const Vec&, const Vec&)> rhs;         // (t, x, u) -> dx/dt
    std::function<Vec(double, const Vec&, const Vec&)> output_map;  // (t, x, u) -> y

    /// Time derivative of each output, aligned with output_map; optional.
    std::function<Vec(double, const Vec&, const Vec&)> output_derivative_map;

    std::function<double(const Vec&, const Vec&)> power_map;              // (x, u)
    std::function<double(const Vec&, const Vec&, const Vec&)> power_rate_map;  // (x, u, du/dt)
    /// Solves power_map(x, u with component := v) == target for v.  The
    /// caller guarantees the sensitivity of power_map in that component is
    /// safely away from zero when this is invoked.
    std::function<double(double, const Vec&, const Vec&)> power_inverse;  // (target, x, u)
};

/// Routes output components of one block into input components of another.
struct Connection {
    std::size_t source = 0;
    std::size_t target = 0;
    std::vector<std::size_t> source_outputs;
    std::vector<std::size_t> target_inputs;

    bool power_coupled = false;
    /// Target input component that the power-negotiated scheme replaces by a
    /// value reconstructed from the negotiated boundary power.
    std::size_t replaced_input = kNone;

    static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
};

enum class Scheme { Plain, BalanceCorrected, PowerNegotiated };

struct MasterConfig {
    Scheme scheme = Scheme::Plain;
    int extrap_degree = 0;  ///< polynomial degree of the input hold, 0 or 1
    bool hermite = false;   ///< degree-1 hold from value + derivative instead of a secant
    double t0 = 0.0;
    double t_end = 20.0;
    double H = 0.2;  ///< exchange interval
    IntegratorConfig integrator;
    double inversion_eps = 1e-6;  ///< guard threshold on the power-map sensitivity
    double sample_dt = 0.0;       ///< output sampling step; <= 0 selects H / 10
    bool parallel_blocks = false;
};

/// Two power-coupled blocks negotiating one boundary; side a/b each replace
/// one of their own input components.
struct PowerPair {
    std::size_t block_a = 0, comp_a = 0;
    std::size_t block_b = 0, comp_b = 0;
};

/// Negotiated boundary power for the side whose own view is `own_view`:
/// the mean of the two views oriented so that the two sides' results are
/// exact negations of each other.
inline double negotiate_power(double own_view, double other_view) {
    return 0.5 * (own_view - other_view);
}

struct GuardState {
    double hold = 0.0;  ///< input value sampled at the exchange; used while frozen
    bool active = false;
};

/// Reconstructs the replaced input component at time t so the block's power
/// map meets `target`.  When the power-map sensitivity in that component
/// falls below eps, the component is held frozen at `guard.hold` instead.
/// The inversion resumes only once the sensitivity has recovered AND the
/// re-inverted value points the same way as the held one: the quotient flips
/// sign across the sensitivity's zero, and resuming on the wrong side would
/// drive the state straight back into the singular band (a chattering loop
/// no step controller can integrate through).  In a thin shell of
/// sensitivities just above eps the raw inversion is blended linearly toward
/// the held value, so the right-hand side the step controller sees hands over
/// continuously to the frozen branch instead of jumping by the 1/|d| growth
/// of the raw quotient.
/// `inputs` must carry the other components' current values; the chosen value
/// is written into `inputs[component]` and returned.
double invert_power(const SubsystemBlock& block, double target, const Vec& x, Vec& inputs,
                    std::size_t component, double eps, GuardState& guard,
                    std::size_t* guard_events = nullptr);

/// Input signal of one block over one exchange interval: a polynomial hold of
/// the sampled inputs, plus any components reconstructed from a negotiated
/// boundary power at evaluation time.
struct BlockInputProvider {
    struct PowerBinding {
        std::size_t component = 0;
        Extrapolant target;  // scalar extrapolant of the negotiated power
        double eps = 1e-6;
        GuardState guard;
        std::size_t pair = 0;  // index into the interval's power records
        bool side_a = true;
    };

    Extrapolant base;
    std::vector<PowerBinding> bindings;
    const SubsystemBlock* block = nullptr;
    std::size_t guard_events = 0;

    void eval_into(double t, const Vec& x, Vec& u);
    Vec eval(double t, const Vec& x);
};

/// Per-interval record of one negotiated boundary.
struct PowerRecord {
    std::size_t block_a = 0, block_b = 0;
    double raw_a = 0.0, raw_b = 0.0;    // the two sides' own views at exchange time
    double phat_a = 0.0, phat_b = 0.0;  // negotiated targets, phat_b == -phat_a
    double rate_a = 0.0, rate_b = 0.0;  // negotiated target slopes (degree 1 only)
    double anchor = 0.0;
};

/// Time range in which a power inversion ran against a near-zero sensitivity
/// and the guard held the reconstructed value frozen.
struct SingularSpan {
    std::size_t block = 0;
    std::size_t component = 0;
    std::size_t interval = 0;  // 1-based exchange interval
    double t_begin = 0.0;
    double t_end = 0.0;
};

struct SimulationTrace {
    std::vector<double> exchange_times;  // T_0 .. T_N
    std::vector<std::size_t> block_offset;
    std::size_t total_state_dim = 0;

    std::vector<std::vector<DenseSolution>> dense;  // [block][interval]
    std::vector<Vec> exchange_states;               // global state at each T_k

    std::vector<double> sample_times;
    std::vector<Vec> sample_states;
    std::vector<double> sample_energy;  // empty unless an energy functional was supplied
    bool has_energy = false;

    /// Input components tracked by the balance report, as (block, component).
    std::vector<std::pair<std::size_t, std::size_t>> tracked_signals;
    std::vector<Vec> balance_errors;  // [interval-1][signal]
    std::vector<Vec> refed_amounts;   // [interval-1][signal]

    std::vector<std::vector<PowerRecord>> power_records;  // [interval-1][pair]
    std::vector<SingularSpan> spans;
    std::vector<double> max_inversion_residual;  // [interval-1], checked outside spans
    std::size_t guard_events = 0;

    std::size_t intervals() const { return exchange_times.empty() ? 0 : exchange_times.size() - 1; }
    /// Assembles the global state at time t from the per-block interpolants.
    Vec state_at(double t) const;
    std::size_t interval_of(double t) const;
};

/// Builds the per-block input holds for one exchange interval from the sample
/// histories.  The first interval always uses a constant hold.
std::vector<Extrapolant> exchange_plain(const std::vector<SampleHistory>& histories,
                                        const MasterConfig& cfg, std::size_t interval_index);

/// Same holds as exchange_plain, each carrying the previous interval's
/// balance defect as a refeed bump over [t_begin, t_end].  `previous_defect`
/// holds one vector per block (empty for the first interval).
std::vector<Extrapolant> exchange_balance_corrected(const std::vector<SampleHistory>& histories,
                                                    const std::vector<Vec>& previous_defect,
                                                    double t_begin, double t_end,
                                                    const MasterConfig& cfg,
                                                    std::size_t interval_index);

/// Negotiates every power-coupled boundary from the two sides' freshly
/// sampled views and returns input providers whose replaced components are
/// reconstructed from the negotiated power at evaluation time.
std::vector<BlockInputProvider> exchange_power_negotiated(
    const std::vector<SubsystemBlock>& blocks, const std::vector<PowerPair>& pairs,
    const std::vector<SampleHistory>& histories, const std::vector<Vec>& states,
    const std::vector<Vec>& fresh_inputs, const std::vector<Vec>& fresh_input_rates,
    double t_begin, const MasterConfig& cfg, std::size_t interval_index,
    std::vector<PowerRecord>* records);

/// Validates that power-coupled connections pair up and extracts the pairs.
std::vector<PowerPair> find_power_pairs(const std::vector<SubsystemBlock>& blocks,
                                        const std::vector<Connection>& connections);

/// Runs the co-simulation master loop: holds every block's inputs fixed as an
/// extrapolated (or power-reconstructed) signal over each exchange interval,
/// integrates the blocks independently, then exchanges fresh samples at the
/// interval boundary.
SimulationTrace run_master(const std::vector<SubsystemBlock>& blocks,
                           const std::vector<Connection>& connections, const Vec& x0,
                           const MasterConfig& cfg,
                           const std::function<double(const Vec&)>& energy = {});

}  // namespace cosim

#include "cosim/coupling.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <future>
#include <limits>
#include <map>
#include <stdexcept>

namespace cosim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double probe_sensitivity(const SubsystemBlock& block, const Vec& x, Vec& u, std::size_t comp) {
    const double saved = u[comp];
    u[comp] = 0.0;
    const double p0 = block.power_map(x, u);
    u[comp] = 1.0;
    const double p1 = block.power_map(x, u);
    u[comp] = -1.0;
    const double pm1 = block.power_map(x, u);
    u[comp] = saved;
    const double d = p1 - p0;
    const double d_lo = p0 - pm1;
    if (d != 0.0 && d_lo != 0.0 && (d > 0.0) != (d_lo > 0.0))
        throw std::runtime_error("power map is not monotone in the replaced input component");
    return d;
}

/// Width of the hand-over shell around the frozen band, as a multiple of the
/// freeze threshold: inside |d| < kShellFactor * eps the raw inversion is
/// blended linearly toward the held value so the step controller never sees
/// the 1/|d| growth of the raw quotient as a jump against the frozen branch.
constexpr double kShellFactor = 1000.0;

double blend_weight(double d_abs, double eps) {
    const double shell = kShellFactor * eps;
    if (d_abs >= shell) return 1.0;
    return (d_abs - eps) / (shell - eps);
}

/// Maximal sub-ranges of [a, b] on which `deviates` holds (the realized
/// reconstruction differs from the raw inversion), located by a coarse scan
/// plus bisection of the denominator zero crossings the scan grid steps over.
std::vector<std::pair<double, double>> scan_sensitivity_spans(
    const std::function<double(double)>& denom, const std::function<bool(double)>& deviates,
    double a, double b, double eps) {
    constexpr int kGrid = 64;
    std::array<double, kGrid + 1> ts{}, dv{};
    std::array<bool, kGrid + 1> bad{};
    for (int i = 0; i <= kGrid; ++i) {
        ts[i] = a + (b - a) * static_cast<double>(i) / kGrid;
        dv[i] = denom(ts[i]);
        bad[i] = deviates(ts[i]);
    }
    auto below = [&](int i) { return bad[i]; };
    const auto& g_below = deviates;
    const double t_res = 1e-14 * std::max({1.0, std::abs(a), std::abs(b)});

    // [t_out, t_in] bracket with g false at t_out, true at t_in (or reversed)
    auto find_edge = [&](double t_out, double t_in) {
        for (int it = 0; it < 120 && std::abs(t_in - t_out) > t_res; ++it) {
            const double m = 0.5 * (t_out + t_in);
            (g_below(m) ? t_in : t_out) = m;
        }
        return 0.5 * (t_out + t_in);
    };

    std::vector<std::pair<double, double>> spans;
    int i = 0;
    while (i <= kGrid) {
        if (!below(i)) {
            ++i;
            continue;
        }
        int j = i;
        while (j + 1 <= kGrid && below(j + 1)) ++j;
        const double left = (i == 0) ? a : find_edge(ts[i - 1], ts[i]);
        const double right = (j == kGrid) ? b : find_edge(ts[j + 1], ts[j]);
        spans.emplace_back(left, right);
        i = j + 1;
    }

    // zero crossings the grid stepped over without sampling |d| < eps
    for (int s = 0; s < kGrid; ++s) {
        if (below(s) || below(s + 1)) continue;
        if ((dv[s] > 0.0) == (dv[s + 1] > 0.0)) continue;
        double lo = ts[s], hi = ts[s + 1];
        const bool pos_lo = dv[s] > 0.0;
        double inside = kNaN;
        for (int it = 0; it < 120; ++it) {
            const double m = 0.5 * (lo + hi);
            const double dm = denom(m);
            if (std::abs(dm) < eps) {
                inside = m;
                break;
            }
            ((dm > 0.0) == pos_lo ? lo : hi) = m;
        }
        if (!std::isfinite(inside)) inside = 0.5 * (lo + hi);
        spans.emplace_back(find_edge(ts[s], inside), find_edge(ts[s + 1], inside));
    }

    std::sort(spans.begin(), spans.end());
    std::vector<std::pair<double, double>> merged;
    for (const auto& sp : spans) {
        if (!merged.empty() && sp.first <= merged.back().second)
            merged.back().second = std::max(merged.back().second, sp.second);
        else
            merged.push_back(sp);
    }
    return merged;
}

}  // namespace

double invert_power(const SubsystemBlock& block, double target, const Vec& x, Vec& inputs,
                    std::size_t component, double eps, GuardState& guard,
                    std::size_t* guard_events) {
    const double d = probe_sensitivity(block, x, inputs, component);
    if (std::abs(d) < eps) {
        if (!guard.active) {
            guard.active = true;
            if (guard_events) ++*guard_events;
        }
        inputs[component] = guard.hold;
        return guard.hold;
    }
    const double v = block.power_inverse(target, x, inputs);
    if (guard.active) {
        // Resuming against the held direction would push the state straight
        // back into the singular band and the two sides would take turns
        // shoving it across forever; stay frozen until the re-inverted value
        // continues the motion the hold started.
        const bool same_way = v == 0.0 || guard.hold == 0.0 || (v > 0.0) == (guard.hold > 0.0);
        if (!same_way) {
            inputs[component] = guard.hold;
            return guard.hold;
        }
        guard.active = false;
    }
    const double w = blend_weight(std::abs(d), eps);
    const double used = w * v + (1.0 - w) * guard.hold;
    inputs[component] = used;
    return used;
}

void BlockInputProvider::eval_into(double t, const Vec& x, Vec& u) {
    base.eval_into(t, u);
    for (auto& b : bindings) {
        const double target = b.target.eval_component(t, 0);
        invert_power(*block, target, x, u, b.component, b.eps, b.guard, &guard_events);
    }
}

Vec BlockInputProvider::eval(double t, const Vec& x) {
    Vec u;
    eval_into(t, x, u);
    return u;
}

std::vector<Extrapolant> exchange_plain(const std::vector<SampleHistory>& histories,
                                        const MasterConfig& cfg, std::size_t interval_index) {
    std::vector<Extrapolant> out(histories.size());
    for (std::size_t b = 0; b < histories.size(); ++b) {
        const auto& h = histories[b];
        if (h.dim() == 0) continue;
        if (interval_index <= 1 || cfg.extrap_degree == 0)
            out[b] = build_constant(h);
        else if (cfg.hermite)
            out[b] = build_hermite_linear(h);
        else
            out[b] = build_linear(h);
        out[b].width = cfg.H;
    }
    return out;
}

std::vector<Extrapolant> exchange_balance_corrected(const std::vector<SampleHistory>& histories,
                                                    const std::vector<Vec>& previous_defect,
                                                    double t_begin, double t_end,
                                                    const MasterConfig& cfg,
                                                    std::size_t interval_index) {
    std::vector<Extrapolant> out = exchange_plain(histories, cfg, interval_index);
    if (interval_index <= 1) return out;
    const HatShape shape = refeed_shape(t_begin, t_end);
    for (std::size_t b = 0; b < out.size(); ++b) {
        if (out[b].dim() == 0 || b >= previous_defect.size() || previous_defect[b].empty())
            continue;
        out[b] = with_correction(std::move(out[b]), previous_defect[b], shape);
    }
    return out;
}

std::vector<PowerPair> find_power_pairs(const std::vector<SubsystemBlock>& blocks,
                                        const std::vector<Connection>& connections) {
    struct Side {
        std::size_t block, comp;
    };
    std::map<std::pair<std::size_t, std::size_t>, std::vector<Side>> grouped;
    for (const auto& c : connections) {
        if (!c.power_coupled) continue;
        if (c.replaced_input == Connection::kNone ||
            c.replaced_input >= blocks[c.target].input_dim)
            throw std::invalid_argument("power-coupled connection needs a valid replaced_input");
        const auto key = std::minmax(c.source, c.target);
        grouped[{key.first, key.second}].push_back(Side{c.target, c.replaced_input});
    }
    std::vector<PowerPair> pairs;
    for (auto& [key, sides] : grouped) {
        if (sides.size() != 2 || sides[0].block == sides[1].block)
            throw std::invalid_argument(
                "power-coupled connections must come in matched opposite-direction pairs");
        auto& lo = sides[0].block < sides[1].block ? sides[0] : sides[1];
        auto& hi = sides[0].block < sides[1].block ? sides[1] : sides[0];
        pairs.push_back(PowerPair{lo.block, lo.comp, hi.block, hi.comp});
    }
    return pairs;
}

std::vector<BlockInputProvider> exchange_power_negotiated(
    const std::vector<SubsystemBlock>& blocks, const std::vector<PowerPair>& pairs,
    const std::vector<SampleHistory>& histories, const std::vector<Vec>& states,
    const std::vector<Vec>& fresh_inputs, const std::vector<Vec>& fresh_input_rates,
    double t_begin, const MasterConfig& cfg, std::size_t interval_index,
    std::vector<PowerRecord>* records) {
    std::vector<Extrapolant> base = exchange_plain(histories, cfg, interval_index);
    std::vector<BlockInputProvider> providers(blocks.size());
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        providers[b].base = std::move(base[b]);
        providers[b].block = &blocks[b];
    }

    const int degree = interval_index <= 1 ? 0 : cfg.extrap_degree;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        const auto& pr = pairs[p];
        PowerRecord rec;
        rec.block_a = pr.block_a;
        rec.block_b = pr.block_b;
        rec.anchor = t_begin;
        rec.raw_a = blocks[pr.block_a].power_map(states[pr.block_a], fresh_inputs[pr.block_a]);
        rec.raw_b = blocks[pr.block_b].power_map(states[pr.block_b], fresh_inputs[pr.block_b]);
        rec.phat_a = negotiate_power(rec.raw_a, rec.raw_b);
        rec.phat_b = -rec.phat_a;
        if (degree >= 1) {
            const double dot_a = blocks[pr.block_a].power_rate_map(
                states[pr.block_a], fresh_inputs[pr.block_a], fresh_input_rates[pr.block_a]);
            const double dot_b = blocks[pr.block_b].power_rate_map(
                states[pr.block_b], fresh_inputs[pr.block_b], fresh_input_rates[pr.block_b]);
            if (!std::isfinite(dot_a) || !std::isfinite(dot_b))
                throw std::runtime_error(
                    "negotiating a power slope needs derivative outputs on both sides");
            rec.rate_a = negotiate_power(dot_a, dot_b);
            rec.rate_b = -rec.rate_a;
        }

        auto bind = [&](std::size_t block, std::size_t comp, double phat, double rate,
                        bool side_a) {
            BlockInputProvider::PowerBinding binding;
            binding.component = comp;
            binding.eps = cfg.inversion_eps;
            binding.pair = p;
            binding.side_a = side_a;
            binding.guard.hold = fresh_inputs[block][comp];
            binding.target.anchor = t_begin;
            binding.target.width = cfg.H;
            binding.target.degree = degree;
            binding.target.c0 = {phat};
            if (degree >= 1) binding.target.c1 = {rate};
            providers[block].bindings.push_back(std::move(binding));
        };
        bind(pr.block_a, pr.comp_a, rec.phat_a, rec.rate_a, true);
        bind(pr.block_b, pr.comp_b, rec.phat_b, rec.rate_b, false);
        if (records) records->push_back(rec);
    }
    return providers;
}

std::size_t SimulationTrace::interval_of(double t) const {
    if (exchange_times.size() < 2) throw std::logic_error("trace has no intervals");
    auto it = std::upper_bound(exchange_times.begin(), exchange_times.end(), t);
    std::size_t idx = static_cast<std::size_t>(it - exchange_times.begin());
    idx = idx == 0 ? 0 : idx - 1;
    return std::min(idx, exchange_times.size() - 2);
}

Vec SimulationTrace::state_at(double t) const {
    const std::size_t k = interval_of(t);
    Vec out(total_state_dim);
    Vec xb;
    for (std::size_t b = 0; b < dense.size(); ++b) {
        dense[b][k].eval_into(t, xb);
        std::copy(xb.begin(), xb.end(), out.begin() + static_cast<std::ptrdiff_t>(block_offset[b]));
    }
    return out;
}

namespace {

struct ExchangeScratch {
    std::vector<Vec> y, yd;  // outputs and their time derivatives
};

void compute_outputs(const std::vector<SubsystemBlock>& blocks, double t,
                     const std::vector<Vec>& xs, const std::vector<Vec>& us,
                     ExchangeScratch& sc) {
    sc.y.resize(blocks.size());
    sc.yd.resize(blocks.size());
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const auto& blk = blocks[b];
        if (blk.output_dim == 0) {
            sc.y[b].clear();
            sc.yd[b].clear();
            continue;
        }
        sc.y[b] = blk.output_map(t, xs[b], us[b]);
        if (sc.y[b].size() != blk.output_dim)
            throw std::runtime_error("output_map returned wrong dimension for block " + blk.name);
        if (blk.output_derivative_map) {
            sc.yd[b] = blk.output_derivative_map(t, xs[b], us[b]);
            if (sc.yd[b].size() != blk.output_dim)
                throw std::runtime_error("output_derivative_map dimension mismatch for block " +
                                         blk.name);
        } else {
            sc.yd[b].assign(blk.output_dim, kNaN);
        }
    }
}

void distribute_outputs(const std::vector<Connection>& connections, const ExchangeScratch& sc,
                        std::vector<Vec>& us, std::vector<Vec>& uds) {
    for (const auto& c : connections) {
        for (std::size_t i = 0; i < c.source_outputs.size(); ++i) {
            us[c.target][c.target_inputs[i]] = sc.y[c.source][c.source_outputs[i]];
            uds[c.target][c.target_inputs[i]] = sc.yd[c.source][c.source_outputs[i]];
        }
    }
}

void validate_setup(const std::vector<SubsystemBlock>& blocks,
                    const std::vector<Connection>& connections, const Vec& x0,
                    const MasterConfig& cfg) {
    if (blocks.empty()) throw std::invalid_argument("run_master: no blocks");
    std::size_t dim = 0;
    for (const auto& b : blocks) {
        if (b.state_dim == 0 || !b.rhs)
            throw std::invalid_argument("run_master: block '" + b.name +
                                        "' needs a state and an rhs");
        if (b.output_dim > 0 && !b.output_map)
            throw std::invalid_argument("run_master: block '" + b.name +
                                        "' declares outputs but has no output_map");
        dim += b.state_dim;
    }
    if (x0.size() != dim)
        throw std::invalid_argument("run_master: initial state has wrong dimension");
    for (const auto& c : connections) {
        if (c.source >= blocks.size() || c.target >= blocks.size() || c.source == c.target)
            throw std::invalid_argument("run_master: connection endpoints invalid");
        if (c.source_outputs.size() != c.target_inputs.size())
            throw std::invalid_argument("run_master: connection index lists differ in length");
        for (std::size_t i : c.source_outputs)
            if (i >= blocks[c.source].output_dim)
                throw std::invalid_argument("run_master: connection source output out of range");
        for (std::size_t i : c.target_inputs)
            if (i >= blocks[c.target].input_dim)
                throw std::invalid_argument("run_master: connection target input out of range");
    }
    if (!(cfg.H > 0.0)) throw std::invalid_argument("run_master: H must be positive");
    if (cfg.extrap_degree != 0 && cfg.extrap_degree != 1)
        throw std::invalid_argument("run_master: extrapolation degree must be 0 or 1");
    if (cfg.hermite && cfg.extrap_degree != 1)
        throw std::invalid_argument("run_master: hermite hold needs extrapolation degree 1");
    if (!(cfg.t_end > cfg.t0)) throw std::invalid_argument("run_master: t_end must exceed t0");
}

std::size_t exchange_interval_count(const MasterConfig& cfg) {
    const double span = cfg.t_end - cfg.t0;
    const auto n = static_cast<std::size_t>(std::llround(span / cfg.H));
    if (n < 1 || std::abs(cfg.t0 + static_cast<double>(n) * cfg.H - cfg.t_end) >
                     1e-8 * std::max(1.0, std::abs(cfg.t_end)))
        throw std::invalid_argument(
            "run_master: the simulated span must be an integer number of exchange intervals");
    return n;
}

}  // namespace

SimulationTrace run_master(const std::vector<SubsystemBlock>& blocks,
                           const std::vector<Connection>& connections, const Vec& x0,
                           const MasterConfig& cfg,
                           const std::function<double(const Vec&)>& energy) {
    validate_setup(blocks, connections, x0, cfg);
    const std::size_t nb = blocks.size();
    const std::size_t n_intervals = exchange_interval_count(cfg);

    std::vector<PowerPair> pairs;
    if (cfg.scheme == Scheme::PowerNegotiated) {
        pairs = find_power_pairs(blocks, connections);
        for (const auto& p : pairs)
            for (std::size_t b : {p.block_a, p.block_b}) {
                if (!blocks[b].power_map || !blocks[b].power_inverse)
                    throw std::invalid_argument("power negotiation needs power_map and "
                                                "power_inverse on block '" +
                                                blocks[b].name + "'");
                if (cfg.extrap_degree >= 1 && !blocks[b].power_rate_map)
                    throw std::invalid_argument(
                        "first-order power negotiation needs power_rate_map on block '" +
                        blocks[b].name + "'");
            }
    }

    SimulationTrace trace;
    trace.has_energy = static_cast<bool>(energy);
    trace.block_offset.resize(nb);
    {
        std::size_t off = 0;
        for (std::size_t b = 0; b < nb; ++b) {
            trace.block_offset[b] = off;
            off += blocks[b].state_dim;
        }
        trace.total_state_dim = off;
    }
    trace.dense.assign(nb, {});
    for (auto& d : trace.dense) d.reserve(n_intervals);

    // which input components are fed by a connection / replaced by negotiation
    std::vector<std::vector<char>> wired(nb), replaced(nb);
    for (std::size_t b = 0; b < nb; ++b) {
        wired[b].assign(blocks[b].input_dim, 0);
        replaced[b].assign(blocks[b].input_dim, 0);
    }
    for (const auto& c : connections)
        for (std::size_t i : c.target_inputs) wired[c.target][i] = 1;
    if (cfg.scheme == Scheme::PowerNegotiated)
        for (const auto& p : pairs) {
            replaced[p.block_a][p.comp_a] = 1;
            replaced[p.block_b][p.comp_b] = 1;
        }
    for (std::size_t b = 0; b < nb; ++b)
        for (std::size_t i = 0; i < blocks[b].input_dim; ++i)
            if (wired[b][i] && !replaced[b][i]) trace.tracked_signals.emplace_back(b, i);

    // split the packed initial state
    std::vector<Vec> xs(nb);
    for (std::size_t b = 0; b < nb; ++b)
        xs[b].assign(x0.begin() + static_cast<std::ptrdiff_t>(trace.block_offset[b]),
                     x0.begin() +
                         static_cast<std::ptrdiff_t>(trace.block_offset[b] + blocks[b].state_dim));

    trace.exchange_times.resize(n_intervals + 1);
    for (std::size_t k = 0; k <= n_intervals; ++k)
        trace.exchange_times[k] =
            (k == n_intervals) ? cfg.t_end : cfg.t0 + static_cast<double>(k) * cfg.H;
    trace.exchange_states.push_back(x0);

    // initial input resolution: iterate the output/input maps to a fixed
    // point (the feed-through chains here settle within a few passes)
    std::vector<Vec> us(nb), uds(nb);
    for (std::size_t b = 0; b < nb; ++b) {
        us[b].assign(blocks[b].input_dim, 0.0);
        uds[b].assign(blocks[b].input_dim, kNaN);
    }
    std::vector<SampleHistory> histories;
    histories.reserve(nb);
    for (std::size_t b = 0; b < nb; ++b) histories.emplace_back(blocks[b].input_dim);

    ExchangeScratch scratch;
    for (int pass = 0; pass < 3; ++pass) {
        compute_outputs(blocks, cfg.t0, xs, us, scratch);
        distribute_outputs(connections, scratch, us, uds);
    }
    for (std::size_t b = 0; b < nb; ++b) histories[b].push(cfg.t0, us[b], uds[b]);

    std::vector<Vec> previous_defect(nb);  // balance defects of the previous interval

    for (std::size_t k = 1; k <= n_intervals; ++k) {
        const double ta = trace.exchange_times[k - 1];
        const double tb = trace.exchange_times[k];

        // 1. freeze every block's inputs for this interval
        std::vector<BlockInputProvider> providers(nb);
        std::vector<PowerRecord> records;
        if (cfg.scheme == Scheme::PowerNegotiated) {
            providers = exchange_power_negotiated(blocks, pairs, histories, xs, us, uds, ta, cfg,
                                                  k, &records);
        } else {
            std::vector<Extrapolant> exts =
                cfg.scheme == Scheme::BalanceCorrected
                    ? exchange_balance_corrected(histories, previous_defect, ta, tb, cfg, k)
                    : exchange_plain(histories, cfg, k);
            for (std::size_t b = 0; b < nb; ++b) {
                providers[b].base = std::move(exts[b]);
                providers[b].block = &blocks[b];
            }
        }
        Vec refed(trace.tracked_signals.size(), 0.0);
        if (cfg.scheme == Scheme::BalanceCorrected && k > 1)
            for (std::size_t s = 0; s < trace.tracked_signals.size(); ++s) {
                const auto [b, c] = trace.tracked_signals[s];
                if (!previous_defect[b].empty()) refed[s] = previous_defect[b][c];
            }

        // 2. advance the blocks independently
        auto advance = [&](std::size_t b) {
            Rhs rhs = [&, b](double t, const Vec& x) {
                Vec u;
                providers[b].eval_into(t, x, u);
                return blocks[b].rhs(t, x, u);
            };
            try {
                return integrate(rhs, xs[b], ta, tb, cfg.integrator);
            } catch (const IntegrationError& e) {
                throw IntegrationError("block '" + blocks[b].name + "', exchange interval " +
                                           std::to_string(k) + ": " + e.what(),
                                       e.t_reached);
            }
        };
        std::vector<IntegrationResult> results(nb);
        if (cfg.parallel_blocks && nb > 1) {
            std::vector<std::future<IntegrationResult>> futs;
            futs.reserve(nb);
            for (std::size_t b = 0; b < nb; ++b)
                futs.push_back(std::async(std::launch::async, advance, b));
            for (std::size_t b = 0; b < nb; ++b) results[b] = futs[b].get();
        } else {
            for (std::size_t b = 0; b < nb; ++b) results[b] = advance(b);
        }
        for (std::size_t b = 0; b < nb; ++b) {
            xs[b] = results[b].x_end;
            trace.dense[b].push_back(std::move(results[b].dense));
        }

        // 3. sample the freshly integrated outputs at the interval end; the
        // first pass is seeded with the providers' end-of-interval inputs and
        // the repeats settle any input dependence of the outputs and their
        // rates on the exchanged values, as at the initial exchange
        std::vector<Vec> us_end(nb);
        for (std::size_t b = 0; b < nb; ++b) {
            us_end[b].assign(blocks[b].input_dim, 0.0);
            if (blocks[b].input_dim > 0) providers[b].eval_into(tb, xs[b], us_end[b]);
        }
        compute_outputs(blocks, tb, xs, us_end, scratch);
        distribute_outputs(connections, scratch, us, uds);
        for (int pass = 0; pass < 2; ++pass) {
            compute_outputs(blocks, tb, xs, us, scratch);
            distribute_outputs(connections, scratch, us, uds);
        }

        // 4. balance defect of the interval just finished, per tracked signal
        Vec defects(trace.tracked_signals.size(), 0.0);
        {
            std::vector<Vec> block_defect(nb);
            for (std::size_t b = 0; b < nb; ++b) {
                if (blocks[b].input_dim == 0) continue;
                bool any = false;
                for (std::size_t i = 0; i < blocks[b].input_dim; ++i)
                    if (wired[b][i]) any = true;
                if (!any) continue;

                std::vector<double> cuts;
                for (const auto& c : connections) {
                    if (c.target != b) continue;
                    const auto& bp = trace.dense[c.source].back().breakpoints();
                    cuts.insert(cuts.end(), bp.begin(), bp.end());
                }
                std::sort(cuts.begin(), cuts.end());

                // Measured against the polynomial hold alone: the refeed bump
                // repays the previous interval's defect and must stay out of
                // this interval's accounting, or the refeeds start cancelling
                // each other from one interval to the next.
                Extrapolant hold = providers[b].base;
                hold.has_correction = false;

                auto actual = [&](double t) {
                    Vec u(blocks[b].input_dim);
                    hold.eval_into(t, u);  // unwired components cancel exactly
                    for (const auto& c : connections) {
                        if (c.target != b) continue;
                        Vec xsrc = trace.dense[c.source].back().eval(t);
                        Vec usrc;
                        providers[c.source].eval_into(t, xsrc, usrc);
                        Vec ysrc = blocks[c.source].output_map(t, xsrc, usrc);
                        for (std::size_t i = 0; i < c.source_outputs.size(); ++i)
                            u[c.target_inputs[i]] = ysrc[c.source_outputs[i]];
                    }
                    return u;
                };
                block_defect[b] = balance_error(actual, hold, ta, tb, cuts);
            }
            for (std::size_t s = 0; s < trace.tracked_signals.size(); ++s) {
                const auto [b, c] = trace.tracked_signals[s];
                if (!block_defect[b].empty()) defects[s] = block_defect[b][c];
            }
            if (cfg.scheme == Scheme::BalanceCorrected) {
                for (std::size_t b = 0; b < nb; ++b) {
                    previous_defect[b].assign(blocks[b].input_dim, 0.0);
                    if (block_defect[b].empty()) continue;
                    for (std::size_t s = 0; s < trace.tracked_signals.size(); ++s) {
                        const auto [bb, cc] = trace.tracked_signals[s];
                        if (bb == b) previous_defect[b][cc] = block_defect[b][cc];
                    }
                }
            }
        }
        trace.balance_errors.push_back(std::move(defects));
        trace.refed_amounts.push_back(std::move(refed));

        // 5. guard spans and reconstruction residuals of the negotiated boundaries
        double max_residual = 0.0;
        if (cfg.scheme == Scheme::PowerNegotiated) {
            for (const auto& pr : pairs) {
                struct SideRef {
                    std::size_t block, comp;
                    bool side_a;
                };
                for (const SideRef side : {SideRef{pr.block_a, pr.comp_a, true},
                                           SideRef{pr.block_b, pr.comp_b, false}}) {
                    const auto& den = trace.dense[side.block].back();
                    auto& prov = providers[side.block];

                    const BlockInputProvider::PowerBinding* bind = nullptr;
                    for (const auto& bd : prov.bindings)
                        if (bd.component == side.comp) bind = &bd;
                    if (!bind) continue;
                    const double hold = bind->guard.hold;
                    const double shell = kShellFactor * cfg.inversion_eps;

                    auto denom = [&](double t) {
                        Vec x = den.eval(t);
                        Vec u;
                        prov.base.eval_into(t, u);
                        return probe_sensitivity(blocks[side.block], x, u, side.comp);
                    };
                    auto deviating = [&](double t) { return std::abs(denom(t)) < shell; };
                    const auto bands =
                        scan_sensitivity_spans(denom, deviating, ta, tb, cfg.inversion_eps);

                    // Replay the freeze automaton in monotone time over the
                    // realized trajectory: an episode opens where the realized
                    // reconstruction departs from the raw inversion (the blend
                    // shell around a sensitivity zero) and, when the frozen
                    // band itself was touched, closes only once the sensitivity
                    // has left the shell with the re-inverted value agreeing in
                    // direction with the held one.
                    auto closed = [&](double t) {
                        Vec x = den.eval(t);
                        Vec u;
                        prov.base.eval_into(t, u);
                        const double d = probe_sensitivity(blocks[side.block], x, u, side.comp);
                        if (std::abs(d) < shell) return false;
                        const double v = blocks[side.block].power_inverse(
                            bind->target.eval_component(t, 0), x, u);
                        return v == 0.0 || hold == 0.0 || (v > 0.0) == (hold > 0.0);
                    };
                    std::vector<std::pair<double, double>> episodes;
                    double cursor = ta;
                    for (const auto& [b0, b1] : bands) {
                        if (b1 <= cursor) continue;
                        const double e0 = std::max(b0, cursor);
                        double e1 = b1;
                        bool engaged = false;
                        double d_prev = kNaN;
                        for (int j = 0; j <= 32 && !engaged; ++j) {
                            const double dj = denom(b0 + (b1 - b0) * static_cast<double>(j) / 32);
                            if (std::abs(dj) < cfg.inversion_eps) engaged = true;
                            if (j > 0 && (dj > 0.0) != (d_prev > 0.0)) engaged = true;
                            d_prev = dj;
                        }
                        if (engaged && !closed(b1)) {
                            e1 = tb;
                            const double step = (tb - ta) / 4096.0;
                            double lo = b1, hi = kNaN;
                            for (double t = b1 + step; t < tb + 0.5 * step; t += step) {
                                const double tc = std::min(t, tb);
                                if (closed(tc)) {
                                    hi = tc;
                                    break;
                                }
                                lo = tc;
                            }
                            if (std::isfinite(hi)) {
                                const double t_res = 1e-14 * std::max(1.0, std::abs(tb));
                                for (int it = 0; it < 120 && hi - lo > t_res; ++it) {
                                    const double m = 0.5 * (lo + hi);
                                    (closed(m) ? hi : lo) = m;
                                }
                                e1 = 0.5 * (lo + hi);
                            }
                        }
                        episodes.emplace_back(e0, e1);
                        cursor = e1;
                        if (cursor >= tb) break;
                    }
                    for (const auto& [s0, s1] : episodes)
                        trace.spans.push_back(SingularSpan{side.block, side.comp, k, s0, s1});

                    for (int j = 0; j < 10; ++j) {
                        const double t = ta + (static_cast<double>(j) + 0.5) * (tb - ta) / 10.0;
                        bool in_span = false;
                        for (const auto& [s0, s1] : episodes)
                            if (t >= s0 && t <= s1) in_span = true;
                        if (in_span) continue;
                        Vec x = den.eval(t);
                        Vec u;
                        prov.base.eval_into(t, u);
                        const double d = probe_sensitivity(blocks[side.block], x, u, side.comp);
                        if (std::abs(d) < cfg.inversion_eps) continue;
                        const double want = bind->target.eval_component(t, 0);
                        u[side.comp] = blocks[side.block].power_inverse(want, x, u);
                        const double got = blocks[side.block].power_map(x, u);
                        max_residual = std::max(max_residual, std::abs(got - want));
                    }
                }
            }
            for (const auto& prov : providers) trace.guard_events += prov.guard_events;
        }
        trace.max_inversion_residual.push_back(max_residual);
        trace.power_records.push_back(std::move(records));

        for (std::size_t b = 0; b < nb; ++b) histories[b].push(tb, us[b], uds[b]);
        Vec global(trace.total_state_dim);
        for (std::size_t b = 0; b < nb; ++b)
            std::copy(xs[b].begin(), xs[b].end(),
                      global.begin() + static_cast<std::ptrdiff_t>(trace.block_offset[b]));
        trace.exchange_states.push_back(std::move(global));
    }

    // uniform output sampling from the dense interpolants
    const double dt = cfg.sample_dt > 0.0 ? cfg.sample_dt : cfg.H / 10.0;
    const double t_tol = 1e-9 * std::max(1.0, std::abs(cfg.t_end));
    for (std::size_t i = 0;; ++i) {
        const double t = cfg.t0 + dt * static_cast<double>(i);
        if (t > cfg.t_end - t_tol) break;
        trace.sample_times.push_back(t);
    }
    trace.sample_times.push_back(cfg.t_end);
    trace.sample_states.reserve(trace.sample_times.size());
    for (double t : trace.sample_times) {
        trace.sample_states.push_back(trace.state_at(t));
        if (trace.has_energy) trace.sample_energy.push_back(energy(trace.sample_states.back()));
    }
    return trace;
}

}  // namespace cosim

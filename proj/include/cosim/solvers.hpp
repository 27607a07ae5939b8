#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cosim/linalg.hpp"

namespace cosim {

using Rhs = std::function<Vec(double, const Vec&)>;

enum class IntegratorMethod {
    AdaptiveRK54,          ///< Dormand-Prince 5(4) embedded pair, adaptive step
    FixedRK4,              ///< classical Runge-Kutta, fixed step
    ImplicitTrapezoidal,   ///< A-stable trapezoidal rule, damped Newton per step
};

struct IntegratorConfig {
    IntegratorMethod method = IntegratorMethod::AdaptiveRK54;
    double abs_tol = 1e-12;
    double rel_tol = 0.0;
    double initial_step = 0.0;  ///< <= 0 selects a step automatically; fixed-step methods require > 0
    double max_step = 0.0;      ///< <= 0 means unlimited
};

/// Thrown when an integration cannot reach t1; carries how far it got.
struct IntegrationError : std::runtime_error {
    IntegrationError(const std::string& what, double t) : std::runtime_error(what), t_reached(t) {}
    double t_reached;
};

/// Piecewise-polynomial interpolant of one integration run.
///
/// Segment i covers [breakpoints[i], breakpoints[i+1]] and stores monomial
/// coefficients in the scaled local variable s = (t - t_left) / h, so
/// x(t) = sum_k coeff[k] * s^k.  Evaluation at a breakpoint returns the
/// stored grid state itself, never the polynomial, which keeps grid values
/// bit-exact.
class DenseSolution {
  public:
    DenseSolution() = default;

    void reset(double t_begin, const Vec& x_begin);
    void push_segment(double t_right, const Vec& x_right, std::vector<Vec> coeffs);

    Vec eval(double t) const;
    void eval_into(double t, Vec& out) const;

    double t0() const { return breakpoints_.empty() ? 0.0 : breakpoints_.front(); }
    double t1() const { return breakpoints_.empty() ? 0.0 : breakpoints_.back(); }
    const std::vector<double>& breakpoints() const { return breakpoints_; }
    const Vec& node_state(std::size_t i) const { return nodes_[i]; }
    std::size_t segments() const { return segment_coeffs_.size(); }
    int order() const { return order_; }
    void set_order(int p) { order_ = p; }
    bool empty() const { return breakpoints_.size() < 2; }

  private:
    std::vector<double> breakpoints_;
    std::vector<Vec> nodes_;                        // state at each breakpoint
    std::vector<std::vector<Vec>> segment_coeffs_;  // per segment: coeff[k] is the s^k vector
    int order_ = 4;
};

struct IntegrationResult {
    Vec x_end;
    DenseSolution dense;
    std::size_t steps_accepted = 0;
    std::size_t steps_rejected = 0;
    std::size_t rhs_evaluations = 0;
};

/// Integrates dx/dt = rhs(t, x) from (t0, x0) to t1 and returns the endpoint
/// state together with a dense interpolant over [t0, t1].
IntegrationResult integrate(const Rhs& rhs, const Vec& x0, double t0, double t1,
                            const IntegratorConfig& cfg = {});

inline Vec eval_dense(const DenseSolution& d, double t) { return d.eval(t); }

}  // namespace cosim

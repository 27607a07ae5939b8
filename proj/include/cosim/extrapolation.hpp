#pragma once

#include <functional>
#include <vector>

#include "cosim/linalg.hpp"

namespace cosim {

/// Rolling record of the newest exchanged samples of one vector-valued signal.
/// Older entries beyond a small window are dropped; extrapolation only ever
/// looks at the two newest.
class SampleHistory {
  public:
    explicit SampleHistory(std::size_t dim = 0) : dim_(dim) {}

    /// Appends a sample at time t.  `derivatives` is either empty or
    /// dim-sized; NaN entries mark components without derivative data.
    void push(double t, Vec values, Vec derivatives = {});

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return times_.size(); }

    /// Access counted back from the newest sample: age 0 is the newest.
    double time(std::size_t age = 0) const;
    const Vec& values(std::size_t age = 0) const;
    const Vec& derivatives(std::size_t age = 0) const;
    bool has_derivative(std::size_t component, std::size_t age = 0) const;

  private:
    std::size_t dim_;
    std::vector<double> times_;
    std::vector<Vec> values_;
    std::vector<Vec> derivs_;
};

/// Symmetric triangular bump on [t0, t1] with unit integral; used to refeed
/// a balance defect over one exchange interval.
struct HatShape {
    double t0 = 0.0;
    double t1 = 1.0;

    double operator()(double t) const;
    /// Integral of the shape over [a, b] (clipped to the support).
    double integral(double a, double b) const;
};

inline HatShape refeed_shape(double t0, double t1) { return HatShape{t0, t1}; }

/// Polynomial hold of an exchanged signal over one interval, as consumed by
/// the receiving subsystem: value(t) = c0 + c1 * (t - anchor), optionally
/// plus a correction bump carrying a previously measured balance defect.
struct Extrapolant {
    double anchor = 0.0;
    double width = 0.0;
    int degree = 0;
    Vec c0;
    Vec c1;  // empty when degree == 0

    bool has_correction = false;
    Vec correction_amount;
    HatShape correction_shape;

    std::size_t dim() const { return c0.size(); }
    double eval_component(double t, std::size_t i) const;
    void eval_into(double t, Vec& out) const;
    Vec eval(double t) const;
};

/// Holds the newest sample on the whole interval.
Extrapolant build_constant(const SampleHistory& h);

/// Secant through the two newest samples, anchored at the newest.
Extrapolant build_linear(const SampleHistory& h);

/// First-order Hermite hold from the newest sample and its derivative;
/// components without derivative data fall back to the secant (or to the
/// constant hold while only one sample exists).
Extrapolant build_hermite_linear(const SampleHistory& h);

/// Attaches a refeed correction to an extrapolant.
Extrapolant with_correction(Extrapolant e, Vec amount, HatShape shape);

/// 8-node Gauss-Legendre quadrature, composite over consecutive pairs in
/// `points` (which must be sorted).
double quadrature_gl8(const std::function<double(double)>& f, double a, double b);
double quadrature_gl8(const std::function<double(double)>& f, const std::vector<double>& points);

/// Interval balance defect of one exchanged signal: integral of
/// (actual - used) over [t0, t1], component-wise.  The polynomial part is
/// integrated by composite Gauss quadrature subdivided at `subdivision`
/// (pass the integrator breakpoints of the sending block); the correction
/// bump, which has a kink, is integrated in closed form.
Vec balance_error(const std::function<Vec(double)>& actual, const Extrapolant& used, double t0,
                  double t1, const std::vector<double>& subdivision = {});

}  // namespace cosim

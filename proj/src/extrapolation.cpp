#include "cosim/extrapolation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cosim {

namespace {
constexpr std::size_t kHistoryWindow = 8;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const double kGlNodes[8] = {
    -0.96028985649753623168, -0.79666647741362673959, -0.52553240991632898582,
    -0.18343464249564980494, 0.18343464249564980494,  0.52553240991632898582,
    0.79666647741362673959,  0.96028985649753623168,
};
const double kGlWeights[8] = {
    0.10122853629037625915, 0.22238103445337447054, 0.31370664587788728734,
    0.36268378337836198297, 0.36268378337836198297, 0.31370664587788728734,
    0.22238103445337447054, 0.10122853629037625915,
};
}  // namespace

void SampleHistory::push(double t, Vec values, Vec derivatives) {
    if (values.size() != dim_) throw std::invalid_argument("SampleHistory: value size mismatch");
    if (!derivatives.empty() && derivatives.size() != dim_)
        throw std::invalid_argument("SampleHistory: derivative size mismatch");
    if (!times_.empty() && !(t > times_.back()))
        throw std::invalid_argument("SampleHistory: sample times must strictly increase");
    if (derivatives.empty()) derivatives.assign(dim_, kNaN);
    times_.push_back(t);
    values_.push_back(std::move(values));
    derivs_.push_back(std::move(derivatives));
    if (times_.size() > kHistoryWindow) {
        times_.erase(times_.begin());
        values_.erase(values_.begin());
        derivs_.erase(derivs_.begin());
    }
}

double SampleHistory::time(std::size_t age) const {
    if (age >= times_.size()) throw std::out_of_range("SampleHistory: age out of range");
    return times_[times_.size() - 1 - age];
}

const Vec& SampleHistory::values(std::size_t age) const {
    if (age >= values_.size()) throw std::out_of_range("SampleHistory: age out of range");
    return values_[values_.size() - 1 - age];
}

const Vec& SampleHistory::derivatives(std::size_t age) const {
    if (age >= derivs_.size()) throw std::out_of_range("SampleHistory: age out of range");
    return derivs_[derivs_.size() - 1 - age];
}

bool SampleHistory::has_derivative(std::size_t component, std::size_t age) const {
    return std::isfinite(derivatives(age)[component]);
}

double HatShape::operator()(double t) const {
    const double h = t1 - t0;
    if (h <= 0.0 || t <= t0 || t >= t1) return 0.0;
    const double mid = t0 + 0.5 * h;
    const double scale = 4.0 / (h * h);
    return (t <= mid) ? scale * (t - t0) : scale * (t1 - t);
}

double HatShape::integral(double a, double b) const {
    const double h = t1 - t0;
    if (h <= 0.0) return 0.0;
    a = std::clamp(a, t0, t1);
    b = std::clamp(b, t0, t1);
    if (b <= a) return 0.0;
    const double mid = t0 + 0.5 * h;
    auto cumulative = [&](double x) {
        if (x <= mid) {
            const double u = x - t0;
            return 2.0 * u * u / (h * h);
        }
        const double u = t1 - x;
        return 1.0 - 2.0 * u * u / (h * h);
    };
    return cumulative(b) - cumulative(a);
}

double Extrapolant::eval_component(double t, std::size_t i) const {
    double v = c0[i];
    if (degree >= 1 && !c1.empty()) v += c1[i] * (t - anchor);
    if (has_correction) {
        const double phi = correction_shape(t);
        if (phi != 0.0) v += correction_amount[i] * phi;
    }
    return v;
}

void Extrapolant::eval_into(double t, Vec& out) const {
    out.resize(dim());
    for (std::size_t i = 0; i < dim(); ++i) out[i] = eval_component(t, i);
}

Vec Extrapolant::eval(double t) const {
    Vec out;
    eval_into(t, out);
    return out;
}

Extrapolant build_constant(const SampleHistory& h) {
    if (h.size() == 0) throw std::invalid_argument("build_constant: empty history");
    Extrapolant e;
    e.anchor = h.time();
    e.degree = 0;
    e.c0 = h.values();
    return e;
}

Extrapolant build_linear(const SampleHistory& h) {
    if (h.size() < 2) throw std::invalid_argument("build_linear: needs two samples");
    const double t_new = h.time(0), t_old = h.time(1);
    if (!(t_new > t_old)) throw std::invalid_argument("build_linear: degenerate sample times");
    Extrapolant e;
    e.anchor = t_new;
    e.degree = 1;
    e.c0 = h.values(0);
    e.c1.resize(h.dim());
    const Vec& v_new = h.values(0);
    const Vec& v_old = h.values(1);
    for (std::size_t i = 0; i < h.dim(); ++i) e.c1[i] = (v_new[i] - v_old[i]) / (t_new - t_old);
    return e;
}

Extrapolant build_hermite_linear(const SampleHistory& h) {
    if (h.size() == 0) throw std::invalid_argument("build_hermite_linear: empty history");
    Extrapolant e;
    e.anchor = h.time();
    e.degree = 1;
    e.c0 = h.values();
    e.c1.assign(h.dim(), 0.0);
    const bool have_secant = h.size() >= 2 && h.time(0) > h.time(1);
    for (std::size_t i = 0; i < h.dim(); ++i) {
        if (h.has_derivative(i)) {
            e.c1[i] = h.derivatives()[i];
        } else if (have_secant) {
            e.c1[i] = (h.values(0)[i] - h.values(1)[i]) / (h.time(0) - h.time(1));
        }
    }
    return e;
}

Extrapolant with_correction(Extrapolant e, Vec amount, HatShape shape) {
    if (amount.size() != e.dim())
        throw std::invalid_argument("with_correction: amount size mismatch");
    e.has_correction = true;
    e.correction_amount = std::move(amount);
    e.correction_shape = shape;
    return e;
}

double quadrature_gl8(const std::function<double(double)>& f, double a, double b) {
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double s = 0.0;
    for (int i = 0; i < 8; ++i) s += kGlWeights[i] * f(mid + half * kGlNodes[i]);
    return s * half;
}

double quadrature_gl8(const std::function<double(double)>& f, const std::vector<double>& points) {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < points.size(); ++i) s += quadrature_gl8(f, points[i], points[i + 1]);
    return s;
}

Vec balance_error(const std::function<Vec(double)>& actual, const Extrapolant& used, double t0,
                  double t1, const std::vector<double>& subdivision) {
    if (!(t1 > t0)) throw std::invalid_argument("balance_error: need t1 > t0");
    std::vector<double> pts;
    pts.push_back(t0);
    for (double p : subdivision)
        if (p > pts.back() && p < t1) pts.push_back(p);
    pts.push_back(t1);

    const std::size_t n = used.dim();
    Vec result(n, 0.0);
    Vec u;
    for (std::size_t cell = 0; cell + 1 < pts.size(); ++cell) {
        const double a = pts[cell], b = pts[cell + 1];
        const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        for (int q = 0; q < 8; ++q) {
            const double t = mid + half * kGlNodes[q];
            const double w = kGlWeights[q] * half;
            u = actual(t);
            if (u.size() != n) throw std::invalid_argument("balance_error: signal size mismatch");
            for (std::size_t i = 0; i < n; ++i) {
                double poly = used.c0[i];
                if (used.degree >= 1 && !used.c1.empty()) poly += used.c1[i] * (t - used.anchor);
                result[i] += w * (u[i] - poly);
            }
        }
    }
    if (used.has_correction) {
        const double frac = used.correction_shape.integral(t0, t1);
        for (std::size_t i = 0; i < n; ++i) result[i] -= used.correction_amount[i] * frac;
    }
    return result;
}

}  // namespace cosim

#include "cosim/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cosim {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Dormand-Prince 5(4) tableau.
constexpr double a21 = 0.2;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                 a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                 a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                 a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
constexpr double c2 = 0.2, c3 = 0.3, c4 = 0.8, c5 = 8.0 / 9.0;
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
// Coefficients of the quartic continuous extension.
constexpr double d1 = -12715105075.0 / 11282082432.0;
constexpr double d3 = 87487479700.0 / 32700410799.0;
constexpr double d4 = -10690763975.0 / 1880347072.0;
constexpr double d5 = 701980252875.0 / 199316789632.0;
constexpr double d6 = -1453857185.0 / 822651844.0;
constexpr double d7 = 69997945.0 / 29380423.0;

double error_norm(const Vec& err, const Vec& y0, const Vec& y1, double atol, double rtol) {
    double s = 0.0;
    for (std::size_t i = 0; i < err.size(); ++i) {
        const double sc = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
        const double q = err[i] / sc;
        s += q * q;
    }
    return std::sqrt(s / static_cast<double>(err.size()));
}

// Initial step selection following the usual embedded-pair heuristic.
double guess_initial_step(const Rhs& rhs, double t0, const Vec& y, const Vec& f0, double t_span,
                          double atol, double rtol, std::size_t& n_eval) {
    const std::size_t n = y.size();
    double d0 = 0.0, d1n = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double sc = atol + rtol * std::abs(y[i]);
        d0 += (y[i] / sc) * (y[i] / sc);
        d1n += (f0[i] / sc) * (f0[i] / sc);
    }
    d0 = std::sqrt(d0 / n);
    d1n = std::sqrt(d1n / n);
    double h0 = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
    h0 = std::min(h0, t_span);
    Vec y1(n);
    for (std::size_t i = 0; i < n; ++i) y1[i] = y[i] + h0 * f0[i];
    const Vec f1 = rhs(t0 + h0, y1);
    ++n_eval;
    double d2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double sc = atol + rtol * std::abs(y[i]);
        const double q = (f1[i] - f0[i]) / sc;
        d2 += q * q;
    }
    d2 = std::sqrt(d2 / n) / h0;
    const double dm = std::max(d1n, d2);
    const double h1 = (dm <= 1e-15) ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
    return std::min({100.0 * h0, h1, t_span});
}

void check_step_underflow(double h, double t) {
    if (h <= 16.0 * kEps * std::max(1.0, std::abs(t)))
        throw IntegrationError("integration step size underflow at t = " + std::to_string(t), t);
}

IntegrationResult run_dopri54(const Rhs& rhs, const Vec& x0, double t0, double t1,
                              const IntegratorConfig& cfg) {
    const std::size_t n = x0.size();
    const double atol = cfg.abs_tol, rtol = cfg.rel_tol;
    if (atol <= 0.0 && rtol <= 0.0)
        throw std::invalid_argument("adaptive integration needs abs_tol > 0 or rel_tol > 0");
    const double hmax0 = cfg.max_step > 0.0 ? cfg.max_step : (t1 - t0);

    IntegrationResult res;
    res.dense.set_order(4);
    res.dense.reset(t0, x0);

    Vec y = x0;
    double t = t0;
    Vec k1 = rhs(t, y);
    res.rhs_evaluations = 1;

    double h = cfg.initial_step > 0.0
                   ? cfg.initial_step
                   : guess_initial_step(rhs, t0, y, k1, t1 - t0, std::max(atol, 1e-300),
                                        rtol, res.rhs_evaluations);
    h = std::min(h, hmax0);

    Vec k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n), err(n);
    double facold = 1e-4;
    constexpr double beta = 0.04, safety = 0.9, fac_min = 0.2, fac_max = 5.0;
    constexpr std::size_t max_steps = 50'000'000;

    std::size_t iter = 0;
    while (t < t1) {
        if (++iter > max_steps)
            throw IntegrationError("integration exceeded the step budget at t = " + std::to_string(t), t);
        h = std::min(h, hmax0);
        if (t + h >= t1) h = t1 - t;
        check_step_underflow(h, t);

        for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * a21 * k1[i];
        k2 = rhs(t + c2 * h, ytmp);
        for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        k3 = rhs(t + c3 * h, ytmp);
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        k4 = rhs(t + c4 * h, ytmp);
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        k5 = rhs(t + c5 * h, ytmp);
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
        k6 = rhs(t + h, ytmp);
        for (std::size_t i = 0; i < n; ++i)
            ynew[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
        k7 = rhs(t + h, ynew);
        res.rhs_evaluations += 6;

        for (std::size_t i = 0; i < n; ++i)
            err[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
        double en = error_norm(err, y, ynew, atol, rtol);

        if (!std::isfinite(en)) {
            ++res.steps_rejected;
            h *= 0.5;
            continue;
        }
        if (en <= 1.0) {
            // accepted: build the quartic interpolant for this segment
            std::vector<Vec> coeff(5, Vec(n));
            for (std::size_t i = 0; i < n; ++i) {
                const double ydiff = ynew[i] - y[i];
                const double bspl = h * k1[i] - ydiff;
                const double r4 = ydiff - h * k7[i] - bspl;
                const double r5 = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] +
                                       d6 * k6[i] + d7 * k7[i]);
                coeff[0][i] = y[i];
                coeff[1][i] = ydiff + bspl;
                coeff[2][i] = -bspl + r4 + r5;
                coeff[3][i] = -r4 - 2.0 * r5;
                coeff[4][i] = r5;
            }
            const double t_next = (t + h >= t1) ? t1 : t + h;
            res.dense.push_segment(t_next, ynew, std::move(coeff));
            ++res.steps_accepted;
            t = t_next;
            y = ynew;
            k1 = k7;  // first-same-as-last

            const double fac11 = std::pow(std::max(en, 1e-32), 0.2 - beta * 0.75);
            double fac = fac11 / std::pow(facold, beta);
            fac = std::max(1.0 / fac_max, std::min(1.0 / fac_min, fac / safety));
            h = h / fac;
            facold = std::max(en, 1e-4);
        } else {
            ++res.steps_rejected;
            const double fac11 = std::pow(en, 0.2 - beta * 0.75);
            h = h / std::min(1.0 / fac_min, fac11 / safety);
        }
    }
    res.x_end = y;
    return res;
}

std::size_t fixed_step_count(double span, double h_req) {
    if (h_req <= 0.0)
        throw std::invalid_argument("fixed-step methods require initial_step > 0");
    const double n_exact = span / h_req;
    auto n = static_cast<std::size_t>(std::ceil(n_exact - 1e-9));
    return std::max<std::size_t>(n, 1);
}

std::vector<Vec> hermite_segment(const Vec& y0, const Vec& f0, const Vec& y1, const Vec& f1,
                                 double h) {
    const std::size_t n = y0.size();
    std::vector<Vec> coeff(4, Vec(n));
    for (std::size_t i = 0; i < n; ++i) {
        coeff[0][i] = y0[i];
        coeff[1][i] = h * f0[i];
        coeff[2][i] = -3.0 * y0[i] - 2.0 * h * f0[i] + 3.0 * y1[i] - h * f1[i];
        coeff[3][i] = 2.0 * y0[i] + h * f0[i] - 2.0 * y1[i] + h * f1[i];
    }
    return coeff;
}

IntegrationResult run_rk4(const Rhs& rhs, const Vec& x0, double t0, double t1,
                          const IntegratorConfig& cfg) {
    const std::size_t n = x0.size();
    const std::size_t steps = fixed_step_count(t1 - t0, cfg.initial_step);
    const double h = (t1 - t0) / static_cast<double>(steps);

    IntegrationResult res;
    res.dense.set_order(3);
    res.dense.reset(t0, x0);

    Vec y = x0, ytmp(n), ynew(n);
    Vec f0 = rhs(t0, y);
    res.rhs_evaluations = 1;
    for (std::size_t s = 0; s < steps; ++s) {
        const double t = t0 + static_cast<double>(s) * h;
        const Vec& k1 = f0;
        for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + 0.5 * h * k1[i];
        const Vec k2 = rhs(t + 0.5 * h, ytmp);
        for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + 0.5 * h * k2[i];
        const Vec k3 = rhs(t + 0.5 * h, ytmp);
        for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * k3[i];
        const Vec k4 = rhs(t + h, ytmp);
        for (std::size_t i = 0; i < n; ++i)
            ynew[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        const double t_next = (s + 1 == steps) ? t1 : t + h;
        const Vec f1 = rhs(t_next, ynew);
        res.rhs_evaluations += 4;
        res.dense.push_segment(t_next, ynew, hermite_segment(y, f0, ynew, f1, h));
        y = ynew;
        f0 = f1;
        ++res.steps_accepted;
    }
    res.x_end = y;
    return res;
}

IntegrationResult run_trapezoidal(const Rhs& rhs, const Vec& x0, double t0, double t1,
                                  const IntegratorConfig& cfg) {
    const std::size_t n = x0.size();
    const std::size_t steps = fixed_step_count(t1 - t0, cfg.initial_step);
    const double h = (t1 - t0) / static_cast<double>(steps);
    constexpr double newton_tol = 1e-12;
    constexpr int newton_max_iter = 25;

    IntegrationResult res;
    res.dense.set_order(3);
    res.dense.reset(t0, x0);

    Vec y = x0;
    Vec f0 = rhs(t0, y);
    res.rhs_evaluations = 1;

    for (std::size_t s = 0; s < steps; ++s) {
        const double t = t0 + static_cast<double>(s) * h;
        const double t_next = (s + 1 == steps) ? t1 : t + h;

        Vec z(n);  // iterate for y_{n+1}, explicit Euler predictor
        for (std::size_t i = 0; i < n; ++i) z[i] = y[i] + h * f0[i];

        auto residual = [&](const Vec& zz) {
            const Vec fz = rhs(t_next, zz);
            ++res.rhs_evaluations;
            Vec r(n);
            for (std::size_t i = 0; i < n; ++i)
                r[i] = zz[i] - y[i] - 0.5 * h * (f0[i] + fz[i]);
            return r;
        };

        Vec r = residual(z);
        bool converged = false;
        for (int it = 0; it < newton_max_iter; ++it) {
            if (norm_inf(r) <= newton_tol * (1.0 + norm_inf(z))) {
                converged = true;
                break;
            }
            Mat jac(n, n);
            for (std::size_t j = 0; j < n; ++j) {
                const double dz = std::sqrt(kEps) * std::max(1.0, std::abs(z[j]));
                Vec zp = z;
                zp[j] += dz;
                const Vec rp = residual(zp);
                for (std::size_t i = 0; i < n; ++i) jac(i, j) = (rp[i] - r[i]) / dz;
            }
            const Vec dz = solve_dense(jac, r);
            double lambda = 1.0;
            const double r_norm = norm_inf(r);
            Vec z_trial(n), r_trial;
            for (int back = 0; back < 6; ++back) {
                for (std::size_t i = 0; i < n; ++i) z_trial[i] = z[i] - lambda * dz[i];
                r_trial = residual(z_trial);
                if (norm_inf(r_trial) <= r_norm || back == 5) break;
                lambda *= 0.5;
            }
            z = z_trial;
            r = r_trial;
            if (norm_inf(dz) * lambda <= newton_tol * (1.0 + norm_inf(z))) {
                converged = true;
                break;
            }
        }
        if (!converged)
            throw IntegrationError("trapezoidal Newton iteration failed to converge at t = " +
                                       std::to_string(t_next),
                                   t);

        const Vec f1 = rhs(t_next, z);
        ++res.rhs_evaluations;
        res.dense.push_segment(t_next, z, hermite_segment(y, f0, z, f1, h));
        y = z;
        f0 = f1;
        ++res.steps_accepted;
    }
    res.x_end = y;
    return res;
}

}  // namespace

void DenseSolution::reset(double t_begin, const Vec& x_begin) {
    breakpoints_.assign(1, t_begin);
    nodes_.assign(1, x_begin);
    segment_coeffs_.clear();
}

void DenseSolution::push_segment(double t_right, const Vec& x_right, std::vector<Vec> coeffs) {
    if (breakpoints_.empty()) throw std::logic_error("DenseSolution: reset() before push_segment()");
    if (t_right <= breakpoints_.back())
        throw std::invalid_argument("DenseSolution: segments must advance in time");
    breakpoints_.push_back(t_right);
    nodes_.push_back(x_right);
    segment_coeffs_.push_back(std::move(coeffs));
}

void DenseSolution::eval_into(double t, Vec& out) const {
    if (empty()) throw std::logic_error("DenseSolution: empty");
    const double lo = breakpoints_.front(), hi = breakpoints_.back();
    const double slack = 64.0 * std::numeric_limits<double>::epsilon() *
                         std::max({1.0, std::abs(lo), std::abs(hi)});
    if (t < lo - slack || t > hi + slack)
        throw std::out_of_range("DenseSolution: t outside [t0, t1]");
    t = std::clamp(t, lo, hi);

    auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
    std::size_t seg = static_cast<std::size_t>(it - breakpoints_.begin());
    seg = (seg == 0) ? 0 : seg - 1;
    if (seg >= segment_coeffs_.size()) seg = segment_coeffs_.size() - 1;

    if (t == breakpoints_[seg]) {
        out = nodes_[seg];
        return;
    }
    if (t == breakpoints_[seg + 1]) {
        out = nodes_[seg + 1];
        return;
    }
    const double h = breakpoints_[seg + 1] - breakpoints_[seg];
    const double s = (t - breakpoints_[seg]) / h;
    const auto& c = segment_coeffs_[seg];
    const std::size_t n = c[0].size();
    out.assign(n, 0.0);
    for (std::size_t k = c.size(); k-- > 0;)
        for (std::size_t i = 0; i < n; ++i) out[i] = out[i] * s + c[k][i];
}

Vec DenseSolution::eval(double t) const {
    Vec out;
    eval_into(t, out);
    return out;
}

IntegrationResult integrate(const Rhs& rhs, const Vec& x0, double t0, double t1,
                            const IntegratorConfig& cfg) {
    if (!(t1 > t0)) throw std::invalid_argument("integrate: need t1 > t0");
    if (x0.empty()) throw std::invalid_argument("integrate: empty state");
    if (cfg.initial_step > 0.0 && cfg.max_step > 0.0 && cfg.initial_step > cfg.max_step)
        throw std::invalid_argument("integrate: initial_step exceeds max_step");
    switch (cfg.method) {
        case IntegratorMethod::AdaptiveRK54:
            return run_dopri54(rhs, x0, t0, t1, cfg);
        case IntegratorMethod::FixedRK4:
            return run_rk4(rhs, x0, t0, t1, cfg);
        case IntegratorMethod::ImplicitTrapezoidal:
            return run_trapezoidal(rhs, x0, t0, t1, cfg);
    }
    throw std::logic_error("integrate: unknown method");
}

}  // namespace cosim

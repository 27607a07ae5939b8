#include "cosim/models.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

namespace cosim {

namespace {

bool is_skew(const Mat& a) {
    if (a.rows != a.cols) return false;
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j)
            if (a(i, j) != -a(j, i)) return false;
    return true;
}

}  // namespace

LinearCoupledModel linear_unidirectional() {
    LinearCoupledModel m;
    m.A = Mat(2, 2);
    m.A(0, 0) = -1.0;
    m.A(0, 1) = 0.0;
    m.A(1, 0) = 1.0;
    m.A(1, 1) = -1.0;
    return m;
}

LinearCoupledModel linear_mutual() {
    LinearCoupledModel m;
    m.A = Mat(2, 2);
    m.A(0, 0) = 0.0;
    m.A(0, 1) = 1.0;
    m.A(1, 0) = -1.0;
    m.A(1, 1) = 0.0;
    return m;
}

CoupledSystem make_linear_coupled(const LinearCoupledModel& m) {
    if (m.A.rows != 2 || m.A.cols != 2)
        throw std::invalid_argument("make_linear_coupled: A must be 2x2");
    if (m.x0.size() != 2) throw std::invalid_argument("make_linear_coupled: x0 must have size 2");
    const Mat A = m.A;

    CoupledSystem sys;
    sys.x0 = m.x0;
    for (std::size_t i = 0; i < 2; ++i) {
        const double a_own = A(i, i);
        const double a_in = A(i, 1 - i);
        SubsystemBlock blk;
        blk.name = i == 0 ? "x1" : "x2";
        blk.state_dim = 1;
        blk.input_dim = 1;
        blk.output_dim = 1;
        blk.rhs = [a_own, a_in](double, const Vec& x, const Vec& u) {
            return Vec{a_own * x[0] + a_in * u[0]};
        };
        blk.output_map = [](double, const Vec& x, const Vec&) { return x; };
        blk.output_derivative_map = [a_own, a_in](double, const Vec& x, const Vec& u) {
            return Vec{a_own * x[0] + a_in * u[0]};
        };
        sys.blocks.push_back(std::move(blk));
    }
    sys.connections.push_back(Connection{0, 1, {0}, {0}, false, Connection::kNone});
    sys.connections.push_back(Connection{1, 0, {0}, {0}, false, Connection::kNone});

    if (is_skew(A))
        sys.energy = [](const Vec& x) { return 0.5 * (x[0] * x[0] + x[1] * x[1]); };
    const LinearCoupledModel model = m;
    sys.reference = [model](double t) { return linear_exact_state(model, t); };
    sys.monolithic_rhs = [A](double, const Vec& x) { return A * x; };
    return sys;
}

Vec linear_exact_state(const LinearCoupledModel& m, double t) {
    using cd = std::complex<double>;
    const double a = m.A(0, 0), b = m.A(0, 1), c = m.A(1, 0), d = m.A(1, 1);
    const cd tr = a + d;
    const cd det = a * d - b * c;
    const cd root = std::sqrt(tr * tr * 0.25 - det);
    const cd l1 = tr * 0.5 + root;
    const cd l2 = tr * 0.5 - root;
    const cd r1 = std::exp(l1 * t);
    const double scale = std::max({1.0, std::abs(l1), std::abs(l2)});
    const cd r2 = (std::abs(l1 - l2) < 1e-9 * scale) ? t * std::exp(l1 * t)
                                                     : (std::exp(l2 * t) - r1) / (l2 - l1);
    // exp(A t) = r1 I + r2 (A - l1 I)
    const cd e00 = r1 + r2 * (a - l1);
    const cd e01 = r2 * b;
    const cd e10 = r2 * c;
    const cd e11 = r1 + r2 * (d - l1);
    return Vec{(e00 * m.x0[0] + e01 * m.x0[1]).real(), (e10 * m.x0[0] + e11 * m.x0[1]).real()};
}

double spring_mass_energy(const SpringMassModel& m, double s, double v) {
    return 0.5 * m.mass * v * v + 0.5 * m.stiffness * s * s;
}

Vec spring_mass_state(const SpringMassModel& m, double t) {
    if (m.damping != 0.0)
        throw std::invalid_argument("spring_mass_state: closed form covers the undamped case");
    const double w = std::sqrt(m.stiffness / m.mass);
    const double x = std::sqrt(m.mass / m.stiffness) * m.v0 * std::sin(w * t) +
                     m.x0 * std::cos(w * t);
    const double v = m.v0 * std::cos(w * t) - w * m.x0 * std::sin(w * t);
    return Vec{x, v};
}

CoupledSystem make_spring_mass(const SpringMassModel& m) {
    if (m.mass <= 0.0 || m.stiffness <= 0.0 || m.damping < 0.0)
        throw std::invalid_argument("make_spring_mass: need mass > 0, stiffness > 0, damping >= 0");
    const double mm = m.mass, c = m.stiffness, d = m.damping;

    CoupledSystem sys;
    sys.x0 = Vec{m.x0, m.v0};

    SubsystemBlock spring;
    spring.name = "spring";
    spring.state_dim = 1;   // elongation
    spring.input_dim = 1;   // velocity of the mass
    spring.output_dim = 1;  // force on the mass
    spring.rhs = [](double, const Vec&, const Vec& u) { return Vec{u[0]}; };
    spring.output_map = [c](double, const Vec& x, const Vec&) { return Vec{-c * x[0]}; };
    spring.output_derivative_map = [c](double, const Vec&, const Vec& u) { return Vec{-c * u[0]}; };
    spring.power_map = [c](const Vec& x, const Vec& u) { return c * x[0] * u[0]; };
    spring.power_rate_map = [c](const Vec& x, const Vec& u, const Vec& ud) {
        return c * (u[0] * u[0] + x[0] * ud[0]);
    };
    spring.power_inverse = [c](double target, const Vec& x, const Vec&) {
        return target / (c * x[0]);
    };
    sys.blocks.push_back(std::move(spring));

    SubsystemBlock mass;
    mass.name = "mass";
    mass.state_dim = 1;   // velocity
    mass.input_dim = 1;   // spring force
    mass.output_dim = 1;  // velocity
    mass.rhs = [mm, d](double, const Vec& x, const Vec& u) {
        return Vec{(u[0] - d * x[0]) / mm};
    };
    mass.output_map = [](double, const Vec& x, const Vec&) { return x; };
    mass.output_derivative_map = [mm, d](double, const Vec& x, const Vec& u) {
        return Vec{(u[0] - d * x[0]) / mm};
    };
    mass.power_map = [](const Vec& x, const Vec& u) { return u[0] * x[0]; };
    mass.power_rate_map = [mm, d](const Vec& x, const Vec& u, const Vec& ud) {
        const double a = (u[0] - d * x[0]) / mm;
        return mm * a * a + x[0] * ud[0];
    };
    mass.power_inverse = [](double target, const Vec& x, const Vec&) { return target / x[0]; };
    sys.blocks.push_back(std::move(mass));

    sys.connections.push_back(Connection{0, 1, {0}, {0}, true, 0});
    sys.connections.push_back(Connection{1, 0, {0}, {0}, true, 0});

    const SpringMassModel model = m;
    sys.energy = [model](const Vec& x) { return spring_mass_energy(model, x[0], x[1]); };
    if (d == 0.0) sys.reference = [model](double t) { return spring_mass_state(model, t); };
    sys.monolithic_rhs = [mm, c, d](double, const Vec& x) {
        return Vec{x[1], (-c * x[0] - d * x[1]) / mm};
    };
    return sys;
}

Mat potential_production(const GradientFlowModel& m, const Vec& x) {
    const std::size_t nb = m.partition.size();
    if (nb == 0) throw std::invalid_argument("potential_production: empty partition");
    const Vec g = m.gradient(x);
    Mat p(nb, nb);
    for (std::size_t k = 0; k < nb; ++k)
        for (std::size_t l = 0; l < nb; ++l) {
            double s = 0.0;
            for (std::size_t i : m.partition[k])
                for (std::size_t j : m.partition[l]) s += g[i] * (-m.mobility(i, j)) * g[j];
            p(k, l) = s;
        }
    return p;
}

void mobility_split(const Mat& mobility, Mat& symmetric_part, Mat& skew_part) {
    if (mobility.rows != mobility.cols)
        throw std::invalid_argument("mobility_split: matrix must be square");
    const std::size_t n = mobility.rows;
    symmetric_part = Mat(n, n);
    skew_part = Mat(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            symmetric_part(i, j) = 0.5 * (mobility(i, j) + mobility(j, i));
            skew_part(i, j) = 0.5 * (mobility(i, j) - mobility(j, i));
        }
}

FlowCharacter dissipativity_check(const GradientFlowModel& m, const std::vector<Vec>& states,
                                  double tol) {
    if (states.empty()) throw std::invalid_argument("dissipativity_check: no states");
    bool any_dissipative = false;
    for (const Vec& x : states) {
        const Mat b = m.mobility * m.hessian(x);
        Mat s(b.rows, b.cols), k(b.rows, b.cols);
        mobility_split(b, s, k);
        double scale = 1.0;
        for (double v : b.a) scale = std::max(scale, std::abs(v));
        const Vec eig = symmetric_eigenvalues(s);
        const double lo = *std::min_element(eig.begin(), eig.end());
        const double hi = *std::max_element(eig.begin(), eig.end());
        if (std::abs(lo) <= tol * scale && std::abs(hi) <= tol * scale) continue;  // conservative
        if (lo >= -tol * scale) {
            any_dissipative = true;
            continue;
        }
        return FlowCharacter::Indefinite;
    }
    return any_dissipative ? FlowCharacter::Dissipative : FlowCharacter::Conservative;
}

GradientFlowModel hamiltonian_spring_mass_flow(double mass, double stiffness) {
    GradientFlowModel m;
    m.mobility = Mat(2, 2);
    m.mobility(0, 1) = -1.0;
    m.mobility(1, 0) = 1.0;
    m.potential = [mass, stiffness](const Vec& x) {
        return 0.5 * stiffness * x[0] * x[0] + 0.5 * x[1] * x[1] / mass;
    };
    m.gradient = [mass, stiffness](const Vec& x) { return Vec{stiffness * x[0], x[1] / mass}; };
    m.hessian = [mass, stiffness](const Vec&) {
        Mat h(2, 2);
        h(0, 0) = stiffness;
        h(1, 1) = 1.0 / mass;
        return h;
    };
    m.partition = {{0}, {1}};
    return m;
}

CoupledSystem make_gradient_flow_system(const GradientFlowModel& m, Vec x0) {
    const std::size_t n = m.mobility.rows;
    if (m.mobility.cols != n) throw std::invalid_argument("gradient flow: mobility must be square");
    if (x0.size() != n) throw std::invalid_argument("gradient flow: x0 dimension mismatch");
    std::size_t covered = 0;
    for (const auto& part : m.partition) covered += part.size();
    if (covered != n || m.partition.size() < 2)
        throw std::invalid_argument("gradient flow: partition must split all state indices");

    const GradientFlowModel model = m;
    auto full_rhs = [model](const Vec& x) {
        Vec g = model.gradient(x);
        Vec r = model.mobility * g;
        for (double& v : r) v = -v;
        return r;
    };

    CoupledSystem sys;
    sys.x0 = std::move(x0);
    const std::size_t nb = model.partition.size();

    // per block: the complement indices feeding its inputs, in global order
    std::vector<std::vector<std::size_t>> inputs_of(nb);
    for (std::size_t k = 0; k < nb; ++k) {
        std::vector<char> own(n, 0);
        for (std::size_t i : model.partition[k]) own[i] = 1;
        for (std::size_t i = 0; i < n; ++i)
            if (!own[i]) inputs_of[k].push_back(i);
    }

    for (std::size_t k = 0; k < nb; ++k) {
        const auto own = model.partition[k];
        const auto ext = inputs_of[k];
        auto assemble = [own, ext, n](const Vec& x, const Vec& u) {
            Vec full(n);
            for (std::size_t i = 0; i < own.size(); ++i) full[own[i]] = x[i];
            for (std::size_t i = 0; i < ext.size(); ++i) full[ext[i]] = u[i];
            return full;
        };

        SubsystemBlock blk;
        blk.name = "flow" + std::to_string(k);
        blk.state_dim = own.size();
        blk.input_dim = ext.size();
        blk.output_dim = own.size();
        blk.rhs = [assemble, own, full_rhs](double, const Vec& x, const Vec& u) {
            const Vec r = full_rhs(assemble(x, u));
            Vec out(own.size());
            for (std::size_t i = 0; i < own.size(); ++i) out[i] = r[own[i]];
            return out;
        };
        blk.output_map = [](double, const Vec& x, const Vec&) { return x; };
        blk.output_derivative_map = blk.rhs;

        if (nb == 2) {
            const std::size_t other = 1 - k;
            auto boundary_power = [model, assemble, k, other](const Vec& x, const Vec& u) {
                const Vec g = model.gradient(assemble(x, u));
                double s = 0.0;
                for (std::size_t i : model.partition[k])
                    for (std::size_t j : model.partition[other])
                        s += g[i] * (-model.mobility(i, j)) * g[j];
                return s;
            };
            blk.power_map = boundary_power;
            blk.power_inverse = [boundary_power](double target, const Vec& x, const Vec& u) {
                Vec probe = u;
                probe[0] = 0.0;
                const double p0 = boundary_power(x, probe);
                probe[0] = 1.0;
                const double p1 = boundary_power(x, probe);
                return (target - p0) / (p1 - p0);
            };
        }
        sys.blocks.push_back(std::move(blk));
    }

    for (std::size_t k = 0; k < nb; ++k)
        for (std::size_t l = 0; l < nb; ++l) {
            if (k == l) continue;
            // outputs of l that feed inputs of k
            Connection conn;
            conn.source = l;
            conn.target = k;
            for (std::size_t i = 0; i < inputs_of[k].size(); ++i) {
                const auto global = inputs_of[k][i];
                const auto& src_own = model.partition[l];
                const auto pos = std::find(src_own.begin(), src_own.end(), global);
                if (pos == src_own.end()) continue;
                conn.source_outputs.push_back(static_cast<std::size_t>(pos - src_own.begin()));
                conn.target_inputs.push_back(i);
            }
            if (conn.source_outputs.empty()) continue;
            if (nb == 2) {
                conn.power_coupled = true;
                conn.replaced_input = 0;
            }
            sys.connections.push_back(std::move(conn));
        }

    sys.energy = model.potential;
    sys.monolithic_rhs = [full_rhs](double, const Vec& x) { return full_rhs(x); };
    return sys;
}

CoupledSystem make_named_system(const std::string& name, const SpringMassModel& spring_mass,
                                const LinearCoupledModel& linear) {
    if (name == "spring-mass") return make_spring_mass(spring_mass);
    if (name == "linear-uni" || name == "linear-mutual") return make_linear_coupled(linear);
    if (name == "gradient-flow") {
        GradientFlowModel flow =
            hamiltonian_spring_mass_flow(spring_mass.mass, spring_mass.stiffness);
        return make_gradient_flow_system(flow,
                                         Vec{spring_mass.x0, spring_mass.mass * spring_mass.v0});
    }
    throw std::invalid_argument("unknown model '" + name + "'");
}

}  // namespace cosim

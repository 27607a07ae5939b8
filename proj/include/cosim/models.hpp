#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cosim/coupling.hpp"
#include "cosim/linalg.hpp"

namespace cosim {

/// A model split into subsystem blocks, ready for run_master, together with
/// the matching monolithic description used by reference computations.
struct CoupledSystem {
    std::vector<SubsystemBlock> blocks;
    std::vector<Connection> connections;
    Vec x0;
    std::function<double(const Vec&)> energy;            // null when undefined
    std::function<Vec(double)> reference;                // analytic state, null when unavailable
    std::function<Vec(double, const Vec&)> monolithic_rhs;
};

// ---------------------------------------------------------------------------
// linear two-by-two test problem, one scalar block per component

struct LinearCoupledModel {
    Mat A;  // 2x2
    Vec x0{1.0, 1.0};
};

LinearCoupledModel linear_unidirectional();  // lower-triangular A, x1 drives x2
LinearCoupledModel linear_mutual();          // rotation generator, conserves |x|^2

CoupledSystem make_linear_coupled(const LinearCoupledModel& m);

/// exp(A t) x0 for 2x2 A, eigenvalue form with the defective case handled.
Vec linear_exact_state(const LinearCoupledModel& m, double t);

// ---------------------------------------------------------------------------
// spring-mass oscillator split at the force/velocity boundary

struct SpringMassModel {
    double mass = 1.0;
    double stiffness = 1.0;
    double damping = 0.0;
    double x0 = 1.0;
    double v0 = 0.0;
};

CoupledSystem make_spring_mass(const SpringMassModel& m);

double spring_mass_energy(const SpringMassModel& m, double s, double v);
/// Closed-form undamped state {x, v}; rejects damped configurations.
Vec spring_mass_state(const SpringMassModel& m, double t);

// ---------------------------------------------------------------------------
// gradient flow dx/dt = -M grad(P)

struct GradientFlowModel {
    Mat mobility;
    std::function<double(const Vec&)> potential;
    std::function<Vec(const Vec&)> gradient;
    std::function<Mat(const Vec&)> hessian;
    std::vector<std::vector<std::size_t>> partition;  // index sets of the subsystems
};

/// Block production matrix at state x: entry (k, l) is the rate at which the
/// potential changes through the coupling of partition block k with block l
/// (diagonal entries are the blocks' internal rates).
Mat potential_production(const GradientFlowModel& m, const Vec& x);

/// Splits a mobility into symmetric and skew parts, M = S + K.
void mobility_split(const Mat& mobility, Mat& symmetric_part, Mat& skew_part);

enum class FlowCharacter { Dissipative, Conservative, Indefinite };

/// Classifies the flow via the symmetric part of M * hessian(P) across the
/// given states.
FlowCharacter dissipativity_check(const GradientFlowModel& m, const std::vector<Vec>& states,
                                  double tol = 1e-10);

/// Spring-mass oscillator written as a gradient flow of its energy.
GradientFlowModel hamiltonian_spring_mass_flow(double mass, double stiffness);

CoupledSystem make_gradient_flow_system(const GradientFlowModel& m, Vec x0);

/// Builds one of the named benchmark systems: "spring-mass", "linear-uni",
/// "linear-mutual" or "gradient-flow".
CoupledSystem make_named_system(const std::string& name, const SpringMassModel& spring_mass,
                                const LinearCoupledModel& linear);

}  // namespace cosim

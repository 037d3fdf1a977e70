#pragma once

#include <functional>
#include <string>
#include <vector>

#include "emtdq/model.hpp"

namespace emtdq {

struct IntegratorConfig {
    double rtol = 1e-7;
    double atol = 1e-9;
    double initial_step = 1e-6;
    double max_step = 0.05;
    int order = 4; // only the Rosenbrock 4(3) pair is implemented
};

struct SolverStats {
    long accepted = 0;
    long rejected = 0;
    long rhs_evals = 0;
    long jac_evals = 0;
    long lu_decomps = 0;
    double wall_seconds = 0.0;
};

struct EventSpec {
    double time;
    std::string description;
    std::function<void()> action; // optional; parameter switching is usually
                                  // carried by the models' time functions
};

// Adaptive-step solution with a third-order continuous extension per step.
class Trajectory {
public:
    std::vector<double> t;      // accepted nodes, size K+1
    std::vector<Vec> y;         // size K+1
    std::vector<Vec> cont2, cont3; // size K
    std::vector<std::string> names;
    int n_differential = 0;
    SolverStats stats;
    std::vector<std::pair<double, std::string>> events;

    double t_begin() const { return t.front(); }
    double t_end() const { return t.back(); }
    Vec at(double time) const; // dense output; throws when out of range
};

struct StepFailure : std::runtime_error {
    StepFailure(const std::string& msg, double t, int component)
        : std::runtime_error(msg), at_time(t), dominant_component(component) {}
    double at_time;
    int dominant_component;
};

Trajectory integrate(const Model& model, const Vec& y0, double t0, double t1,
                     const IntegratorConfig& cfg,
                     const std::vector<EventSpec>& events = {});

// --- BDF Newton-matrix utilities (conditioning study) -------------------

struct NewtonMatrixProbe {
    double h = 0.0;
    int k = 1;
    std::vector<double> alpha; // BDF coefficients, alpha[0] first
    Mat matrix;                // [alpha0 I - h f_x, -h f_z; g_x, g_z]
    double cond = 0.0;         // 1-norm condition estimate
};

NewtonMatrixProbe newton_iteration_matrix(const SemiExplicitDae& sys, double t,
                                          std::span<const double> x,
                                          std::span<const double> z,
                                          double h, int k);

struct ConditioningRow {
    double h;
    double cond;
};

struct ConditioningSweep {
    std::vector<ConditioningRow> rows;
    double slope = 0.0; // least-squares slope of log10(cond) vs log10(h)
};

ConditioningSweep conditioning_sweep(const SemiExplicitDae& sys, double t,
                                     std::span<const double> x,
                                     std::span<const double> z,
                                     std::span<const double> h_grid, int k);

} // namespace emtdq

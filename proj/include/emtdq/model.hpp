#pragma once

#include <span>
#include <string>
#include <vector>

#include "emtdq/dae.hpp"
#include "emtdq/linalg.hpp"

namespace emtdq {

// Integrable model M y' = F(t, y) with M = diag(1 ... 1, 0 ... 0): the
// first n_diff rows are differential, the rest algebraic. An ODE has
// n_diff == size.
class Model {
public:
    virtual ~Model() = default;

    virtual int size() const = 0;
    virtual int n_diff() const = 0;
    virtual const std::vector<std::string>& names() const = 0;

    virtual void rhs(double t, std::span<const double> y, std::span<double> dy) const = 0;

    // dF/dy; default is dense forward differences.
    virtual void jacobian(double t, std::span<const double> y, Mat& J) const;

    // dF/dt at fixed y; default is a forward difference in t.
    virtual void time_partial(double t, std::span<const double> y,
                              std::span<double> ft) const;

    // High-accuracy Jacobian for equilibrium work; defaults to jacobian().
    virtual void refine_jacobian(double t, std::span<const double> y, Mat& J) const {
        jacobian(t, y, J);
    }
};

// Index-1 semi-explicit DAE as a model: y = [x; z], F = [f; g], with the
// exact expression-graph Jacobian and input-derivative time partial.
class DaeModel : public Model {
public:
    explicit DaeModel(std::shared_ptr<const SemiExplicitDae> sys);

    int size() const override { return sys_->n_eq(); }
    int n_diff() const override { return sys_->n_diff(); }
    const std::vector<std::string>& names() const override { return names_; }

    void rhs(double t, std::span<const double> y, std::span<double> dy) const override;
    void jacobian(double t, std::span<const double> y, Mat& J) const override;
    void time_partial(double t, std::span<const double> y,
                      std::span<double> ft) const override;

    const SemiExplicitDae& system() const { return *sys_; }

private:
    std::shared_ptr<const SemiExplicitDae> sys_;
    std::vector<std::string> names_;
    mutable EvaluationWorkspace ws_; // one integration is single-threaded
};

} // namespace emtdq

#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "emtdq/expr.hpp"
#include "emtdq/linalg.hpp"

namespace emtdq {

// Time-function input with an analytic derivative. Piecewise-constant
// inputs register a zero derivative; the discontinuity itself is an
// integrator event, not part of the derivative.
struct InputSignal {
    std::function<double(double)> value;
    std::function<double(double)> derivative;
};

// Binary structural dependence matrix: one derivative column per
// differential variable followed by the algebraic columns. The f-rows of
// the derivative block form the identity; g-rows of that block are zero.
struct IncidenceMatrix {
    int rows = 0;
    int diff_cols = 0;
    int alg_cols = 0;
    std::vector<char> bits; // row-major

    int cols() const { return diff_cols + alg_cols; }
    bool bit(int r, int c) const { return bits[static_cast<std::size_t>(r) * cols() + c] != 0; }
    void set(int r, int c) { bits[static_cast<std::size_t>(r) * cols() + c] = 1; }
};

// Per-thread scratch for expression evaluation.
struct EvaluationWorkspace {
    std::vector<double> var_values;
    std::vector<double> node_values;
    double stamp = 0.0;
};

struct GzSingularity {
    bool singular = false;
    int nullity = 0;
};

// Semi-explicit DAE: xdot = f(t,x,z), 0 = g(t,x,z), over a shared
// expression graph. Immutable once constructed.
class SemiExplicitDae {
public:
    struct Parts {
        std::shared_ptr<ExpressionGraph> graph;
        double omega0 = 0.0;
        std::vector<VarId> diff_vars;
        std::vector<NodeId> f; // aligned with diff_vars
        std::vector<VarId> alg_vars;
        std::vector<NodeId> g;
        std::vector<VarId> input_vars;
        std::vector<InputSignal> input_fns; // aligned with input_vars
    };

    explicit SemiExplicitDae(Parts parts);

    int n_diff() const { return static_cast<int>(diff_vars_.size()); }
    int n_alg() const { return static_cast<int>(alg_vars_.size()); }
    int n_eq() const { return n_diff() + n_alg(); }
    double omega0() const { return omega0_; }

    const ExpressionGraph& graph() const { return *graph_; }
    std::shared_ptr<ExpressionGraph> graph_ptr() const { return graph_; }
    ExpressionGraph& mutable_graph() { return *graph_; }

    const std::vector<VarId>& diff_vars() const { return diff_vars_; }
    const std::vector<VarId>& alg_vars() const { return alg_vars_; }
    const std::vector<NodeId>& f_equations() const { return f_; }
    const std::vector<NodeId>& g_equations() const { return g_; }
    const std::vector<VarId>& input_vars() const { return input_vars_; }
    const std::vector<InputSignal>& input_fns() const { return input_fns_; }

    std::string var_name(VarId v) const { return graph_->var_info(v).name; }
    std::vector<std::string> diff_names() const;
    std::vector<std::string> alg_names() const;

    EvaluationWorkspace make_workspace() const;

    // Fills ws.var_values from (t, x, z) and runs a full graph pass.
    void load_point(double t, std::span<const double> x, std::span<const double> z,
                    EvaluationWorkspace& ws) const;

    // [f(t,x,z) - xdot ; g(t,x,z)] in system row order.
    Vec residual(double t, std::span<const double> x, std::span<const double> z,
                 std::span<const double> xdot, EvaluationWorkspace& ws) const;

    // Dense [f_x f_z; g_x g_z]; columns ordered diff then alg.
    Mat jacobian(double t, std::span<const double> x, std::span<const double> z,
                 EvaluationWorkspace& ws) const;

    // d(residual)/dt from registered input derivatives.
    Vec time_partial(double t, std::span<const double> x, std::span<const double> z,
                     EvaluationWorkspace& ws) const;

    IncidenceMatrix incidence() const;

    GzSingularity gz_singularity(double t, std::span<const double> x,
                                 std::span<const double> z) const;

    // Text block consumed by the detect command.
    std::string summary() const;

    // Caches partial-derivative nodes for every structural (eq, var) pair.
    // Called once at the end of the build phase; mutates the graph.
    void prepare_derivatives();

private:
    NodeId equation(int row) const { return row < n_diff() ? f_[row] : g_[row - n_diff()]; }

    std::shared_ptr<ExpressionGraph> graph_;
    double omega0_;
    std::vector<VarId> diff_vars_, alg_vars_, input_vars_;
    std::vector<NodeId> f_, g_;
    std::vector<InputSignal> input_fns_;

    std::vector<int> col_of_var_;               // var id -> jacobian column or -1
    std::vector<std::vector<std::pair<int, NodeId>>> jac_; // per row: (col, dnode)
    std::vector<std::vector<NodeId>> input_partials_;      // per row, aligned with input_vars_
    bool prepared_ = false;
};

} // namespace emtdq

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "emtdq/dae.hpp"
#include "emtdq/structural.hpp"

namespace emtdq {

// One Phase-I pass: q constraints differentiated, q dependent differential
// variables recategorized, q pseudo-derivative symbols created. Net effect
// +q equations, +2q algebraic variables, -q differential variables.
struct ReductionPlan {
    std::vector<int> constraint_rows; // system rows of the raw system
    std::vector<VarId> selected;      // dependent differential variable per constraint
    std::vector<VarId> pseudos;       // pseudo-derivative symbol per constraint
    std::vector<NodeId> hidden;       // hidden-constraint equation per constraint
};

struct ReducedSystem {
    std::shared_ptr<SemiExplicitDae> sys; // index-1
    ReductionPlan plan;
};

// Deterministic dependent-variable selection: admissible candidates are
// differential variables in which the constraint is affine with a nonzero
// constant coefficient; among those, fewest uses in other equations wins,
// ties broken by lowest variable id. Constraints sharing candidates are
// processed as one group so no variable is selected twice.
std::vector<VarId> select_dependent_variables(SemiExplicitDae& sys,
                                              const std::vector<int>& constraint_rows);

// Appends d/dt of each constraint with xdot bound to the f-equations,
// selected variables bound to their pseudo symbols, and inputs bound to
// registered derivative signals. Returns the hidden-constraint nodes.
std::vector<NodeId> differentiate_constraints(SemiExplicitDae& sys,
                                              const std::vector<int>& constraint_rows,
                                              const std::vector<VarId>& selected,
                                              const std::vector<VarId>& pseudos,
                                              std::vector<VarId>* new_inputs,
                                              std::vector<InputSignal>* new_input_fns);

// Full Phase I. Throws if the result does not classify index-1 (would mean
// index >= 3, out of scope).
ReducedSystem reduce_index_once(SemiExplicitDae& raw);

// Phase II helper: inlines scalar algebraic blocks that solve explicitly
// (linear, nonzero constant coefficient) into all downstream equations.
struct SubstitutionResult {
    std::shared_ptr<SemiExplicitDae> sys;
    std::vector<std::pair<VarId, NodeId>> inlined; // variable -> solution node
};
SubstitutionResult forward_substitute(SemiExplicitDae& sys, const BltOrder& blt);

// Tearing: reduces a linear algebraic loop to an m x m runtime solve over
// the tearing variables. Non-tearing block variables are chained through
// explicitly solvable equations; A and b entries are expression nodes.
struct TornBlock {
    std::vector<VarId> tearing;
    std::vector<int> residual_rows; // system rows
    std::vector<std::pair<VarId, NodeId>> chain; // causal explicit solutions
    std::vector<std::vector<NodeId>> A; // m x m coefficient nodes
    std::vector<NodeId> b;              // m right-hand-side nodes
};

TornBlock tear_linear_block(SemiExplicitDae& sys, const BltBlock& block,
                            std::span<const VarId> tearing,
                            std::span<const int> residual_rows);

// Mechanical tearing-variable choice for a linear block: greedy causal
// chaining with promotion of the most-used variable on stalls.
TornBlock auto_tear(SemiExplicitDae& sys, const BltBlock& block);

// Solves the algebraic variables of an index-1 system block by block
// (linear blocks only), giving the system an ODE view over x.
class AlgebraicSolver {
public:
    explicit AlgebraicSolver(std::shared_ptr<const SemiExplicitDae> sys);

    // z in system algebraic order.
    Vec solve_algebraic(double t, std::span<const double> x) const;
    // f(t, x, z(x)) over the differential variables.
    Vec ode_rhs(double t, std::span<const double> x) const;

    const SemiExplicitDae& system() const { return *sys_; }

private:
    struct Block {
        std::vector<NodeId> equations;
        std::vector<VarId> vars;
        std::vector<NodeId> closure; // nodes needed, ascending
    };
    void eval_closure(const std::vector<NodeId>& closure,
                      std::vector<double>& var_values,
                      std::vector<double>& node_values) const;

    std::shared_ptr<const SemiExplicitDae> sys_;
    std::vector<Block> blocks_;
    std::vector<NodeId> f_closure_;
};

// Text for the reduce --report command: q, selections, block sizes before
// and after tearing.
std::string reduction_report(SemiExplicitDae& raw);

} // namespace emtdq

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace emtdq {

// Scalar expression DAG with hash-consing. Node ids are topological by
// construction: every child id is strictly smaller than its parent id.
// The op set is the minimum needed for balanced EMT-dq equations; sqrt
// exists solely for voltage-magnitude sensing.

enum class Op : std::uint8_t {
    Const, Var, DerivRef, Add, Sub, Mul, Div, Neg, Sin, Cos, Sqrt
};

enum class VarKind : std::uint8_t {
    Differential, Algebraic, PseudoDerivative, Input
};

using NodeId = std::int32_t;
using VarId = std::int32_t;

struct Node {
    Op op;
    NodeId a = -1; // first child, or variable id for Var/DerivRef
    NodeId b = -1; // second child for binary ops
    double value = 0.0; // Const only
};

struct VarInfo {
    std::string name;
    VarKind kind;
};

// Checked variable assignment for single-node evaluation. Batch paths use
// EvaluationWorkspace in dae.hpp instead.
class Valuation {
public:
    void set(VarId v, double x);
    void set_deriv(VarId v, double x);
    bool has(VarId v) const;
    bool has_deriv(VarId v) const;
    double get(VarId v) const;
    double get_deriv(VarId v) const;

private:
    std::vector<double> vals_, derivs_;
    std::vector<char> has_, has_deriv_;
};

struct LinearForm {
    std::vector<NodeId> coefficients; // one per requested variable
    NodeId remainder;
};

class ExpressionGraph {
public:
    // Variable table. Registration is idempotent by name; re-registering
    // with a different kind is an error.
    VarId add_variable(const std::string& name, VarKind kind);
    std::optional<VarId> find_variable(const std::string& name) const;
    void reclassify(VarId v, VarKind kind);
    const VarInfo& var_info(VarId v) const;
    std::size_t var_count() const { return vars_.size(); }

    // Node constructors. All deduplicate; the 0/1 identities (x+0, x*1,
    // x*0, x-0, x/1) collapse at construction time.
    NodeId constant(double v);
    NodeId var(VarId v);
    NodeId deriv(VarId v); // derivative-ref; differential or pseudo-derivative only
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId div(NodeId a, NodeId b);
    NodeId neg(NodeId a);
    NodeId sin(NodeId a);
    NodeId cos(NodeId a);
    NodeId sqrt(NodeId a);

    // Generic constructor used by tooling; arity checked against op.
    NodeId add_expression(Op op, std::span<const NodeId> children);

    double evaluate(NodeId n, const Valuation& val) const;

    // Batch evaluation: fills values[i] for every node i < node_count().
    // var_values must cover the whole variable table. DerivRef nodes are
    // rejected here (they never appear in system equations).
    void eval_all(std::span<const double> var_values,
                  std::span<double> values) const;

    // d/dt by the chain rule. bindings maps every reachable non-input
    // variable (and any reachable input) to the node standing for its
    // time derivative.
    NodeId differentiate_time(NodeId n,
                              const std::unordered_map<VarId, NodeId>& bindings);

    // Partial derivative with respect to one variable; results memoized.
    NodeId differentiate_partial(NodeId n, VarId v);

    // Affine decomposition over the listed variables. Returns nothing if
    // any coefficient structurally depends on a listed variable.
    std::optional<LinearForm> extract_linear_form(NodeId n,
                                                  std::span<const VarId> over);

    // Rebuild n with Var nodes replaced per map. New nodes dedup as usual.
    NodeId substitute(NodeId n, const std::unordered_map<VarId, NodeId>& map);

    bool depends_on(NodeId n, VarId v) const;
    void collect_vars(NodeId n, std::vector<char>& mark) const;

    std::string dump(NodeId n) const; // prefix text, e.g. (sub i1R (add i2R i3R))

    std::size_t node_count() const { return nodes_.size(); }
    const Node& node(NodeId n) const { return nodes_.at(n); }

private:
    NodeId intern(Node nd);
    NodeId check(NodeId n) const;

    std::vector<Node> nodes_;
    std::unordered_map<std::uint64_t, std::vector<NodeId>> buckets_;
    std::vector<VarInfo> vars_;
    std::unordered_map<std::string, VarId> var_names_;
    std::unordered_map<std::uint64_t, NodeId> partial_memo_;
};

} // namespace emtdq

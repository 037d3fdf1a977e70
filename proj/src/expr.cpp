#include "emtdq/expr.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <functional>
#include <stdexcept>

namespace emtdq {

namespace {

bool is_binary(Op op) {
    return op == Op::Add || op == Op::Sub || op == Op::Mul || op == Op::Div;
}

bool is_unary(Op op) {
    return op == Op::Neg || op == Op::Sin || op == Op::Cos || op == Op::Sqrt;
}

const char* op_name(Op op) {
    switch (op) {
        case Op::Add: return "add";
        case Op::Sub: return "sub";
        case Op::Mul: return "mul";
        case Op::Div: return "div";
        case Op::Neg: return "neg";
        case Op::Sin: return "sin";
        case Op::Cos: return "cos";
        case Op::Sqrt: return "sqrt";
        default: return "?";
    }
}

std::uint64_t mix(std::uint64_t h, std::uint64_t x) {
    h ^= x + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    return h;
}

std::uint64_t node_hash(const Node& n) {
    std::uint64_t h = static_cast<std::uint64_t>(n.op);
    h = mix(h, static_cast<std::uint64_t>(static_cast<std::uint32_t>(n.a)));
    h = mix(h, static_cast<std::uint64_t>(static_cast<std::uint32_t>(n.b)));
    h = mix(h, std::bit_cast<std::uint64_t>(n.value));
    return h;
}

bool node_eq(const Node& x, const Node& y) {
    return x.op == y.op && x.a == y.a && x.b == y.b &&
           std::bit_cast<std::uint64_t>(x.value) == std::bit_cast<std::uint64_t>(y.value);
}

} // namespace

void Valuation::set(VarId v, double x) {
    if (static_cast<std::size_t>(v) >= vals_.size()) {
        vals_.resize(v + 1, 0.0);
        has_.resize(v + 1, 0);
    }
    vals_[v] = x;
    has_[v] = 1;
}

void Valuation::set_deriv(VarId v, double x) {
    if (static_cast<std::size_t>(v) >= derivs_.size()) {
        derivs_.resize(v + 1, 0.0);
        has_deriv_.resize(v + 1, 0);
    }
    derivs_[v] = x;
    has_deriv_[v] = 1;
}

bool Valuation::has(VarId v) const {
    return static_cast<std::size_t>(v) < has_.size() && has_[v];
}

bool Valuation::has_deriv(VarId v) const {
    return static_cast<std::size_t>(v) < has_deriv_.size() && has_deriv_[v];
}

double Valuation::get(VarId v) const { return vals_[v]; }
double Valuation::get_deriv(VarId v) const { return derivs_[v]; }

VarId ExpressionGraph::add_variable(const std::string& name, VarKind kind) {
    auto it = var_names_.find(name);
    if (it != var_names_.end()) {
        if (vars_[it->second].kind != kind)
            throw std::invalid_argument("variable '" + name + "' already registered with different kind");
        return it->second;
    }
    VarId id = static_cast<VarId>(vars_.size());
    vars_.push_back({name, kind});
    var_names_.emplace(name, id);
    return id;
}

std::optional<VarId> ExpressionGraph::find_variable(const std::string& name) const {
    auto it = var_names_.find(name);
    if (it == var_names_.end()) return std::nullopt;
    return it->second;
}

void ExpressionGraph::reclassify(VarId v, VarKind kind) {
    vars_.at(v).kind = kind;
}

const VarInfo& ExpressionGraph::var_info(VarId v) const { return vars_.at(v); }

NodeId ExpressionGraph::check(NodeId n) const {
    if (n < 0 || static_cast<std::size_t>(n) >= nodes_.size())
        throw std::out_of_range("unknown node id " + std::to_string(n));
    return n;
}

NodeId ExpressionGraph::intern(Node nd) {
    std::uint64_t h = node_hash(nd);
    auto& bucket = buckets_[h];
    for (NodeId id : bucket)
        if (node_eq(nodes_[id], nd)) return id;
    NodeId id = static_cast<NodeId>(nodes_.size());
    nodes_.push_back(nd);
    bucket.push_back(id);
    return id;
}

NodeId ExpressionGraph::constant(double v) {
    if (!std::isfinite(v))
        throw std::invalid_argument("non-finite constant");
    if (v == 0.0) v = 0.0; // normalize -0.0
    return intern({Op::Const, -1, -1, v});
}

NodeId ExpressionGraph::var(VarId v) {
    if (static_cast<std::size_t>(v) >= vars_.size())
        throw std::out_of_range("unknown variable id");
    return intern({Op::Var, v, -1, 0.0});
}

NodeId ExpressionGraph::deriv(VarId v) {
    if (static_cast<std::size_t>(v) >= vars_.size())
        throw std::out_of_range("unknown variable id");
    VarKind k = vars_[v].kind;
    if (k != VarKind::Differential && k != VarKind::PseudoDerivative)
        throw std::invalid_argument("derivative-ref of non-differential variable '" + vars_[v].name + "'");
    return intern({Op::DerivRef, v, -1, 0.0});
}

NodeId ExpressionGraph::add(NodeId a, NodeId b) {
    check(a); check(b);
    if (nodes_[a].op == Op::Const && nodes_[a].value == 0.0) return b;
    if (nodes_[b].op == Op::Const && nodes_[b].value == 0.0) return a;
    return intern({Op::Add, a, b, 0.0});
}

NodeId ExpressionGraph::sub(NodeId a, NodeId b) {
    check(a); check(b);
    if (nodes_[b].op == Op::Const && nodes_[b].value == 0.0) return a;
    return intern({Op::Sub, a, b, 0.0});
}

NodeId ExpressionGraph::mul(NodeId a, NodeId b) {
    check(a); check(b);
    if (nodes_[a].op == Op::Const) {
        if (nodes_[a].value == 0.0) return constant(0.0);
        if (nodes_[a].value == 1.0) return b;
    }
    if (nodes_[b].op == Op::Const) {
        if (nodes_[b].value == 0.0) return constant(0.0);
        if (nodes_[b].value == 1.0) return a;
    }
    return intern({Op::Mul, a, b, 0.0});
}

NodeId ExpressionGraph::div(NodeId a, NodeId b) {
    check(a); check(b);
    if (nodes_[b].op == Op::Const && nodes_[b].value == 1.0) return a;
    return intern({Op::Div, a, b, 0.0});
}

NodeId ExpressionGraph::neg(NodeId a) {
    check(a);
    if (nodes_[a].op == Op::Const && nodes_[a].value == 0.0) return a;
    return intern({Op::Neg, a, -1, 0.0});
}

NodeId ExpressionGraph::sin(NodeId a) { check(a); return intern({Op::Sin, a, -1, 0.0}); }
NodeId ExpressionGraph::cos(NodeId a) { check(a); return intern({Op::Cos, a, -1, 0.0}); }
NodeId ExpressionGraph::sqrt(NodeId a) { check(a); return intern({Op::Sqrt, a, -1, 0.0}); }

NodeId ExpressionGraph::add_expression(Op op, std::span<const NodeId> ch) {
    if (is_binary(op)) {
        if (ch.size() != 2) throw std::invalid_argument("binary op needs 2 children");
        switch (op) {
            case Op::Add: return add(ch[0], ch[1]);
            case Op::Sub: return sub(ch[0], ch[1]);
            case Op::Mul: return mul(ch[0], ch[1]);
            default: return div(ch[0], ch[1]);
        }
    }
    if (is_unary(op)) {
        if (ch.size() != 1) throw std::invalid_argument("unary op needs 1 child");
        switch (op) {
            case Op::Neg: return neg(ch[0]);
            case Op::Sin: return sin(ch[0]);
            case Op::Cos: return cos(ch[0]);
            default: return sqrt(ch[0]);
        }
    }
    throw std::invalid_argument("add_expression: use constant()/var()/deriv() for leaf nodes");
}

double ExpressionGraph::evaluate(NodeId n, const Valuation& val) const {
    check(n);
    // Evaluate only the reachable subgraph so unrelated variables need no entry.
    std::vector<char> reach(n + 1, 0);
    std::vector<NodeId> stack{n};
    reach[n] = 1;
    while (!stack.empty()) {
        NodeId id = stack.back();
        stack.pop_back();
        const Node& nd = nodes_[id];
        if (nd.op == Op::Const || nd.op == Op::Var || nd.op == Op::DerivRef) continue;
        if (!reach[nd.a]) { reach[nd.a] = 1; stack.push_back(nd.a); }
        if (is_binary(nd.op) && !reach[nd.b]) { reach[nd.b] = 1; stack.push_back(nd.b); }
    }
    std::vector<double> v(n + 1, 0.0);
    for (NodeId id = 0; id <= n; ++id) {
        if (!reach[id]) continue;
        const Node& nd = nodes_[id];
        switch (nd.op) {
            case Op::Const: v[id] = nd.value; break;
            case Op::Var:
                if (!val.has(nd.a))
                    throw std::runtime_error("missing valuation for variable '" + vars_[nd.a].name + "'");
                v[id] = val.get(nd.a);
                break;
            case Op::DerivRef:
                if (!val.has_deriv(nd.a))
                    throw std::runtime_error("missing derivative valuation for variable '" + vars_[nd.a].name + "'");
                v[id] = val.get_deriv(nd.a);
                break;
            case Op::Add: v[id] = v[nd.a] + v[nd.b]; break;
            case Op::Sub: v[id] = v[nd.a] - v[nd.b]; break;
            case Op::Mul: v[id] = v[nd.a] * v[nd.b]; break;
            case Op::Div:
                if (v[nd.b] == 0.0)
                    throw std::runtime_error("division by zero at node " + std::to_string(id));
                v[id] = v[nd.a] / v[nd.b];
                break;
            case Op::Neg: v[id] = -v[nd.a]; break;
            case Op::Sin: v[id] = std::sin(v[nd.a]); break;
            case Op::Cos: v[id] = std::cos(v[nd.a]); break;
            case Op::Sqrt: v[id] = std::sqrt(v[nd.a]); break;
        }
    }
    return v[n];
}

void ExpressionGraph::eval_all(std::span<const double> var_values,
                               std::span<double> values) const {
    if (var_values.size() < vars_.size())
        throw std::invalid_argument("eval_all: variable value array too small");
    if (values.size() < nodes_.size())
        throw std::invalid_argument("eval_all: node value array too small");
    const std::size_t n = nodes_.size();
    for (std::size_t id = 0; id < n; ++id) {
        const Node& nd = nodes_[id];
        double* v = values.data();
        switch (nd.op) {
            case Op::Const: v[id] = nd.value; break;
            case Op::Var: v[id] = var_values[nd.a]; break;
            case Op::DerivRef:
                throw std::runtime_error("derivative-ref not evaluable in batch mode");
            case Op::Add: v[id] = v[nd.a] + v[nd.b]; break;
            case Op::Sub: v[id] = v[nd.a] - v[nd.b]; break;
            case Op::Mul: v[id] = v[nd.a] * v[nd.b]; break;
            case Op::Div: v[id] = v[nd.a] / v[nd.b]; break;
            case Op::Neg: v[id] = -v[nd.a]; break;
            case Op::Sin: v[id] = std::sin(v[nd.a]); break;
            case Op::Cos: v[id] = std::cos(v[nd.a]); break;
            case Op::Sqrt: v[id] = std::sqrt(v[nd.a]); break;
        }
    }
}

NodeId ExpressionGraph::differentiate_time(
    NodeId n, const std::unordered_map<VarId, NodeId>& bindings) {
    check(n);
    std::unordered_map<NodeId, NodeId> memo;
    std::function<NodeId(NodeId)> go = [&](NodeId id) -> NodeId {
        auto it = memo.find(id);
        if (it != memo.end()) return it->second;
        const Node nd = nodes_[id];
        NodeId r;
        switch (nd.op) {
            case Op::Const:
                r = constant(0.0);
                break;
            case Op::Var: {
                auto b = bindings.find(nd.a);
                if (b == bindings.end())
                    throw std::runtime_error("unbound variable '" + vars_[nd.a].name +
                                             "' in time differentiation");
                r = b->second;
                break;
            }
            case Op::DerivRef:
                throw std::runtime_error("cannot time-differentiate a derivative-ref");
            case Op::Add: r = add(go(nd.a), go(nd.b)); break;
            case Op::Sub: r = sub(go(nd.a), go(nd.b)); break;
            case Op::Mul: r = add(mul(go(nd.a), nd.b), mul(nd.a, go(nd.b))); break;
            case Op::Div:
                r = sub(div(go(nd.a), nd.b), div(mul(nd.a, go(nd.b)), mul(nd.b, nd.b)));
                break;
            case Op::Neg: r = neg(go(nd.a)); break;
            case Op::Sin: r = mul(cos(nd.a), go(nd.a)); break;
            case Op::Cos: r = neg(mul(sin(nd.a), go(nd.a))); break;
            case Op::Sqrt: r = div(go(nd.a), mul(constant(2.0), sqrt(nd.a))); break;
        }
        memo.emplace(id, r);
        return r;
    };
    return go(n);
}

NodeId ExpressionGraph::differentiate_partial(NodeId n, VarId v) {
    check(n);
    std::uint64_t key = (static_cast<std::uint64_t>(n) << 32) |
                        static_cast<std::uint32_t>(v);
    auto hit = partial_memo_.find(key);
    if (hit != partial_memo_.end()) return hit->second;

    const Node nd = nodes_[n];
    NodeId r;
    switch (nd.op) {
        case Op::Const: r = constant(0.0); break;
        case Op::Var: r = constant(nd.a == v ? 1.0 : 0.0); break;
        case Op::DerivRef: r = constant(0.0); break;
        case Op::Add: r = add(differentiate_partial(nd.a, v), differentiate_partial(nd.b, v)); break;
        case Op::Sub: r = sub(differentiate_partial(nd.a, v), differentiate_partial(nd.b, v)); break;
        case Op::Mul:
            r = add(mul(differentiate_partial(nd.a, v), nd.b),
                    mul(nd.a, differentiate_partial(nd.b, v)));
            break;
        case Op::Div:
            r = sub(div(differentiate_partial(nd.a, v), nd.b),
                    div(mul(nd.a, differentiate_partial(nd.b, v)), mul(nd.b, nd.b)));
            break;
        case Op::Neg: r = neg(differentiate_partial(nd.a, v)); break;
        case Op::Sin: r = mul(cos(nd.a), differentiate_partial(nd.a, v)); break;
        case Op::Cos: r = neg(mul(sin(nd.a), differentiate_partial(nd.a, v))); break;
        case Op::Sqrt:
            r = div(differentiate_partial(nd.a, v), mul(constant(2.0), sqrt(nd.a)));
            break;
        default: throw std::logic_error("unreachable");
    }
    partial_memo_.emplace(key, r);
    return r;
}

std::optional<LinearForm> ExpressionGraph::extract_linear_form(
    NodeId n, std::span<const VarId> over) {
    check(n);
    LinearForm form;
    form.coefficients.reserve(over.size());
    for (VarId v : over) {
        NodeId c = differentiate_partial(n, v);
        for (VarId u : over)
            if (depends_on(c, u)) return std::nullopt;
        form.coefficients.push_back(c);
    }
    std::unordered_map<VarId, NodeId> zeros;
    NodeId z = constant(0.0);
    for (VarId v : over) zeros.emplace(v, z);
    form.remainder = substitute(n, zeros);
    return form;
}

NodeId ExpressionGraph::substitute(NodeId n,
                                   const std::unordered_map<VarId, NodeId>& map) {
    check(n);
    std::unordered_map<NodeId, NodeId> memo;
    std::function<NodeId(NodeId)> go = [&](NodeId id) -> NodeId {
        auto it = memo.find(id);
        if (it != memo.end()) return it->second;
        const Node nd = nodes_[id];
        NodeId r = id;
        switch (nd.op) {
            case Op::Const: break;
            case Op::Var: {
                auto m = map.find(nd.a);
                if (m != map.end()) r = m->second;
                break;
            }
            case Op::DerivRef:
                if (map.count(nd.a))
                    throw std::invalid_argument("cannot substitute variable with live derivative-ref");
                break;
            case Op::Add: r = add(go(nd.a), go(nd.b)); break;
            case Op::Sub: r = sub(go(nd.a), go(nd.b)); break;
            case Op::Mul: r = mul(go(nd.a), go(nd.b)); break;
            case Op::Div: r = div(go(nd.a), go(nd.b)); break;
            case Op::Neg: r = neg(go(nd.a)); break;
            case Op::Sin: r = sin(go(nd.a)); break;
            case Op::Cos: r = cos(go(nd.a)); break;
            case Op::Sqrt: r = sqrt(go(nd.a)); break;
        }
        memo.emplace(id, r);
        return r;
    };
    return go(n);
}

bool ExpressionGraph::depends_on(NodeId n, VarId v) const {
    check(n);
    std::vector<NodeId> stack{n};
    std::vector<char> seen(n + 1, 0);
    seen[n] = 1;
    while (!stack.empty()) {
        NodeId id = stack.back();
        stack.pop_back();
        const Node& nd = nodes_[id];
        if ((nd.op == Op::Var || nd.op == Op::DerivRef) && nd.a == v) return true;
        if (nd.op == Op::Const || nd.op == Op::Var || nd.op == Op::DerivRef) continue;
        if (!seen[nd.a]) { seen[nd.a] = 1; stack.push_back(nd.a); }
        if (is_binary(nd.op) && !seen[nd.b]) { seen[nd.b] = 1; stack.push_back(nd.b); }
    }
    return false;
}

void ExpressionGraph::collect_vars(NodeId n, std::vector<char>& mark) const {
    check(n);
    mark.resize(vars_.size(), 0);
    std::vector<NodeId> stack{n};
    std::vector<char> seen(n + 1, 0);
    seen[n] = 1;
    while (!stack.empty()) {
        NodeId id = stack.back();
        stack.pop_back();
        const Node& nd = nodes_[id];
        if (nd.op == Op::Var || nd.op == Op::DerivRef) {
            mark[nd.a] = 1;
            continue;
        }
        if (nd.op == Op::Const) continue;
        if (!seen[nd.a]) { seen[nd.a] = 1; stack.push_back(nd.a); }
        if (is_binary(nd.op) && !seen[nd.b]) { seen[nd.b] = 1; stack.push_back(nd.b); }
    }
}

std::string ExpressionGraph::dump(NodeId n) const {
    check(n);
    const Node& nd = nodes_[n];
    switch (nd.op) {
        case Op::Const: {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%g", nd.value);
            return buf;
        }
        case Op::Var: return vars_[nd.a].name;
        case Op::DerivRef: return "(ddt " + vars_[nd.a].name + ")";
        default:
            if (is_binary(nd.op))
                return std::string("(") + op_name(nd.op) + " " + dump(nd.a) + " " + dump(nd.b) + ")";
            return std::string("(") + op_name(nd.op) + " " + dump(nd.a) + ")";
    }
}

} // namespace emtdq

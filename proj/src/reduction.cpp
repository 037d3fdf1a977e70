#include "emtdq/reduction.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

namespace emtdq {

namespace {

bool is_constant_expr(const ExpressionGraph& g, NodeId n) {
    std::vector<char> mark;
    g.collect_vars(n, mark);
    for (char c : mark)
        if (c) return false;
    return true;
}

double eval_constant(const ExpressionGraph& g, NodeId n) {
    Valuation empty;
    return g.evaluate(n, empty);
}

// Affine in v with a nonzero constant coefficient; returns the coefficient
// and remainder nodes when admissible.
struct PivotForm {
    NodeId coeff;
    NodeId remainder;
    double coeff_value;
};

std::optional<PivotForm> constant_pivot(ExpressionGraph& g, NodeId eq, VarId v) {
    VarId over[1] = {v};
    auto lf = g.extract_linear_form(eq, over);
    if (!lf) return std::nullopt;
    if (!is_constant_expr(g, lf->coefficients[0])) return std::nullopt;
    double c = eval_constant(g, lf->coefficients[0]);
    if (c == 0.0 || !std::isfinite(c)) return std::nullopt;
    return PivotForm{lf->coefficients[0], lf->remainder, c};
}

// Explicit solution u = -(remainder)/c built with a folded constant so the
// reciprocal multiplies instead of dividing; division nodes would block
// structural zero propagation in later derivatives.
NodeId pivot_solution(ExpressionGraph& g, const PivotForm& pv) {
    return g.mul(g.constant(-1.0 / pv.coeff_value), pv.remainder);
}

} // namespace

std::vector<VarId> select_dependent_variables(SemiExplicitDae& sys,
                                              const std::vector<int>& constraint_rows) {
    auto& g = sys.mutable_graph();
    const int nd = sys.n_diff();

    // Per-equation variable sets and global use counts. Ties (typical when
    // winding resistances vanish) break toward locality: the candidate
    // whose own f-equation shares the fewest variables with equations the
    // candidate does not reach. Shunt/magnetizing currents are fully
    // interior, so they win.
    std::vector<std::vector<char>> row_vars(sys.n_eq());
    std::vector<int> uses(g.var_count(), 0);
    for (int r = 0; r < sys.n_eq(); ++r) {
        NodeId eq = r < nd ? sys.f_equations()[r] : sys.g_equations()[r - nd];
        g.collect_vars(eq, row_vars[r]);
        for (std::size_t v = 0; v < row_vars[r].size(); ++v)
            if (row_vars[r][v]) ++uses[v];
    }
    std::vector<int> f_row_of(g.var_count(), -1);
    for (int i = 0; i < nd; ++i) f_row_of[sys.diff_vars()[i]] = i;
    auto in_row = [&](int r, std::size_t v) {
        return v < row_vars[r].size() && row_vars[r][v];
    };
    auto locality = [&](VarId v) {
        int fr = f_row_of[v];
        if (fr < 0) return 0;
        int shared = 0;
        for (std::size_t w = 0; w < row_vars[fr].size(); ++w) {
            if (!row_vars[fr][w] || static_cast<VarId>(w) == v) continue;
            if (g.var_info(static_cast<VarId>(w)).kind == VarKind::Input) {
                ++shared; // inputs are external by definition
                continue;
            }
            for (int r = 0; r < sys.n_eq(); ++r)
                if (in_row(r, w) && !in_row(r, v)) { ++shared; break; }
        }
        return shared;
    };

    std::vector<char> is_diff(g.var_count(), 0);
    for (VarId v : sys.diff_vars()) is_diff[v] = 1;

    std::vector<char> taken(g.var_count(), 0);
    std::vector<VarId> selected;
    selected.reserve(constraint_rows.size());

    for (int row : constraint_rows) {
        if (row < nd || row >= sys.n_eq())
            throw std::invalid_argument("select: row " + std::to_string(row) + " is not a g-row");
        NodeId eq = sys.g_equations()[row - nd];
        VarId best = -1;
        int best_uses = 0;
        int best_loc = 0;
        for (std::size_t v = 0; v < row_vars[row].size(); ++v) {
            if (!row_vars[row][v] || !is_diff[v] || taken[v]) continue;
            if (!constant_pivot(g, eq, static_cast<VarId>(v))) continue;
            int u = uses[v] - 1; // exclude this constraint
            int loc = locality(static_cast<VarId>(v));
            bool better = best == -1 || u < best_uses ||
                          (u == best_uses && (loc < best_loc ||
                                              (loc == best_loc && static_cast<VarId>(v) < best)));
            if (better) {
                best = static_cast<VarId>(v);
                best_uses = u;
                best_loc = loc;
            }
        }
        if (best == -1)
            throw std::runtime_error("select: no admissible dependent variable for constraint row " +
                                     std::to_string(row));
        taken[best] = 1;
        selected.push_back(best);
    }
    return selected;
}

std::vector<NodeId> differentiate_constraints(SemiExplicitDae& sys,
                                              const std::vector<int>& constraint_rows,
                                              const std::vector<VarId>& selected,
                                              const std::vector<VarId>& pseudos,
                                              std::vector<VarId>* new_inputs,
                                              std::vector<InputSignal>* new_input_fns) {
    auto& g = sys.mutable_graph();
    const int nd = sys.n_diff();

    std::unordered_map<VarId, NodeId> bindings;
    std::vector<char> sel(g.var_count(), 0);
    for (std::size_t k = 0; k < selected.size(); ++k) {
        sel[selected[k]] = 1;
        bindings[selected[k]] = g.var(pseudos[k]);
    }
    for (int i = 0; i < nd; ++i) {
        VarId v = sys.diff_vars()[i];
        if (!sel[v]) bindings[v] = sys.f_equations()[i];
    }

    // Inputs reachable from any constraint need a derivative signal.
    for (int row : constraint_rows) {
        NodeId eq = sys.g_equations()[row - nd];
        std::vector<char> mark;
        g.collect_vars(eq, mark);
        for (std::size_t k = 0; k < sys.input_vars().size(); ++k) {
            VarId u = sys.input_vars()[k];
            if (static_cast<std::size_t>(u) >= mark.size() || !mark[u] || bindings.count(u))
                continue;
            const InputSignal& s = sys.input_fns()[k];
            if (!s.derivative)
                throw std::runtime_error("constraint references input '" + sys.var_name(u) +
                                         "' with no derivative rule");
            VarId du = g.add_variable("d$" + sys.var_name(u), VarKind::Input);
            bindings[u] = g.var(du);
            if (new_inputs) new_inputs->push_back(du);
            if (new_input_fns) new_input_fns->push_back({s.derivative, nullptr});
        }
    }

    std::vector<NodeId> hidden;
    hidden.reserve(constraint_rows.size());
    for (int row : constraint_rows)
        hidden.push_back(g.differentiate_time(sys.g_equations()[row - nd], bindings));
    return hidden;
}

ReducedSystem reduce_index_once(SemiExplicitDae& raw) {
    ReducedSystem out;
    out.plan.constraint_rows = detect_constraint_rows(raw.incidence());
    const int q = static_cast<int>(out.plan.constraint_rows.size());
    if (q == 0) {
        out.sys = std::make_shared<SemiExplicitDae>(SemiExplicitDae::Parts{
            raw.graph_ptr(), raw.omega0(), raw.diff_vars(), raw.f_equations(),
            raw.alg_vars(), raw.g_equations(), raw.input_vars(), raw.input_fns()});
        out.sys->prepare_derivatives();
        return out;
    }

    auto& g = raw.mutable_graph();
    out.plan.selected = select_dependent_variables(raw, out.plan.constraint_rows);
    for (VarId v : out.plan.selected)
        out.plan.pseudos.push_back(
            g.add_variable("d$" + raw.var_name(v), VarKind::PseudoDerivative));

    std::vector<VarId> new_inputs;
    std::vector<InputSignal> new_input_fns;
    out.plan.hidden = differentiate_constraints(raw, out.plan.constraint_rows,
                                                out.plan.selected, out.plan.pseudos,
                                                &new_inputs, &new_input_fns);

    std::vector<char> sel(g.var_count(), 0);
    for (VarId v : out.plan.selected) sel[v] = 1;

    SemiExplicitDae::Parts p;
    p.graph = raw.graph_ptr();
    p.omega0 = raw.omega0();
    for (int i = 0; i < raw.n_diff(); ++i) {
        VarId v = raw.diff_vars()[i];
        if (sel[v]) continue;
        p.diff_vars.push_back(v);
        p.f.push_back(raw.f_equations()[i]);
    }
    p.alg_vars = raw.alg_vars();
    p.g = raw.g_equations();
    for (std::size_t k = 0; k < out.plan.selected.size(); ++k) {
        VarId v = out.plan.selected[k];
        p.alg_vars.push_back(v);
        g.reclassify(v, VarKind::Algebraic);
        // The former f-equation becomes algebraic with the pseudo symbol
        // standing in for the derivative: 0 = f_v - d$v.
        int fi = -1;
        for (int i = 0; i < raw.n_diff(); ++i)
            if (raw.diff_vars()[i] == v) { fi = i; break; }
        p.g.push_back(g.sub(raw.f_equations()[fi], g.var(out.plan.pseudos[k])));
    }
    for (VarId v : out.plan.pseudos) p.alg_vars.push_back(v);
    for (NodeId h : out.plan.hidden) p.g.push_back(h);
    p.input_vars = raw.input_vars();
    p.input_fns = raw.input_fns();
    for (std::size_t k = 0; k < new_inputs.size(); ++k) {
        p.input_vars.push_back(new_inputs[k]);
        p.input_fns.push_back(new_input_fns[k]);
    }

    out.sys = std::make_shared<SemiExplicitDae>(std::move(p));
    IndexReport rep = structural_index_report(*out.sys);
    if (rep.cls != IndexReport::Index1)
        throw std::runtime_error("reduction: system is not index-1 after one pass "
                                 "(index >= 3 is out of scope), residual q=" +
                                 std::to_string(rep.q));
    out.sys->prepare_derivatives();
    return out;
}

SubstitutionResult forward_substitute(SemiExplicitDae& sys, const BltOrder& blt) {
    auto& g = sys.mutable_graph();
    const int nd = sys.n_diff();
    std::unordered_map<VarId, NodeId> map;
    std::set<int> removed_rows;
    SubstitutionResult out;

    for (const auto& blk : blt.blocks) {
        if (blk.pairs.size() != 1) continue;
        auto [row, col] = blk.pairs[0];
        if (row < nd || col < nd) continue; // differential rows stay
        VarId v = sys.alg_vars()[col - nd];
        NodeId eq = g.substitute(sys.g_equations()[row - nd], map);
        auto pv = constant_pivot(g, eq, v);
        if (!pv) continue;
        NodeId sol = pivot_solution(g, *pv);
        map[v] = sol;
        removed_rows.insert(row - nd);
        out.inlined.emplace_back(v, sol);
    }

    SemiExplicitDae::Parts p;
    p.graph = sys.graph_ptr();
    p.omega0 = sys.omega0();
    p.diff_vars = sys.diff_vars();
    for (NodeId f : sys.f_equations()) p.f.push_back(g.substitute(f, map));
    for (int j = 0; j < sys.n_alg(); ++j) {
        if (map.count(sys.alg_vars()[j])) continue;
        p.alg_vars.push_back(sys.alg_vars()[j]);
    }
    for (int j = 0; j < sys.n_alg(); ++j) {
        if (removed_rows.count(j)) continue;
        p.g.push_back(g.substitute(sys.g_equations()[j], map));
    }
    p.input_vars = sys.input_vars();
    p.input_fns = sys.input_fns();
    out.sys = std::make_shared<SemiExplicitDae>(std::move(p));
    out.sys->prepare_derivatives();
    return out;
}

TornBlock tear_linear_block(SemiExplicitDae& sys, const BltBlock& block,
                            std::span<const VarId> tearing,
                            std::span<const int> residual_rows) {
    auto& g = sys.mutable_graph();
    const int nd = sys.n_diff();

    std::vector<VarId> block_vars;
    std::vector<int> block_rows;
    for (auto [row, col] : block.pairs) {
        if (row < nd || col < nd)
            throw std::invalid_argument("tearing applies to algebraic blocks only");
        block_rows.push_back(row);
        block_vars.push_back(sys.alg_vars()[col - nd]);
    }

    std::set<VarId> tear_set(tearing.begin(), tearing.end());
    std::set<int> residual_set(residual_rows.begin(), residual_rows.end());
    if (tearing.size() != residual_rows.size())
        throw std::invalid_argument("tearing: variable/residual count mismatch");

    TornBlock out;
    out.tearing.assign(tearing.begin(), tearing.end());
    out.residual_rows.assign(residual_rows.begin(), residual_rows.end());

    // Chain the non-tearing variables through explicitly solvable equations.
    std::unordered_map<VarId, NodeId> map;
    std::set<VarId> unsolved;
    for (VarId v : block_vars)
        if (!tear_set.count(v)) unsolved.insert(v);
    std::vector<int> open_rows;
    for (int r : block_rows)
        if (!residual_set.count(r)) open_rows.push_back(r);

    while (!unsolved.empty()) {
        bool progress = false;
        for (auto it = open_rows.begin(); it != open_rows.end(); ++it) {
            NodeId eq = g.substitute(sys.g_equations()[*it - nd], map);
            std::vector<char> mark;
            g.collect_vars(eq, mark);
            VarId lone = -1;
            int count = 0;
            for (VarId v : unsolved)
                if (static_cast<std::size_t>(v) < mark.size() && mark[v]) { lone = v; ++count; }
            if (count != 1) continue;
            auto pv = constant_pivot(g, eq, lone);
            if (!pv) continue;
            map[lone] = pivot_solution(g, *pv);
            out.chain.emplace_back(lone, map[lone]);
            unsolved.erase(lone);
            open_rows.erase(it);
            progress = true;
            break;
        }
        if (!progress)
            throw std::runtime_error("tearing: block is structurally singular for the given "
                                     "tearing set (" + std::to_string(unsolved.size()) +
                                     " unchainable variables)");
    }

    const std::size_t m = tearing.size();
    out.A.assign(m, std::vector<NodeId>(m));
    out.b.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        NodeId eq = g.substitute(sys.g_equations()[out.residual_rows[i] - nd], map);
        auto lf = g.extract_linear_form(eq, tearing);
        if (!lf)
            throw std::runtime_error("tearing: residual equation is nonlinear in the tearing variables");
        for (std::size_t j = 0; j < m; ++j) out.A[i][j] = lf->coefficients[j];
        out.b[i] = g.neg(lf->remainder);
    }
    return out;
}

TornBlock auto_tear(SemiExplicitDae& sys, const BltBlock& block) {
    auto& g = sys.mutable_graph();
    const int nd = sys.n_diff();

    std::vector<VarId> block_vars;
    std::vector<int> block_rows;
    for (auto [row, col] : block.pairs) {
        block_rows.push_back(row);
        block_vars.push_back(sys.alg_vars()[col - nd]);
    }

    std::set<VarId> unknown(block_vars.begin(), block_vars.end());
    std::vector<VarId> tearing;
    std::unordered_map<VarId, NodeId> map;
    std::vector<int> open_rows = block_rows;

    while (!unknown.empty()) {
        bool progress = false;
        for (auto it = open_rows.begin(); it != open_rows.end(); ++it) {
            NodeId eq = g.substitute(sys.g_equations()[*it - nd], map);
            std::vector<char> mark;
            g.collect_vars(eq, mark);
            VarId lone = -1;
            int count = 0;
            for (VarId v : unknown)
                if (static_cast<std::size_t>(v) < mark.size() && mark[v]) { lone = v; ++count; }
            if (count != 1) continue;
            auto pv = constant_pivot(g, eq, lone);
            if (!pv) continue;
            map[lone] = pivot_solution(g, *pv);
            unknown.erase(lone);
            open_rows.erase(it);
            progress = true;
            break;
        }
        if (progress) continue;
        // Stalled: promote the unknown used by the most open equations.
        std::unordered_map<VarId, int> count;
        for (int r : open_rows) {
            NodeId eq = g.substitute(sys.g_equations()[r - nd], map);
            std::vector<char> mark;
            g.collect_vars(eq, mark);
            for (VarId v : unknown)
                if (static_cast<std::size_t>(v) < mark.size() && mark[v]) ++count[v];
        }
        VarId best = -1;
        int best_count = -1;
        for (VarId v : unknown) {
            int c = count.count(v) ? count[v] : 0;
            if (c > best_count || (c == best_count && v < best)) {
                best = v;
                best_count = c;
            }
        }
        if (best == -1)
            throw std::runtime_error("tearing: stalled with no promotable variable");
        tearing.push_back(best);
        unknown.erase(best);
    }

    std::sort(tearing.begin(), tearing.end());
    return tear_linear_block(sys, block, tearing,
                             std::span<const int>(open_rows.data(), open_rows.size()));
}

AlgebraicSolver::AlgebraicSolver(std::shared_ptr<const SemiExplicitDae> sys)
    : sys_(std::move(sys)) {
    const auto& s = *sys_;
    IncidenceMatrix B = s.incidence();
    Matching m = maximum_matching(B);
    BltOrder blt = blt_sort(B, m); // throws StructuralSingularity if not index-1

    const auto& g = s.graph();
    auto closure_of = [&](const std::vector<NodeId>& roots) {
        std::vector<char> seen(g.node_count(), 0);
        std::vector<NodeId> stack(roots), out;
        for (NodeId r : roots) seen[r] = 1;
        while (!stack.empty()) {
            NodeId id = stack.back();
            stack.pop_back();
            out.push_back(id);
            const Node& nd = g.node(id);
            if (nd.op == Op::Const || nd.op == Op::Var || nd.op == Op::DerivRef) continue;
            if (!seen[nd.a]) { seen[nd.a] = 1; stack.push_back(nd.a); }
            bool binary = nd.op == Op::Add || nd.op == Op::Sub || nd.op == Op::Mul || nd.op == Op::Div;
            if (binary && !seen[nd.b]) { seen[nd.b] = 1; stack.push_back(nd.b); }
        }
        std::sort(out.begin(), out.end());
        return out;
    };

    for (const auto& blk : blt.blocks) {
        if (blk.pairs[0].first < s.n_diff()) continue; // differential rows have no unknowns here
        Block b;
        for (auto [row, col] : blk.pairs) {
            b.equations.push_back(s.g_equations()[row - s.n_diff()]);
            b.vars.push_back(s.alg_vars()[col - s.n_diff()]);
        }
        b.closure = closure_of(b.equations);
        blocks_.push_back(std::move(b));
    }
    f_closure_ = closure_of(s.f_equations());
}

void AlgebraicSolver::eval_closure(const std::vector<NodeId>& closure,
                                   std::vector<double>& var_values,
                                   std::vector<double>& node_values) const {
    const auto& g = sys_->graph();
    for (NodeId id : closure) {
        const Node& nd = g.node(id);
        double* v = node_values.data();
        switch (nd.op) {
            case Op::Const: v[id] = nd.value; break;
            case Op::Var: v[id] = var_values[nd.a]; break;
            case Op::Add: v[id] = v[nd.a] + v[nd.b]; break;
            case Op::Sub: v[id] = v[nd.a] - v[nd.b]; break;
            case Op::Mul: v[id] = v[nd.a] * v[nd.b]; break;
            case Op::Div: v[id] = v[nd.a] / v[nd.b]; break;
            case Op::Neg: v[id] = -v[nd.a]; break;
            case Op::Sin: v[id] = std::sin(v[nd.a]); break;
            case Op::Cos: v[id] = std::cos(v[nd.a]); break;
            case Op::Sqrt: v[id] = std::sqrt(v[nd.a]); break;
            case Op::DerivRef:
                throw std::runtime_error("derivative-ref in algebraic solve");
        }
    }
}

Vec AlgebraicSolver::solve_algebraic(double t, std::span<const double> x) const {
    const auto& s = *sys_;
    const auto& g = s.graph();
    std::vector<double> var_values(g.var_count(), 0.0);
    std::vector<double> node_values(g.node_count(), 0.0);
    for (int i = 0; i < s.n_diff(); ++i) var_values[s.diff_vars()[i]] = x[i];
    for (std::size_t k = 0; k < s.input_vars().size(); ++k)
        var_values[s.input_vars()[k]] = s.input_fns()[k].value(t);

    for (const auto& blk : blocks_) {
        const std::size_t m = blk.vars.size();
        Vec r0(m), rk(m);
        for (VarId v : blk.vars) var_values[v] = 0.0;
        eval_closure(blk.closure, var_values, node_values);
        for (std::size_t i = 0; i < m; ++i) r0[i] = node_values[blk.equations[i]];
        Mat A(m, m);
        for (std::size_t k = 0; k < m; ++k) {
            for (std::size_t j = 0; j < m; ++j) var_values[blk.vars[j]] = (j == k) ? 1.0 : 0.0;
            eval_closure(blk.closure, var_values, node_values);
            for (std::size_t i = 0; i < m; ++i) A(i, k) = node_values[blk.equations[i]] - r0[i];
        }
        Vec zb = lu_solve(A, Vec(-r0));
        for (std::size_t j = 0; j < m; ++j) var_values[blk.vars[j]] = zb[j];
        eval_closure(blk.closure, var_values, node_values);
        for (std::size_t i = 0; i < m; ++i) {
            double res = node_values[blk.equations[i]];
            if (std::abs(res) > 1e-8 * (1.0 + r0.cwiseAbs().maxCoeff()))
                throw std::runtime_error("algebraic solve: block is not linear "
                                         "(residual " + std::to_string(res) + ")");
        }
    }

    Vec z(s.n_alg());
    for (int j = 0; j < s.n_alg(); ++j) z[j] = var_values[s.alg_vars()[j]];
    return z;
}

Vec AlgebraicSolver::ode_rhs(double t, std::span<const double> x) const {
    const auto& s = *sys_;
    const auto& g = s.graph();
    Vec z = solve_algebraic(t, x);
    std::vector<double> var_values(g.var_count(), 0.0);
    std::vector<double> node_values(g.node_count(), 0.0);
    for (int i = 0; i < s.n_diff(); ++i) var_values[s.diff_vars()[i]] = x[i];
    for (int j = 0; j < s.n_alg(); ++j) var_values[s.alg_vars()[j]] = z[j];
    for (std::size_t k = 0; k < s.input_vars().size(); ++k)
        var_values[s.input_vars()[k]] = s.input_fns()[k].value(t);
    eval_closure(f_closure_, var_values, node_values);
    Vec f(s.n_diff());
    for (int i = 0; i < s.n_diff(); ++i) f[i] = node_values[s.f_equations()[i]];
    return f;
}

std::string reduction_report(SemiExplicitDae& raw) {
    std::ostringstream os;
    IndexReport rep = structural_index_report(raw);
    os << index_report_text(rep);
    if (rep.cls != IndexReport::Index2Plus) {
        os << "no reduction required\n";
        return os.str();
    }
    ReducedSystem red = reduce_index_once(raw);
    os << "selected dependent variables:";
    for (VarId v : red.plan.selected) os << " " << raw.var_name(v);
    os << "\npseudo-derivatives:";
    for (VarId v : red.plan.pseudos) os << " " << raw.var_name(v);
    os << "\n";

    IncidenceMatrix B = red.sys->incidence();
    Matching m = maximum_matching(B);
    BltOrder blt = blt_sort(B, m, red.sys.get());
    auto sub = forward_substitute(*red.sys, blt);

    IncidenceMatrix B2 = sub.sys->incidence();
    BltOrder blt2 = blt_sort(B2, maximum_matching(B2), sub.sys.get());
    os << "algebraic blocks after substitution:";
    bool any = false;
    for (const auto& blk : blt2.blocks) {
        if (blk.pairs[0].first < sub.sys->n_diff()) continue;
        os << " " << blk.pairs.size();
        any = true;
    }
    if (!any) os << " none";
    os << "\n";
    for (const auto& blk : blt2.blocks) {
        if (blk.pairs[0].first < sub.sys->n_diff() || blk.pairs.size() == 1) continue;
        TornBlock torn = auto_tear(*sub.sys, blk);
        os << "block of " << blk.pairs.size() << " torn to " << torn.tearing.size()
           << "x" << torn.tearing.size() << " solve over";
        for (VarId v : torn.tearing) os << " " << sub.sys->var_name(v);
        os << "\n";
    }
    return os.str();
}

} // namespace emtdq

#include "emtdq/dae.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace emtdq {

SemiExplicitDae::SemiExplicitDae(Parts p)
    : graph_(std::move(p.graph)),
      omega0_(p.omega0),
      diff_vars_(std::move(p.diff_vars)),
      alg_vars_(std::move(p.alg_vars)),
      input_vars_(std::move(p.input_vars)),
      f_(std::move(p.f)),
      g_(std::move(p.g)),
      input_fns_(std::move(p.input_fns)) {
    if (!graph_) throw std::invalid_argument("dae: null graph");
    if (omega0_ <= 0.0) throw std::invalid_argument("dae: omega0 must be positive");
    if (f_.size() != diff_vars_.size())
        throw std::invalid_argument("dae: one f equation per differential variable required");
    if (input_fns_.size() != input_vars_.size())
        throw std::invalid_argument("dae: input table size mismatch");

    // Every variable referenced by an equation must be registered in
    // exactly one of the three lists.
    std::vector<char> klass(graph_->var_count(), 0);
    auto tag = [&](const std::vector<VarId>& vs, char k) {
        for (VarId v : vs) {
            if (klass[v] != 0) throw std::invalid_argument(
                "dae: variable '" + graph_->var_info(v).name + "' listed twice");
            klass[v] = k;
        }
    };
    tag(diff_vars_, 1);
    tag(alg_vars_, 2);
    tag(input_vars_, 3);
    std::vector<char> used;
    for (NodeId eq : f_) graph_->collect_vars(eq, used);
    for (NodeId eq : g_) graph_->collect_vars(eq, used);
    for (std::size_t v = 0; v < used.size(); ++v)
        if (used[v] && klass[v] == 0)
            throw std::invalid_argument("dae: variable '" + graph_->var_info(static_cast<VarId>(v)).name +
                                        "' referenced but not registered");

    col_of_var_.assign(graph_->var_count(), -1);
    for (int i = 0; i < n_diff(); ++i) col_of_var_[diff_vars_[i]] = i;
    for (int j = 0; j < n_alg(); ++j) col_of_var_[alg_vars_[j]] = n_diff() + j;
}

std::vector<std::string> SemiExplicitDae::diff_names() const {
    std::vector<std::string> out;
    out.reserve(diff_vars_.size());
    for (VarId v : diff_vars_) out.push_back(var_name(v));
    return out;
}

std::vector<std::string> SemiExplicitDae::alg_names() const {
    std::vector<std::string> out;
    out.reserve(alg_vars_.size());
    for (VarId v : alg_vars_) out.push_back(var_name(v));
    return out;
}

EvaluationWorkspace SemiExplicitDae::make_workspace() const {
    EvaluationWorkspace ws;
    ws.var_values.assign(graph_->var_count(), 0.0);
    ws.node_values.assign(graph_->node_count(), 0.0);
    return ws;
}

void SemiExplicitDae::load_point(double t, std::span<const double> x,
                                 std::span<const double> z,
                                 EvaluationWorkspace& ws) const {
    if (static_cast<int>(x.size()) != n_diff() || static_cast<int>(z.size()) != n_alg())
        throw std::invalid_argument("dae: state dimension mismatch");
    ws.var_values.resize(graph_->var_count(), 0.0);
    ws.node_values.resize(graph_->node_count(), 0.0);
    for (int i = 0; i < n_diff(); ++i) ws.var_values[diff_vars_[i]] = x[i];
    for (int j = 0; j < n_alg(); ++j) ws.var_values[alg_vars_[j]] = z[j];
    for (std::size_t k = 0; k < input_vars_.size(); ++k)
        ws.var_values[input_vars_[k]] = input_fns_[k].value(t);
    graph_->eval_all(ws.var_values, ws.node_values);
    ws.stamp = t;
}

Vec SemiExplicitDae::residual(double t, std::span<const double> x,
                              std::span<const double> z,
                              std::span<const double> xdot,
                              EvaluationWorkspace& ws) const {
    if (xdot.size() != x.size())
        throw std::invalid_argument("dae: xdot dimension mismatch");
    load_point(t, x, z, ws);
    Vec r(n_eq());
    for (int i = 0; i < n_diff(); ++i) r[i] = ws.node_values[f_[i]] - xdot[i];
    for (int j = 0; j < n_alg(); ++j) r[n_diff() + j] = ws.node_values[g_[j]];
    for (int i = 0; i < n_eq(); ++i)
        if (!std::isfinite(r[i]))
            throw std::runtime_error("dae: non-finite residual in equation " + std::to_string(i));
    return r;
}

void SemiExplicitDae::prepare_derivatives() {
    if (prepared_) return;
    auto& g = *graph_;
    jac_.assign(n_eq(), {});
    input_partials_.assign(n_eq(), {});
    std::vector<char> used;
    for (int row = 0; row < n_eq(); ++row) {
        NodeId eq = equation(row);
        used.clear();
        g.collect_vars(eq, used);
        for (std::size_t v = 0; v < used.size(); ++v) {
            if (!used[v]) continue;
            int col = col_of_var_[v];
            if (col >= 0)
                jac_[row].emplace_back(col, g.differentiate_partial(eq, static_cast<VarId>(v)));
        }
        for (std::size_t k = 0; k < input_vars_.size(); ++k) {
            VarId u = input_vars_[k];
            bool hit = static_cast<std::size_t>(u) < used.size() && used[u];
            input_partials_[row].push_back(hit ? g.differentiate_partial(eq, u) : NodeId{-1});
        }
    }
    prepared_ = true;
}

Mat SemiExplicitDae::jacobian(double t, std::span<const double> x,
                              std::span<const double> z,
                              EvaluationWorkspace& ws) const {
    if (!prepared_)
        throw std::logic_error("dae: prepare_derivatives() must run before jacobian()");
    load_point(t, x, z, ws);
    Mat J = Mat::Zero(n_eq(), n_eq());
    for (int row = 0; row < n_eq(); ++row)
        for (auto [col, dn] : jac_[row]) {
            double v = ws.node_values[dn];
            if (!std::isfinite(v))
                throw std::runtime_error("dae: non-finite jacobian entry at equation " +
                                         std::to_string(row) + ", column " + std::to_string(col));
            J(row, col) = v;
        }
    return J;
}

Vec SemiExplicitDae::time_partial(double t, std::span<const double> x,
                                  std::span<const double> z,
                                  EvaluationWorkspace& ws) const {
    if (!prepared_)
        throw std::logic_error("dae: prepare_derivatives() must run before time_partial()");
    load_point(t, x, z, ws);
    Vec ft = Vec::Zero(n_eq());
    if (input_vars_.empty()) return ft;
    std::vector<double> udot(input_vars_.size());
    for (std::size_t k = 0; k < input_vars_.size(); ++k)
        udot[k] = input_fns_[k].derivative ? input_fns_[k].derivative(t) : 0.0;
    for (int row = 0; row < n_eq(); ++row)
        for (std::size_t k = 0; k < input_vars_.size(); ++k) {
            NodeId dn = input_partials_[row][k];
            if (dn >= 0 && udot[k] != 0.0) ft[row] += ws.node_values[dn] * udot[k];
        }
    return ft;
}

IncidenceMatrix SemiExplicitDae::incidence() const {
    IncidenceMatrix B;
    B.rows = n_eq();
    B.diff_cols = n_diff();
    B.alg_cols = n_alg();
    B.bits.assign(static_cast<std::size_t>(B.rows) * B.cols(), 0);
    for (int i = 0; i < n_diff(); ++i) B.set(i, i); // identity on f-rows / xdot-columns
    std::vector<char> used;
    for (int row = 0; row < n_eq(); ++row) {
        NodeId eq = equation(row);
        used.clear();
        graph_->collect_vars(eq, used);
        for (int j = 0; j < n_alg(); ++j) {
            VarId v = alg_vars_[j];
            if (static_cast<std::size_t>(v) < used.size() && used[v])
                B.set(row, n_diff() + j);
        }
    }
    return B;
}

GzSingularity SemiExplicitDae::gz_singularity(double t, std::span<const double> x,
                                              std::span<const double> z) const {
    GzSingularity out;
    if (n_alg() == 0) return out;
    auto ws = make_workspace();
    const_cast<SemiExplicitDae*>(this)->prepare_derivatives();
    Mat J = jacobian(t, x, z, ws);
    Mat gz = J.block(n_diff(), n_diff(), n_alg(), n_alg());
    int rank = numeric_rank(gz, 1e-10);
    out.nullity = n_alg() - rank;
    out.singular = out.nullity > 0;
    return out;
}

std::string SemiExplicitDae::summary() const {
    IncidenceMatrix B = incidence();
    int zero_rows = 0;
    for (int r = n_diff(); r < B.rows; ++r) {
        bool all_zero = true;
        for (int c = 0; c < B.cols(); ++c)
            if (B.bit(r, c)) { all_zero = false; break; }
        if (all_zero) ++zero_rows;
    }
    std::ostringstream os;
    os << "variables: " << n_diff() << " differential, " << n_alg() << " algebraic, "
       << input_vars_.size() << " inputs\n";
    os << "equations: " << n_diff() << " differential, " << n_alg() << " algebraic\n";
    os << "zero-row constraints: " << zero_rows << "\n";
    return os.str();
}

} // namespace emtdq

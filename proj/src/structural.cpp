#include "emtdq/structural.hpp"

#include <algorithm>
#include <queue>
#include <sstream>

namespace emtdq {

StructuralSingularity::StructuralSingularity(std::vector<int> rows)
    : std::runtime_error("structural singularity: " + std::to_string(rows.size()) +
                         " unmatched equation rows"),
      unmatched_rows(std::move(rows)) {}

Matching maximum_matching(const IncidenceMatrix& B) {
    const int R = B.rows, C = B.cols();
    Matching m;
    m.row_to_col.assign(R, -1);
    m.col_to_row.assign(C, -1);

    // BFS augmenting path from each free row, lowest index first.
    std::vector<int> parent_col(C), parent_row(C);
    for (int s = 0; s < R; ++s) {
        if (m.row_to_col[s] != -1) continue;
        std::fill(parent_col.begin(), parent_col.end(), -1);
        std::fill(parent_row.begin(), parent_row.end(), -1);
        std::queue<int> q;
        q.push(s);
        int found = -1;
        std::vector<char> row_seen(R, 0);
        row_seen[s] = 1;
        while (!q.empty() && found == -1) {
            int r = q.front();
            q.pop();
            for (int c = 0; c < C && found == -1; ++c) {
                if (!B.bit(r, c) || parent_row[c] != -1) continue;
                parent_row[c] = r;
                if (m.col_to_row[c] == -1) {
                    found = c;
                } else if (!row_seen[m.col_to_row[c]]) {
                    row_seen[m.col_to_row[c]] = 1;
                    q.push(m.col_to_row[c]);
                }
            }
        }
        if (found != -1) {
            int c = found;
            while (c != -1) {
                int r = parent_row[c];
                int prev = m.row_to_col[r];
                m.row_to_col[r] = c;
                m.col_to_row[c] = r;
                c = prev;
            }
            ++m.size;
        }
    }
    return m;
}

BltOrder blt_sort(const IncidenceMatrix& B, const Matching& m,
                  const SemiExplicitDae* sys) {
    const int R = B.rows;
    std::vector<int> unmatched;
    for (int r = 0; r < R; ++r)
        if (m.row_to_col[r] == -1) unmatched.push_back(r);
    if (!unmatched.empty()) throw StructuralSingularity(unmatched);

    // Dependency digraph: r -> r' when equation r uses the column matched
    // to r'. Self-loops ignored.
    std::vector<std::vector<int>> adj(R);
    for (int r = 0; r < R; ++r)
        for (int c = 0; c < B.cols(); ++c)
            if (B.bit(r, c) && m.col_to_row[c] != r)
                adj[r].push_back(m.col_to_row[c]);

    // Iterative Tarjan, deterministic: roots and neighbors in ascending order.
    std::vector<int> index(R, -1), low(R, 0), comp(R, -1);
    std::vector<char> on_stack(R, 0);
    std::vector<int> stack;
    std::vector<std::vector<int>> comps;
    int next_index = 0;

    struct Frame { int v; std::size_t ei; };
    for (int root = 0; root < R; ++root) {
        if (index[root] != -1) continue;
        std::vector<Frame> frames{{root, 0}};
        index[root] = low[root] = next_index++;
        stack.push_back(root);
        on_stack[root] = 1;
        while (!frames.empty()) {
            Frame& f = frames.back();
            if (f.ei < adj[f.v].size()) {
                int w = adj[f.v][f.ei++];
                if (index[w] == -1) {
                    index[w] = low[w] = next_index++;
                    stack.push_back(w);
                    on_stack[w] = 1;
                    frames.push_back({w, 0});
                } else if (on_stack[w]) {
                    low[f.v] = std::min(low[f.v], index[w]);
                }
            } else {
                int v = f.v;
                frames.pop_back();
                if (!frames.empty())
                    low[frames.back().v] = std::min(low[frames.back().v], low[v]);
                if (low[v] == index[v]) {
                    std::vector<int> scc;
                    int w;
                    do {
                        w = stack.back();
                        stack.pop_back();
                        on_stack[w] = 0;
                        comp[w] = static_cast<int>(comps.size());
                        scc.push_back(w);
                    } while (w != v);
                    std::sort(scc.begin(), scc.end());
                    comps.push_back(std::move(scc));
                }
            }
        }
    }

    BltOrder order;
    order.blocks.reserve(comps.size());
    for (auto& rows : comps) {
        BltBlock blk;
        for (int r : rows) blk.pairs.emplace_back(r, m.row_to_col[r]);
        if (blk.pairs.size() == 1) {
            blk.cls = BlockClass::Scalar;
        } else if (sys) {
            std::vector<VarId> block_vars;
            for (auto [r, c] : blk.pairs) {
                (void)r;
                block_vars.push_back(c < sys->n_diff()
                                         ? sys->diff_vars()[c]
                                         : sys->alg_vars()[c - sys->n_diff()]);
            }
            auto& g = const_cast<SemiExplicitDae*>(sys)->mutable_graph();
            bool linear = true;
            for (auto [r, c] : blk.pairs) {
                (void)c;
                NodeId eq = r < sys->n_diff() ? sys->f_equations()[r]
                                              : sys->g_equations()[r - sys->n_diff()];
                if (!g.extract_linear_form(eq, block_vars)) {
                    linear = false;
                    break;
                }
            }
            blk.cls = linear ? BlockClass::LinearLoop : BlockClass::NonlinearLoop;
        } else {
            blk.cls = BlockClass::NonlinearLoop;
        }
        order.blocks.push_back(std::move(blk));
    }
    return order;
}

std::vector<int> detect_constraint_rows(const IncidenceMatrix& B) {
    std::vector<int> rows;
    for (int r = B.diff_cols; r < B.rows; ++r) {
        bool zero = true;
        for (int c = 0; c < B.cols(); ++c)
            if (B.bit(r, c)) { zero = false; break; }
        if (zero) rows.push_back(r);
    }
    return rows;
}

IndexReport structural_index_report(const SemiExplicitDae& sys) {
    IndexReport rep;
    IncidenceMatrix B = sys.incidence();
    rep.constraint_rows = detect_constraint_rows(B);
    if (sys.n_alg() == 0) {
        rep.cls = IndexReport::Index0;
        return rep;
    }
    // Matching restricted to the g-rows / algebraic-columns block.
    IncidenceMatrix gz;
    gz.rows = sys.n_alg();
    gz.diff_cols = 0;
    gz.alg_cols = sys.n_alg();
    gz.bits.assign(static_cast<std::size_t>(gz.rows) * gz.cols(), 0);
    for (int r = 0; r < sys.n_alg(); ++r)
        for (int c = 0; c < sys.n_alg(); ++c)
            if (B.bit(sys.n_diff() + r, sys.n_diff() + c)) gz.set(r, c);
    Matching m = maximum_matching(gz);
    rep.q = sys.n_alg() - m.size;
    rep.cls = rep.q == 0 ? IndexReport::Index1 : IndexReport::Index2Plus;
    return rep;
}

std::string index_report_text(const IndexReport& r) {
    std::ostringstream os;
    switch (r.cls) {
        case IndexReport::Index0: os << "index 0 (ODE)"; break;
        case IndexReport::Index1: os << "index 1"; break;
        case IndexReport::Index2Plus: os << "index >= 2"; break;
    }
    os << ", q=" << r.q;
    if (!r.constraint_rows.empty()) {
        os << ", constraint rows:";
        for (int row : r.constraint_rows) os << " " << row;
    }
    os << "\n";
    return os.str();
}

int CircuitGraph::add_node(const std::string& name) {
    for (std::size_t i = 0; i < node_names.size(); ++i)
        if (node_names[i] == name) return static_cast<int>(i);
    node_names.push_back(name);
    return static_cast<int>(node_names.size()) - 1;
}

int CircuitGraph::node(const std::string& name) const {
    for (std::size_t i = 0; i < node_names.size(); ++i)
        if (node_names[i] == name) return static_cast<int>(i);
    throw std::invalid_argument("circuit: unknown node '" + name + "'");
}

void CircuitGraph::add_edge(const std::string& u, const std::string& v,
                            EdgeKind kind, const std::string& label) {
    edges.push_back({add_node(u), add_node(v), kind, label});
}

namespace {

bool is_li(EdgeKind k) { return k == EdgeKind::Inductor || k == EdgeKind::CurrentSource; }
bool is_cv(EdgeKind k) { return k == EdgeKind::Capacitor || k == EdgeKind::VoltageSource; }

struct DisjointSet {
    std::vector<int> p;
    explicit DisjointSet(int n) : p(n) { for (int i = 0; i < n; ++i) p[i] = i; }
    int find(int x) { while (p[x] != x) x = p[x] = p[p[x]]; return x; }
    void unite(int a, int b) { p[find(a)] = find(b); }
};

} // namespace

std::vector<TopoFinding> detect_topological_index2(const CircuitGraph& c) {
    const int N = static_cast<int>(c.node_names.size());
    std::vector<TopoFinding> findings;

    // LI-cutsets: components of the non-LI subgraph. One whose boundary in
    // the full graph is entirely LI edges (and which excludes ground) is a
    // cutset of inductors/current sources.
    {
        DisjointSet ds(N);
        for (const auto& e : c.edges)
            if (!is_li(e.kind)) ds.unite(e.u, e.v);
        int ground_root = c.ground >= 0 ? ds.find(c.ground) : -1;
        std::vector<std::vector<int>> members(N);
        for (int v = 0; v < N; ++v) members[ds.find(v)].push_back(v);
        for (int root = 0; root < N; ++root) {
            if (members[root].empty() || root == ground_root) continue;
            std::vector<int> boundary;
            for (std::size_t ei = 0; ei < c.edges.size(); ++ei) {
                const auto& e = c.edges[ei];
                bool iu = ds.find(e.u) == root, iv = ds.find(e.v) == root;
                if (iu != iv) boundary.push_back(static_cast<int>(ei));
            }
            if (boundary.empty()) continue; // isolated fragment, not a cutset
            TopoFinding f;
            f.kind = TopoFinding::LICutset;
            f.nodes = members[root];
            f.edges = boundary; // all LI by construction of the sweep
            findings.push_back(std::move(f));
        }
    }

    // CV-loops: independent cycles of the capacitor/voltage-source subgraph
    // that contain at least one voltage source. A pure capacitor loop (for
    // example charging capacitors in parallel through ground) leaves the
    // node-voltage formulation index-1 and is excluded. The count per
    // component is the cycle rank of the C+V subgraph minus the cycle rank
    // of its capacitor-only part.
    {
        DisjointSet cv(N), conly(N);
        for (const auto& e : c.edges) {
            if (!is_cv(e.kind)) continue;
            cv.unite(e.u, e.v);
            if (e.kind == EdgeKind::Capacitor) conly.unite(e.u, e.v);
        }
        std::vector<std::vector<int>> edge_list(N);
        std::vector<std::vector<int>> node_list(N);
        std::vector<int> c_edges(N, 0);
        std::vector<std::vector<int>> c_nodes(N); // capacitor-incident nodes per component
        std::vector<char> node_in(N, 0), cnode_in(N, 0);
        for (std::size_t ei = 0; ei < c.edges.size(); ++ei) {
            const auto& e = c.edges[ei];
            if (!is_cv(e.kind)) continue;
            int root = cv.find(e.u);
            edge_list[root].push_back(static_cast<int>(ei));
            for (int v : {e.u, e.v})
                if (!node_in[v]) { node_in[v] = 1; node_list[root].push_back(v); }
            if (e.kind == EdgeKind::Capacitor) {
                ++c_edges[root];
                for (int v : {e.u, e.v})
                    if (!cnode_in[v]) { cnode_in[v] = 1; c_nodes[root].push_back(v); }
            }
        }
        for (int root = 0; root < N; ++root) {
            if (edge_list[root].empty()) continue;
            int cycles_cv = static_cast<int>(edge_list[root].size()) -
                            static_cast<int>(node_list[root].size()) + 1;
            std::vector<int> c_roots;
            for (int v : c_nodes[root]) c_roots.push_back(conly.find(v));
            std::sort(c_roots.begin(), c_roots.end());
            c_roots.erase(std::unique(c_roots.begin(), c_roots.end()), c_roots.end());
            int cycles_c = c_edges[root] - static_cast<int>(c_nodes[root].size()) +
                           static_cast<int>(c_roots.size());
            for (int k = 0; k < cycles_cv - cycles_c; ++k) {
                TopoFinding f;
                f.kind = TopoFinding::CVLoop;
                f.nodes = node_list[root];
                f.edges = edge_list[root];
                std::sort(f.nodes.begin(), f.nodes.end());
                findings.push_back(std::move(f));
            }
        }
    }

    std::sort(findings.begin(), findings.end(), [](const auto& a, const auto& b) {
        if (a.kind != b.kind) return a.kind < b.kind;
        return a.nodes < b.nodes;
    });
    return findings;
}

std::string findings_table(const CircuitGraph& c, const std::vector<TopoFinding>& fs) {
    std::ostringstream os;
    os << "findings: " << fs.size() << "\n";
    for (const auto& f : fs) {
        os << (f.kind == TopoFinding::LICutset ? "  LI-cutset at" : "  CV-loop over");
        for (int v : f.nodes) os << " " << c.node_names[v];
        os << "  [";
        for (std::size_t i = 0; i < f.edges.size(); ++i)
            os << (i ? " " : "") << c.edges[f.edges[i]].label;
        os << "]\n";
    }
    return os.str();
}

} // namespace emtdq

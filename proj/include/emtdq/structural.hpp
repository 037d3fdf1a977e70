#pragma once

#include <string>
#include <vector>

#include "emtdq/dae.hpp"

namespace emtdq {

// Row->column assignment over an incidence matrix; -1 where unmatched.
struct Matching {
    std::vector<int> row_to_col;
    std::vector<int> col_to_row;
    int size = 0;
};

enum class BlockClass { Scalar, LinearLoop, NonlinearLoop };

struct BltBlock {
    std::vector<std::pair<int, int>> pairs; // (equation row, column)
    BlockClass cls = BlockClass::Scalar;
};

struct BltOrder {
    std::vector<BltBlock> blocks; // dependency order: solve front to back
};

struct StructuralSingularity : std::runtime_error {
    explicit StructuralSingularity(std::vector<int> rows);
    std::vector<int> unmatched_rows;
};

// Maximum-cardinality matching by BFS augmenting paths; deterministic
// lowest-index-first tie-breaking.
Matching maximum_matching(const IncidenceMatrix& B);

// Tarjan SCC over the matching-induced dependency digraph. Requires a
// perfect matching. When sys is given, multi-element blocks are classified
// linear/nonlinear via extract_linear_form on the block equations.
BltOrder blt_sort(const IncidenceMatrix& B, const Matching& m,
                  const SemiExplicitDae* sys = nullptr);

// System row indices of g-rows whose incidence row is all zero.
std::vector<int> detect_constraint_rows(const IncidenceMatrix& B);

struct IndexReport {
    enum Classification { Index0, Index1, Index2Plus };
    Classification cls = Index0;
    int q = 0;                       // matching deficiency on the g/z block
    std::vector<int> constraint_rows; // system row indices
};

IndexReport structural_index_report(const SemiExplicitDae& sys);

std::string index_report_text(const IndexReport& r);

// --- Topological detection ---------------------------------------------

enum class EdgeKind { Inductor, Capacitor, CurrentSource, VoltageSource, Resistive };

struct CircuitGraph {
    struct Edge {
        int u, v;
        EdgeKind kind;
        std::string label;
    };
    std::vector<std::string> node_names;
    std::vector<Edge> edges;
    int ground = -1;

    int add_node(const std::string& name);
    int node(const std::string& name) const; // throws if unknown
    void add_edge(const std::string& u, const std::string& v, EdgeKind kind,
                  const std::string& label);
};

struct TopoFinding {
    enum Kind { LICutset, CVLoop };
    Kind kind;
    std::vector<int> nodes; // implicated circuit nodes
    std::vector<int> edges; // boundary (cutset) or loop edges
};

// LI-cutsets as connected components of the non-{inductor,current-source}
// subgraph that exclude ground; CV-loops as independent cycles of the
// {capacitor,voltage-source} subgraph.
std::vector<TopoFinding> detect_topological_index2(const CircuitGraph& c);

std::string findings_table(const CircuitGraph& c, const std::vector<TopoFinding>& f);

} // namespace emtdq

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "emtdq/dae.hpp"
#include "emtdq/devices.hpp"
#include "emtdq/structural.hpp"

namespace emtdq {

// --- Case description -----------------------------------------------------

struct Bus {
    std::string name;
    double kv = 1.0;
};

struct LineDevice {
    std::string name, from, to;
    LineParams p;
};

struct TransformerDevice {
    std::string name, from, to;
    TransformerParams p;
};

struct LoadDevice {
    std::string name, bus;
    LoadParams p;
    // 20% step: admittance scaled by (1 + fraction) at step_time.
    double step_time = -1.0;
    double step_fraction = 0.0;
};

struct SgDevice {
    std::string name, bus;
    SauerPaiParams machine;
    AvrTypeIParams avr;
    bool slack = false;
    double v_set = 1.0, p_set = 0.0;
    // operating references, filled by init
    double tau_m = 0.0, v_ref = 1.0;
};

struct GfmDevice {
    std::string name, bus;
    GfmParams p;
    bool slack = false;
    double v_set = 1.0, p_set = 0.0;
    double p_ref = 0.0, q_ref = 0.0, v_set_op = 1.0;
};

struct ShuntCapDevice {
    std::string name, bus;
    double b = 0.0;
};

// Plain series RL branch; `to` may be "gnd". Used by the minimal fixtures.
struct RlBranchDevice {
    std::string name, from, to;
    double r = 0.0, x = 0.0;
};

// Independent voltage source F(t) = f0 + fa*sin(fw*t) per axis.
struct VSourceDevice {
    std::string name, bus;
    double fd0 = 1.0, fda = 0.0, fdw = 0.0;
    double fq0 = 0.0, fqa = 0.0, fqw = 0.0;
};

struct NetworkCase {
    std::string name;
    double base_mva = 100.0;
    double freq_hz = 60.0;
    std::vector<Bus> buses;
    std::vector<LineDevice> lines;
    std::vector<TransformerDevice> transformers;
    std::vector<LoadDevice> loads;
    std::vector<SgDevice> sgs;
    std::vector<GfmDevice> gfms;
    std::vector<ShuntCapDevice> shunts;
    std::vector<RlBranchDevice> rlbranches;
    std::vector<VSourceDevice> vsources;

    double omega0() const { return 2.0 * 3.14159265358979323846 * freq_hz; }
    int bus_index(const std::string& n) const; // -1 when unknown
    double bus_shunt_b(int bus) const;         // accumulated shunt susceptance
    void validate() const;                     // attachments and parameter checks
};

// Registers the 20% load step on the load at `bus`. Throws when the bus
// hosts no load. fraction == 0 leaves the case untouched.
void apply_load_step(NetworkCase& c, const std::string& bus, double fraction,
                     double time);

// --- Scaling (Table-style replicated cases) -------------------------------

struct ScalingSpec {
    int n = 1;
    unsigned seed = 42;
};

NetworkCase scale_case(const NetworkCase& base, const ScalingSpec& spec);

// --- Assembly ---------------------------------------------------------------

// Flat MNA formulation over an expression graph. Index-2 wherever a
// transformer magnetizing node or machine stator interface appears.
std::shared_ptr<SemiExplicitDae> assemble_raw(const NetworkCase& c);

CircuitGraph build_circuit_graph(const NetworkCase& c);

struct CaseCounts {
    std::string case_name;
    int buses = 0, states = 0, algebraic = 0;
    int sgs = 0, inverters = 0, lines = 0, transformers = 0;
};

CaseCounts report_counts(const NetworkCase& c, int states, int algebraic);
std::string counts_csv_header();
std::string counts_csv_row(const CaseCounts& k);

// --- Case file I/O ----------------------------------------------------------

std::string write_case_file(const NetworkCase& c);
NetworkCase read_case_file(const std::string& text); // throws with line numbers

} // namespace emtdq

#pragma once

#include <complex>
#include <map>

#include "emtdq/composed.hpp"

namespace emtdq {

struct PowerFlowSolution {
    std::vector<std::complex<double>> v;               // per case bus
    std::map<std::string, std::complex<double>> xfmr_vm;     // transformer internal nodes
    std::map<std::string, std::complex<double>> injection;   // per source device, S = P + jQ
    std::map<std::string, std::complex<double>> inj_current; // per source device
    int iterations = 0;
    double mismatch = 0.0;
};

// Newton-Raphson power flow over the case buses; loads and transformer
// star points live inside the admittance matrix, so sources are the only
// injections. Flat start; SG/GFM buses are PV, one device is slack.
PowerFlowSolution solve_power_flow(const NetworkCase& c, double tol = 1e-10,
                                   int max_iter = 50);

// Back-solves every device's internal state from the power flow and writes
// the operating references (tau_m, v_ref, droop setpoints) into the case.
// Returns state values keyed by variable name.
std::map<std::string, double> initialize_devices(NetworkCase& c,
                                                 const PowerFlowSolution& pf);

// Newton polish of rhs(y) = 0 with a rank-tolerant least-squares step (the
// equilibrium set carries the rotational symmetry direction).
struct RefineResult {
    Vec y;
    int iterations = 0;
    double residual = 0.0;
};
RefineResult refine_equilibrium(const Model& model, const Vec& y0, double tol = 1e-10,
                                int max_iter = 50);

// Full chain: power flow, device init, composed-model build, refinement.
struct InitResult {
    std::shared_ptr<ComposedModel> model;
    Vec y0;
    PowerFlowSolution pf;
    RefineResult refine;
};
InitResult initialize_case(NetworkCase& c, double pf_tol = 1e-10, double eq_tol = 1e-10);

// variable,value rows in full precision.
std::string write_ic_csv(const std::vector<std::string>& names, const Vec& y);
std::map<std::string, double> read_ic_csv(const std::string& text);

} // namespace emtdq

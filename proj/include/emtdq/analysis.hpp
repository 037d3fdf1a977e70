#pragma once

#include <complex>
#include <string>
#include <vector>

#include "emtdq/dae.hpp"
#include "emtdq/integrator.hpp"

namespace emtdq {

// Schur-complement state matrix A = f_x - f_z gz^{-1} g_x of an index-1
// system (A = f_x when no algebraic variables). Refuses singular gz with a
// nullity report.
Mat state_matrix(const SemiExplicitDae& sys, double t, std::span<const double> x,
                 std::span<const double> z);

// Greedy nearest-neighbor pairing, infinity norm of the pair distances.
double eigen_diff(std::vector<std::complex<double>> a,
                  std::vector<std::complex<double>> b);

// --- Trajectory comparison -------------------------------------------------

struct TrajTable {
    std::vector<std::string> names;
    std::vector<double> t;
    Mat vals; // row per time, column per variable
};

TrajTable sample_trajectory(const Trajectory& tr, double dt);
std::string trajectory_csv(const TrajTable& t);
TrajTable parse_trajectory_csv(const std::string& text);

struct EquivalenceReport {
    std::vector<std::string> variables;
    std::vector<double> infnorm; // per shared variable
    double max = 0.0;
    double mean = 0.0;
};

// Shared-name intersection; grids must agree.
EquivalenceReport table_diff(const TrajTable& a, const TrajTable& b);
EquivalenceReport trajectory_diff(const Trajectory& a, const Trajectory& b, double dt);
std::string equivalence_csv(const EquivalenceReport& r);

// --- Benchmark records -------------------------------------------------------

struct BenchRecord {
    std::string case_id;
    int buses = 0;
    int rep = 0;
    bool warmup = false; // rep 0, excluded from aggregates
    bool failed = false;
    double wall_seconds = 0.0;
    long long peak_rss_bytes = 0;
    long long alloc_bytes = -1; // -1 when the runtime exposes no counter
};

std::string bench_csv_header();
std::string bench_csv_row(const BenchRecord& r);

struct ScalingFit {
    double exponent = 0.0;
    double r2 = 0.0;
};

// Least-squares slope of log(metric) vs log(buses); metric must be positive.
ScalingFit fit_scaling(const std::vector<double>& buses,
                       const std::vector<double>& metric);

} // namespace emtdq

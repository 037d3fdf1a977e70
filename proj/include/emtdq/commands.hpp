#pragma once

#include <atomic>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "emtdq/analysis.hpp"
#include "emtdq/builder.hpp"

namespace emtdq {

// Set by a binary that overrides global operator new; bench reports -1 for
// allocation volume when absent.
extern std::atomic<long long>* alloc_counter;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace cmd {

// exit codes: 0 success, 2 usage/input error, 3 numerical failure
inline constexpr int kOk = 0, kUsage = 2, kNumerical = 3;

enum class Formulation { Reduced, ReferenceReduced, Raw };

struct CaseArgs {
    std::string source; // built-in name or case file path
    int scale_n = 1;
    unsigned seed = 42;
};

NetworkCase load_case(const CaseArgs& a); // throws UsageError

struct Perturb {
    std::string bus;
    double fraction = 0.0;
    double time = 0.25;
};

struct SimulateArgs {
    CaseArgs c;
    Formulation formulation = Formulation::Reduced;
    bool allow_index2 = false;
    std::optional<Perturb> perturb;
    double tstop = 5.0;
    double rtol = 1e-7;
    double atol = 1e-9;
    double grid_dt = 1e-3;
    std::string out;        // trajectory csv path
    std::string ic;         // optional initial-condition csv
    std::string stats_out;  // optional stats file
};

int detect(const CaseArgs& a, std::ostream& out, std::ostream& err);
int reduce(const CaseArgs& a, bool report, std::ostream& out, std::ostream& err);
int build(const CaseArgs& a, Formulation f, const std::string& out_csv, bool bench_emit,
          std::ostream& out, std::ostream& err);
int init_cmd(const CaseArgs& a, const std::string& out_path, std::ostream& out,
             std::ostream& err);
int simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err);
int compare(const std::string& file_a, const std::string& file_b,
            const std::string& out_csv, std::ostream& out, std::ostream& err);
int eig(const CaseArgs& a, Formulation f, const std::string& out_csv, std::ostream& out,
        std::ostream& err);

struct BenchArgs {
    std::string cases = "c1..c8";
    int reps = 5;
    std::string out_dir = ".";
    std::string child_cmd; // CLI binary for fresh-process measurement; empty
                           // degrades to in-process timing
};

int bench(const BenchArgs& a, std::ostream& out, std::ostream& err);

int plotdata(const std::string& traj_csv, const std::vector<std::string>& vars,
             const std::string& out_dir, std::ostream& out, std::ostream& err);

// Emits one BENCH line for the current process (used by bench subprocesses).
int bench_emit(const CaseArgs& a, std::ostream& out, std::ostream& err);

} // namespace cmd

} // namespace emtdq

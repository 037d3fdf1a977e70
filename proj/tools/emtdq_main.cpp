#include <iostream>

#include <CLI11.hpp>

#include "emtdq/commands.hpp"

using namespace emtdq;

namespace {

cmd::Formulation parse_formulation(const std::string& s) {
    if (s == "reduced") return cmd::Formulation::Reduced;
    if (s == "reference-reduced" || s == "reference") return cmd::Formulation::ReferenceReduced;
    if (s == "raw") return cmd::Formulation::Raw;
    throw CLI::ValidationError("formulation", "expected reduced | reference-reduced | raw");
}

// --perturb bus=8,frac=0.2,t=0.25
cmd::Perturb parse_perturb(const std::string& s) {
    cmd::Perturb p;
    std::istringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        auto eq = tok.find('=');
        if (eq == std::string::npos)
            throw CLI::ValidationError("perturb", "expected bus=<name>,frac=<x>,t=<s>");
        std::string k = tok.substr(0, eq), v = tok.substr(eq + 1);
        if (k == "bus") p.bus = v;
        else if (k == "frac") p.fraction = std::stod(v);
        else if (k == "t") p.time = std::stod(v);
        else throw CLI::ValidationError("perturb", "unknown key '" + k + "'");
    }
    if (p.bus.empty()) throw CLI::ValidationError("perturb", "bus is required");
    return p;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"balanced EMT-dq modeling kit: index-2 detection, index reduction, "
                 "simulation and equivalence analysis"};
    app.require_subcommand(1);

    std::string out_dir = ".";
    if (const char* env = std::getenv("EMTDQ_OUT_DIR")) out_dir = env;

    cmd::CaseArgs ca;
    auto add_case_opts = [&](CLI::App* sc) {
        sc->add_option("--case", ca.source, "built-in case name or case file path")->required();
        sc->add_option("--scale", ca.scale_n, "replicate the case n times");
        sc->add_option("--seed", ca.seed, "interconnection seed");
    };

    int rc = 0;

    auto* det = app.add_subcommand("detect", "structural + topological index-2 report");
    add_case_opts(det);
    det->callback([&] { rc = cmd::detect(ca, std::cout, std::cerr); });

    auto* red = app.add_subcommand("reduce", "run the reference index reduction");
    add_case_opts(red);
    bool report = false;
    red->add_flag("--report", report, "print q, selections and block sizes");
    red->callback([&] { rc = cmd::reduce(ca, report, std::cout, std::cerr); });

    auto* bld = app.add_subcommand("build", "assemble a formulation and report counts");
    add_case_opts(bld);
    std::string formulation = "reduced", build_out;
    bool bench_emit = false;
    bld->add_option("--formulation", formulation, "reduced | reference-reduced | raw");
    bld->add_option("--out", build_out, "write counts csv here");
    bld->add_flag("--bench-emit", bench_emit, "emit a BENCH measurement line and exit");
    bld->callback([&] {
        rc = cmd::build(ca, parse_formulation(formulation), build_out, bench_emit,
                        std::cout, std::cerr);
    });

    auto* ini = app.add_subcommand("init", "power flow + device initialization");
    add_case_opts(ini);
    std::string init_out;
    ini->add_option("--out", init_out, "initial-condition csv path");
    ini->callback([&] { rc = cmd::init_cmd(ca, init_out, std::cout, std::cerr); });

    auto* sim = app.add_subcommand("simulate", "integrate and write a trajectory csv");
    add_case_opts(sim);
    cmd::SimulateArgs sa;
    std::string perturb_str;
    sim->add_option("--formulation", formulation, "reduced | reference-reduced | raw");
    sim->add_flag("--allow-index2", sa.allow_index2,
                  "permit direct integration of the raw index-2 system");
    sim->add_option("--perturb", perturb_str, "bus=<name>,frac=<x>,t=<s>");
    sim->add_option("--tstop", sa.tstop, "horizon in seconds");
    sim->add_option("--rtol", sa.rtol, "relative tolerance");
    sim->add_option("--atol", sa.atol, "absolute tolerance");
    sim->add_option("--grid", sa.grid_dt, "output grid spacing in seconds");
    sim->add_option("--out", sa.out, "trajectory csv path");
    sim->add_option("--ic", sa.ic, "initial-condition csv to load");
    sim->add_option("--stats-out", sa.stats_out, "write solver stats here");
    sim->callback([&] {
        sa.c = ca;
        sa.formulation = parse_formulation(formulation);
        if (!perturb_str.empty()) sa.perturb = parse_perturb(perturb_str);
        rc = cmd::simulate(sa, std::cout, std::cerr);
    });

    auto* cmp = app.add_subcommand("compare", "equivalence report for two trajectory csvs");
    std::string file_a, file_b, cmp_out;
    cmp->add_option("a", file_a, "first trajectory csv")->required();
    cmp->add_option("b", file_b, "second trajectory csv")->required();
    cmp->add_option("--out", cmp_out, "equivalence csv path");
    cmp->callback([&] { rc = cmd::compare(file_a, file_b, cmp_out, std::cout, std::cerr); });

    auto* eg = app.add_subcommand("eig", "state-matrix eigenvalues");
    add_case_opts(eg);
    std::string eig_out;
    eg->add_option("--formulation", formulation, "reduced | reference-reduced");
    eg->add_option("--out", eig_out, "eigenvalue csv path");
    eg->callback([&] {
        rc = cmd::eig(ca, parse_formulation(formulation), eig_out, std::cout, std::cerr);
    });

    auto* ben = app.add_subcommand("bench", "build-time/memory benchmark harness");
    cmd::BenchArgs ba;
    ba.out_dir = out_dir;
    ben->add_option("--cases", ba.cases, "case range, e.g. c1..c8");
    ben->add_option("--reps", ba.reps, "repetitions per case (first is warm-up)");
    ben->add_option("--out-dir", ba.out_dir, "output directory");
    ben->callback([&] {
        ba.child_cmd = argv[0];
        rc = cmd::bench(ba, std::cout, std::cerr);
    });

    auto* pd = app.add_subcommand("plotdata", "split a trajectory csv into per-variable files");
    std::string pd_file;
    std::vector<std::string> pd_vars;
    std::string pd_dir = out_dir;
    pd->add_option("file", pd_file, "trajectory csv")->required();
    pd->add_option("--vars", pd_vars, "variable names (all when omitted)")->delimiter(',');
    pd->add_option("--out-dir", pd_dir, "output directory");
    pd->callback([&] { rc = cmd::plotdata(pd_file, pd_vars, pd_dir, std::cout, std::cerr); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : cmd::kUsage;
    }
    return rc;
}

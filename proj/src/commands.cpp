#include "emtdq/commands.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <sys/resource.h>

#include "emtdq/cases.hpp"
#include "emtdq/init.hpp"
#include "emtdq/reduction.hpp"

namespace emtdq {

std::atomic<long long>* alloc_counter = nullptr;

namespace cmd {

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open file '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void spill(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file '" + path + "'");
    out << text;
}

long long peak_rss_bytes() {
    rusage ru{};
    getrusage(RUSAGE_SELF, &ru);
    return static_cast<long long>(ru.ru_maxrss) * 1024; // KiB on Linux
}

std::string stats_text(const SolverStats& st) {
    std::ostringstream os;
    os << "{ \"steps\": " << st.accepted << ", \"rejected\": " << st.rejected
       << ", \"rhs_evals\": " << st.rhs_evals << ", \"jacobians\": " << st.jac_evals
       << ", \"lu_decompositions\": " << st.lu_decomps << ", \"wall_seconds\": "
       << st.wall_seconds << " }\n";
    return os.str();
}

struct BuiltSystems {
    NetworkCase net;
    InitResult init;
};

BuiltSystems prepare(const CaseArgs& a, const std::optional<Perturb>& p) {
    BuiltSystems b;
    b.net = load_case(a);
    if (p) apply_load_step(b.net, p->bus, p->fraction, p->time);
    b.init = initialize_case(b.net);
    return b;
}

} // namespace

NetworkCase load_case(const CaseArgs& a) {
    NetworkCase c;
    try {
        if (is_builtin_case(a.source)) {
            c = builtin_case(a.source);
        } else {
            c = read_case_file(slurp(a.source));
        }
    } catch (const UsageError&) {
        throw;
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
    if (a.scale_n > 1) {
        ScalingSpec s;
        s.n = a.scale_n;
        s.seed = a.seed;
        c = scale_case(c, s);
    }
    return c;
}

int detect(const CaseArgs& a, std::ostream& out, std::ostream& err) {
    try {
        NetworkCase c = load_case(a);
        auto sys = assemble_raw(c);
        out << "case: " << c.name << "\n";
        out << sys->summary();
        IndexReport rep = structural_index_report(*sys);
        out << index_report_text(rep);
        CircuitGraph cg = build_circuit_graph(c);
        out << findings_table(cg, detect_topological_index2(cg));
        return kOk;
    } catch (const UsageError& e) {
        err << "detect: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        err << "detect: " << e.what() << "\n";
        return kNumerical;
    }
}

int reduce(const CaseArgs& a, bool report, std::ostream& out, std::ostream& err) {
    try {
        NetworkCase c = load_case(a);
        auto sys = assemble_raw(c);
        if (report) {
            out << reduction_report(*sys);
        } else {
            auto red = reduce_index_once(*sys);
            out << "reduced: " << red.sys->n_diff() << " differential, "
                << red.sys->n_alg() << " algebraic, q=" << red.plan.constraint_rows.size()
                << "\n";
        }
        return kOk;
    } catch (const UsageError& e) {
        err << "reduce: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        err << "reduce: " << e.what() << "\n";
        return kNumerical;
    }
}

int build(const CaseArgs& a, Formulation f, const std::string& out_csv, bool bench_emit_flag,
          std::ostream& out, std::ostream& err) {
    if (bench_emit_flag) return bench_emit(a, out, err);
    try {
        NetworkCase c = load_case(a);
        CaseCounts k;
        if (f == Formulation::Reduced) {
            auto m = ComposedModel::build(c);
            k = report_counts(c, m->size(), 0);
        } else {
            auto sys = assemble_raw(c);
            if (f == Formulation::ReferenceReduced) {
                auto red = reduce_index_once(*sys);
                k = report_counts(c, red.sys->n_diff(), red.sys->n_alg());
            } else {
                k = report_counts(c, sys->n_diff(), sys->n_alg());
            }
        }
        out << counts_csv_header() << counts_csv_row(k);
        if (!out_csv.empty()) spill(out_csv, counts_csv_header() + counts_csv_row(k));
        return kOk;
    } catch (const UsageError& e) {
        err << "build: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        err << "build: " << e.what() << "\n";
        return kNumerical;
    }
}

int init_cmd(const CaseArgs& a, const std::string& out_path, std::ostream& out,
             std::ostream& err) {
    try {
        NetworkCase c = load_case(a);
        InitResult r = initialize_case(c);
        err << "power flow: " << r.pf.iterations << " iterations, mismatch "
            << r.pf.mismatch << "\n";
        err << "refinement: " << r.refine.iterations << " iterations, residual "
            << r.refine.residual << "\n";
        std::string csv = write_ic_csv(r.model->names(), r.y0);
        if (!out_path.empty()) {
            spill(out_path, csv);
            out << "wrote " << out_path << " (" << r.model->size() << " states)\n";
        } else {
            out << csv;
        }
        return kOk;
    } catch (const UsageError& e) {
        err << "init: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        err << "init: " << e.what() << "\n";
        return kNumerical;
    }
}

int simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
    try {
        if (a.formulation == Formulation::Raw && !a.allow_index2)
            throw UsageError("raw formulation is index-2; pass --allow-index2 to force "
                             "direct integration");
        if (a.allow_index2 && a.formulation != Formulation::Raw)
            throw UsageError("--allow-index2 applies to the raw formulation only");
        if (a.perturb && a.perturb->time >= a.tstop)
            err << "warning: perturbation at t=" << a.perturb->time
                << " is outside the horizon and never fires\n";

        BuiltSystems b = prepare(a.c, a.perturb);
        Vec y0 = b.init.y0;
        if (!a.ic.empty()) {
            auto vals = read_ic_csv(slurp(a.ic));
            for (int i = 0; i < b.init.model->size(); ++i) {
                auto it = vals.find(b.init.model->names()[i]);
                if (it == vals.end())
                    throw UsageError("ic file lacks state '" + b.init.model->names()[i] + "'");
                y0[i] = it->second;
            }
        }

        IntegratorConfig cfg;
        cfg.rtol = a.rtol;
        cfg.atol = a.atol;
        std::vector<EventSpec> events;
        if (a.perturb && a.perturb->fraction != 0.0 && a.perturb->time < a.tstop)
            events.push_back({a.perturb->time, "load step at " + a.perturb->bus, nullptr});

        Trajectory tr;
        if (a.formulation == Formulation::Reduced) {
            if (a.tstop > 0.0)
                tr = integrate(*b.init.model, y0, 0.0, a.tstop, cfg, events);
        } else {
            auto raw = assemble_raw(b.net);
            std::shared_ptr<const SemiExplicitDae> sys;
            if (a.formulation == Formulation::ReferenceReduced) {
                sys = reduce_index_once(*raw).sys;
            } else {
                sys = raw;
            }
            // Shared differential states come from the composed equilibrium;
            // interface currents and voltages are recovered from the blocks.
            auto iface0 = b.init.model->interface_values(
                0.0, std::span<const double>(y0.data(), y0.size()));
            auto lookup = [&](const std::string& n) {
                int k = b.init.model->index_of(n);
                if (k >= 0) return y0[k];
                auto it = iface0.find(n);
                if (it == iface0.end())
                    throw std::runtime_error("cannot recover state '" + n + "'");
                return it->second;
            };
            Vec x0(sys->n_diff());
            for (int i = 0; i < sys->n_diff(); ++i)
                x0[i] = lookup(sys->var_name(sys->diff_vars()[i]));
            Vec z0(sys->n_alg());
            if (a.formulation == Formulation::ReferenceReduced) {
                AlgebraicSolver solver(sys);
                z0 = solver.solve_algebraic(0.0, std::span<const double>(x0.data(), x0.size()));
            } else {
                auto iface = b.init.model->interface_values(
                    0.0, std::span<const double>(y0.data(), y0.size()));
                for (int j = 0; j < sys->n_alg(); ++j) {
                    std::string n = sys->var_name(sys->alg_vars()[j]);
                    auto it = iface.find(n);
                    int k = b.init.model->index_of(n);
                    if (it != iface.end()) {
                        z0[j] = it->second;
                    } else if (k >= 0) {
                        z0[j] = y0[k];
                    } else {
                        throw std::runtime_error("cannot recover raw algebraic state '" + n + "'");
                    }
                }
            }
            Vec yfull(sys->n_eq());
            yfull.head(sys->n_diff()) = x0;
            yfull.tail(sys->n_alg()) = z0;
            if (a.formulation == Formulation::Raw) {
                auto gz = sys->gz_singularity(0.0,
                                              std::span<const double>(x0.data(), x0.size()),
                                              std::span<const double>(z0.data(), z0.size()));
                if (gz.singular)
                    err << "warning: g_z is singular (nullity " << gz.nullity
                        << "); the system is index-2 and Newton-type iteration matrices "
                           "grow ill-conditioned as the step shrinks -- expect degraded "
                           "error control or solver failure\n";
            }
            DaeModel dm(sys);
            if (a.tstop > 0.0) tr = integrate(dm, yfull, 0.0, a.tstop, cfg, events);
        }

        std::string csv;
        if (a.tstop > 0.0) {
            csv = trajectory_csv(sample_trajectory(tr, a.grid_dt));
            err << "stats: " << stats_text(tr.stats);
        } else {
            // degenerate span: header only
            std::ostringstream os;
            os << "t";
            const auto& names = b.init.model->names();
            for (const auto& n : names) os << "," << n;
            os << "\n";
            csv = os.str();
        }
        if (!a.out.empty()) spill(a.out, csv);
        else out << csv;
        if (!a.stats_out.empty() && a.tstop > 0.0) spill(a.stats_out, stats_text(tr.stats));
        return kOk;
    } catch (const UsageError& e) {
        err << "simulate: " << e.what() << "\n";
        return kUsage;
    } catch (const StepFailure& e) {
        err << "simulate: solver failure: " << e.what() << "\n";
        return kNumerical;
    } catch (const std::exception& e) {
        err << "simulate: " << e.what() << "\n";
        return kNumerical;
    }
}

int compare(const std::string& file_a, const std::string& file_b,
            const std::string& out_csv, std::ostream& out, std::ostream& err) {
    try {
        TrajTable a = parse_trajectory_csv(slurp(file_a));
        TrajTable b = parse_trajectory_csv(slurp(file_b));
        EquivalenceReport r;
        try {
            r = table_diff(a, b);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
        out << "variables compared: " << r.variables.size() << "\n";
        out << "max infnorm:  " << r.max << "\n";
        out << "mean infnorm: " << r.mean << "\n";
        if (!out_csv.empty()) spill(out_csv, equivalence_csv(r));
        return kOk;
    } catch (const UsageError& e) {
        err << "compare: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        err << "compare: " << e.what() << "\n";
        return kNumerical;
    }
}

int eig(const CaseArgs& a, Formulation f, const std::string& out_csv, std::ostream& out,
        std::ostream& err) {
    try {
        BuiltSystems b = prepare(a, std::nullopt);
        Mat A;
        if (f == Formulation::Reduced) {
            A = b.init.model->state_matrix(0.0, b.init.y0);
        } else if (f == Formulation::ReferenceReduced) {
            auto raw = assemble_raw(b.net);
            auto red = reduce_index_once(*raw);
            Vec x0(red.sys->n_diff());
            for (int i = 0; i < red.sys->n_diff(); ++i) {
                int k = b.init.model->index_of(red.sys->var_name(red.sys->diff_vars()[i]));
                x0[i] = b.init.y0[k];
            }
            AlgebraicSolver solver(red.sys);
            Vec z0 = solver.solve_algebraic(0.0, std::span<const double>(x0.data(), x0.size()));
            A = state_matrix(*red.sys, 0.0, std::span<const double>(x0.data(), x0.size()),
                             std::span<const double>(z0.data(), z0.size()));
        } else {
            throw UsageError("eig: the raw index-2 formulation has no state matrix "
                             "(g_z singular); use reduced or reference-reduced");
        }
        auto lam = eigenvalues_sorted(A);
        std::ostringstream os;
        os.precision(17);
        os << "re,im\n";
        for (auto l : lam) os << l.real() << "," << l.imag() << "\n";
        if (!out_csv.empty()) spill(out_csv, os.str());
        else out << os.str();
        err << lam.size() << " eigenvalues\n";
        return kOk;
    } catch (const UsageError& e) {
        err << "eig: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        err << "eig: " << e.what() << "\n";
        return kNumerical;
    }
}

int bench_emit(const CaseArgs& a, std::ostream& out, std::ostream& err) {
    try {
        NetworkCase c = load_case(a);
        long long alloc0 = alloc_counter ? alloc_counter->load() : 0;
        auto t0 = std::chrono::steady_clock::now();
        auto m = ComposedModel::build(c);
        double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        long long alloc1 = alloc_counter ? alloc_counter->load() : 0;
        out << "BENCH case=" << a.source << " buses=" << c.buses.size() << " states="
            << m->size() << " wall=" << wall << " rss=" << peak_rss_bytes()
            << " alloc=" << (alloc_counter ? alloc1 - alloc0 : -1) << "\n";
        return kOk;
    } catch (const std::exception& e) {
        err << "bench-emit: " << e.what() << "\n";
        return kNumerical;
    }
}

namespace {

std::vector<std::string> parse_case_range(const std::string& s) {
    auto dots = s.find("..");
    if (dots == std::string::npos) {
        std::vector<std::string> out;
        std::istringstream in(s);
        std::string tok;
        while (std::getline(in, tok, ',')) out.push_back(tok);
        return out;
    }
    std::string a = s.substr(0, dots), b = s.substr(dots + 2);
    if (a.size() != 2 || b.size() != 2 || a[0] != 'c' || b[0] != 'c' || a[1] > b[1])
        throw UsageError("bad case range '" + s + "' (expected like c1..c8)");
    std::vector<std::string> out;
    for (char k = a[1]; k <= b[1]; ++k) out.push_back(std::string("c") + k);
    return out;
}

std::optional<BenchRecord> run_child(const std::string& child_cmd, const std::string& id,
                                     int rep) {
    std::string cmd = child_cmd + " build --case " + id + " --bench-emit 2>/dev/null";
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return std::nullopt;
    std::string line;
    char buf[512];
    while (fgets(buf, sizeof buf, p)) line += buf;
    int rc = pclose(p);
    BenchRecord r;
    r.case_id = id;
    r.rep = rep;
    r.warmup = rep == 0;
    if (rc != 0 || line.find("BENCH") == std::string::npos) {
        r.failed = true; // out-of-memory or crash becomes a recorded failure row
        return r;
    }
    auto grab = [&](const std::string& key) -> double {
        auto pos = line.find(key + "=");
        if (pos == std::string::npos) return 0.0;
        return std::stod(line.substr(pos + key.size() + 1));
    };
    r.buses = static_cast<int>(grab("buses"));
    r.wall_seconds = grab("wall");
    r.peak_rss_bytes = static_cast<long long>(grab("rss"));
    r.alloc_bytes = static_cast<long long>(grab("alloc"));
    return r;
}

BenchRecord run_in_process(const std::string& id, int rep) {
    BenchRecord r;
    r.case_id = id;
    r.rep = rep;
    r.warmup = rep == 0;
    try {
        NetworkCase c = builtin_case(id);
        r.buses = static_cast<int>(c.buses.size());
        long long a0 = alloc_counter ? alloc_counter->load() : 0;
        auto t0 = std::chrono::steady_clock::now();
        auto m = ComposedModel::build(c);
        r.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        r.peak_rss_bytes = peak_rss_bytes();
        r.alloc_bytes = alloc_counter ? alloc_counter->load() - a0 : -1;
        (void)m;
    } catch (const std::exception&) {
        r.failed = true;
    }
    return r;
}

} // namespace

int bench(const BenchArgs& a, std::ostream& out, std::ostream& err) {
    try {
        auto ids = parse_case_range(a.cases);
        for (const auto& id : ids)
            if (!is_builtin_case(id)) throw UsageError("unknown case id '" + id + "'");
        if (a.reps < 1) throw UsageError("reps must be >= 1");
        if (a.reps == 1)
            err << "warning: reps=1 leaves only the warm-up run; aggregates will be empty\n";

        std::vector<BenchRecord> records;
        for (const auto& id : ids) {
            for (int rep = 0; rep < a.reps; ++rep) {
                std::optional<BenchRecord> r;
                if (!a.child_cmd.empty()) r = run_child(a.child_cmd, id, rep);
                if (!r) r = run_in_process(id, rep);
                records.push_back(*r);
                err << "bench " << id << " rep " << rep << (r->warmup ? " (warmup)" : "")
                    << (r->failed ? " FAILED" : "") << " wall=" << r->wall_seconds << "s\n";
            }
        }

        std::ostringstream csv;
        csv << bench_csv_header();
        for (const auto& r : records) csv << bench_csv_row(r);
        std::filesystem::create_directories(a.out_dir);
        spill(a.out_dir + "/bench.csv", csv.str());

        // Aggregates exclude the warm-up repetition.
        std::vector<double> buses, wall, rss;
        for (const auto& id : ids) {
            double w = 0, rs = 0;
            int n = 0, nb = 0;
            for (const auto& r : records)
                if (r.case_id == id && !r.warmup && !r.failed) {
                    w += r.wall_seconds;
                    rs = std::max(rs, static_cast<double>(r.peak_rss_bytes));
                    nb = r.buses;
                    ++n;
                }
            if (n == 0) continue;
            buses.push_back(nb);
            wall.push_back(w / n);
            rss.push_back(rs);
        }
        std::ostringstream scale;
        if (buses.size() >= 3) {
            ScalingFit fw = fit_scaling(buses, wall);
            scale << "build wall time: exponent " << fw.exponent << " (r2 " << fw.r2 << ")\n";
            ScalingFit fr = fit_scaling(buses, rss);
            scale << "peak rss: exponent " << fr.exponent << " (r2 " << fr.r2 << ")\n";
        } else {
            scale << "not enough case sizes for a scaling fit\n";
        }
        spill(a.out_dir + "/scaling.txt", scale.str());
        out << scale.str();
        return kOk;
    } catch (const UsageError& e) {
        err << "bench: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        err << "bench: " << e.what() << "\n";
        return kNumerical;
    }
}

int plotdata(const std::string& traj_csv, const std::vector<std::string>& vars,
             const std::string& out_dir, std::ostream& out, std::ostream& err) {
    try {
        TrajTable t = parse_trajectory_csv(slurp(traj_csv));
        std::vector<std::string> selected = vars;
        if (selected.empty()) selected = t.names;
        std::filesystem::create_directories(out_dir);
        for (const auto& v : selected) {
            auto it = std::find(t.names.begin(), t.names.end(), v);
            if (it == t.names.end()) {
                std::string close;
                for (const auto& n : t.names)
                    if (n.find(v) != std::string::npos) close += " " + n;
                throw UsageError("unknown variable '" + v + "'" +
                                 (close.empty() ? "" : "; close matches:" + close));
            }
            int j = static_cast<int>(it - t.names.begin());
            std::ostringstream os;
            os.precision(17);
            os << "t," << v << "\n";
            for (std::size_t k = 0; k < t.t.size(); ++k)
                os << t.t[k] << "," << t.vals(k, j) << "\n";
            std::string fn = v;
            for (auto& ch : fn)
                if (ch == '/' || ch == ':') ch = '_';
            spill(out_dir + "/" + fn + ".csv", os.str());
        }
        out << "wrote " << selected.size() << " files to " << out_dir << "\n";
        return kOk;
    } catch (const UsageError& e) {
        err << "plotdata: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        err << "plotdata: " << e.what() << "\n";
        return kNumerical;
    }
}

} // namespace cmd

} // namespace emtdq

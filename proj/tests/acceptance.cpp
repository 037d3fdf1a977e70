// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one pass/fail line per criterion.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "emtdq/analysis.hpp"
#include "emtdq/cases.hpp"
#include "emtdq/commands.hpp"
#include "emtdq/composed.hpp"
#include "emtdq/init.hpp"
#include "emtdq/integrator.hpp"
#include "emtdq/reduction.hpp"

#include "s1_fixture.hpp"

using namespace emtdq;

namespace {

int g_failures = 0;

void report(int id, bool pass, const std::string& detail) {
    std::cout << (pass ? "PASS" : "FAIL") << " criterion " << id << ": " << detail << "\n";
    std::cout.flush();
    if (!pass) ++g_failures;
}

struct RunPair {
    Trajectory reduced, reference;
    std::shared_ptr<ComposedModel> model;
    std::shared_ptr<SemiExplicitDae> ref_sys;
    Vec y0;
    double wall_seconds = 0.0;
};

RunPair run_case(const std::string& name, double tstop) {
    auto t0 = std::chrono::steady_clock::now();
    RunPair out;
    NetworkCase c = builtin_case(name);
    apply_load_step(c, "bus8", 0.2, 0.25);
    InitResult ir = initialize_case(c);
    out.model = ir.model;
    out.y0 = ir.y0;

    IntegratorConfig cfg; // defaults: rtol 1e-7, atol 1e-9
    std::vector<EventSpec> ev{{0.25, "20% load step at bus8", nullptr}};
    out.reduced = integrate(*ir.model, ir.y0, 0.0, tstop, cfg, ev);

    auto raw = assemble_raw(c);
    out.ref_sys = reduce_index_once(*raw).sys;
    Vec x0(out.ref_sys->n_diff());
    for (int i = 0; i < out.ref_sys->n_diff(); ++i)
        x0[i] = ir.y0[ir.model->index_of(out.ref_sys->var_name(out.ref_sys->diff_vars()[i]))];
    AlgebraicSolver solver(out.ref_sys);
    Vec z0 = solver.solve_algebraic(0.0, std::span<const double>(x0.data(), x0.size()));
    Vec y0(out.ref_sys->n_eq());
    y0.head(out.ref_sys->n_diff()) = x0;
    y0.tail(out.ref_sys->n_alg()) = z0;
    DaeModel dm(out.ref_sys);
    out.reference = integrate(dm, y0, 0.0, tstop, cfg, ev);

    out.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

SauerPaiParams random_machine(std::mt19937& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    SauerPaiParams m;
    m.xl = 0.02 + 0.08 * u(rng);
    m.xd_pp = m.xl + 0.02 + 0.2 * u(rng);
    m.xd_p = m.xd_pp + 0.3 * u(rng);
    m.xd = m.xd_p + 0.8 * u(rng);
    m.xq_pp = m.xl + 0.02 + 0.2 * u(rng);
    m.xq_p = m.xq_pp + 0.3 * u(rng);
    m.xq = m.xq_p + 0.8 * u(rng);
    m.ra = 0.01 * u(rng);
    m.td0_p = 4.0 + 4.0 * u(rng);
    m.tq0_p = 0.3 + u(rng);
    m.td0_pp = 0.02 + 0.05 * u(rng);
    m.tq0_pp = 0.03 + 0.08 * u(rng);
    m.h = 2.0 + 10.0 * u(rng);
    m.d = 2.0 * u(rng);
    return m;
}

TransformerParams random_transformer(std::mt19937& rng) {
    std::uniform_real_distribution<double> x(0.01, 2.0), r(0.0, 0.1);
    return {r(rng), x(rng), r(rng), x(rng), r(rng), x(rng)};
}

constexpr double kW0 = 376.99111843077515;

} // namespace

int main() {
    // ---- criteria 1 + 2: formulation equivalence and constraint drift ----
    bool have_c1 = false;
    RunPair c1;
    try {
        c1 = run_case("wscc9", 5.0);
        have_c1 = true;
        EquivalenceReport eq = trajectory_diff(c1.reduced, c1.reference, 1e-3);

        Mat a_red = c1.model->state_matrix(0.0, c1.y0);
        Vec x0(c1.ref_sys->n_diff());
        for (int i = 0; i < c1.ref_sys->n_diff(); ++i)
            x0[i] = c1.y0[c1.model->index_of(c1.ref_sys->var_name(c1.ref_sys->diff_vars()[i]))];
        AlgebraicSolver solver(c1.ref_sys);
        Vec z0 = solver.solve_algebraic(0.0, std::span<const double>(x0.data(), x0.size()));
        Mat a_ref = state_matrix(*c1.ref_sys, 0.0,
                                 std::span<const double>(x0.data(), x0.size()),
                                 std::span<const double>(z0.data(), z0.size()));
        double ediff = eigen_diff(eigenvalues_sorted(a_red), eigenvalues_sorted(a_ref));

        RunPair c2 = run_case("c2", 5.0);
        EquivalenceReport eq2 = trajectory_diff(c2.reduced, c2.reference, 1e-3);
        RunPair c3 = run_case("c3", 5.0);
        EquivalenceReport eq3 = trajectory_diff(c3.reduced, c3.reference, 1e-3);

        bool pass = eq.max <= 1e-4 && eq.mean <= 1e-5 && ediff <= 1e-6 &&
                    c1.wall_seconds <= 120.0 && eq2.max <= 2e-4 && eq3.max <= 2e-4;
        report(1, pass,
               "C1 max " + fmt(eq.max) + " (<=1e-4), mean " + fmt(eq.mean) +
                   " (<=1e-5), eigen diff " + fmt(ediff) + " (<=1e-6), runtime " +
                   fmt(c1.wall_seconds) + " s (<=120); C2 max " + fmt(eq2.max) +
                   ", C3 max " + fmt(eq3.max) + " (<=2e-4)");
    } catch (const std::exception& e) {
        report(1, false, std::string("exception: ") + e.what());
    }

    try {
        if (!have_c1) throw std::runtime_error("criterion 1 setup failed");
        // custom formulation: identities recomputed from states
        double worst_custom = 0.0;
        for (double t = 0.0; t <= 5.0; t += 1e-3) {
            Vec y = c1.reduced.at(t);
            auto r = c1.model->constraint_residuals(t, std::span<const double>(y.data(), y.size()));
            worst_custom = std::max({worst_custom, r.magnetizing, r.stator});
        }
        // reference formulation: retained constraint rows evaluated along
        // the trajectory (the first ten g-rows are the original KCLs)
        auto ws = c1.ref_sys->make_workspace();
        const int nd = c1.ref_sys->n_diff(), na = c1.ref_sys->n_alg();
        double worst_ref = 0.0;
        for (double t = 0.0; t <= 5.0; t += 1e-3) {
            Vec y = c1.reference.at(t);
            c1.ref_sys->load_point(t, std::span<const double>(y.data(), nd),
                                   std::span<const double>(y.data() + nd, na), ws);
            for (int k = 0; k < 10; ++k)
                worst_ref = std::max(worst_ref,
                                     std::abs(ws.node_values[c1.ref_sys->g_equations()[k]]));
        }
        bool pass = worst_custom <= 1e-6 && worst_ref <= 1e-6;
        report(2, pass, "KCL residuals: custom " + fmt(worst_custom) + ", reference " +
                            fmt(worst_ref) + " (<=1e-6)");
    } catch (const std::exception& e) {
        report(2, false, std::string("exception: ") + e.what());
    }

    // ---- criterion 3: index identification -------------------------------
    try {
        auto fig1 = assemble_raw(builtin_case("fig1-cutset"));
        auto fig2 = assemble_raw(builtin_case("fig2-loop"));
        IndexReport r1 = structural_index_report(*fig1);
        IndexReport r2 = structural_index_report(*fig2);

        auto rawc1 = assemble_raw(builtin_case("wscc9"));
        IndexReport rc1 = structural_index_report(*rawc1);
        // numeric-nullity oracle of g_z
        std::vector<double> x(rawc1->n_diff(), 0.4), z(rawc1->n_alg(), 0.4);
        auto gz = rawc1->gz_singularity(0.0, x, z);

        auto reduced = ComposedModel::build(builtin_case("wscc9"));
        bool pass = r1.cls == IndexReport::Index2Plus && r1.q == 2 &&
                    r2.cls == IndexReport::Index2Plus && r2.q == 2 &&
                    rc1.cls == IndexReport::Index2Plus && rc1.q == 10 &&
                    gz.singular && gz.nullity == 10 &&
                    reduced->n_diff() == reduced->size();
        report(3, pass,
               "fig1 q=" + std::to_string(r1.q) + ", fig2 q=" + std::to_string(r2.q) +
                   ", raw C1 q=" + std::to_string(rc1.q) + " (nullity " +
                   std::to_string(gz.nullity) + "), reduced C1 algebraic count 0");
    } catch (const std::exception& e) {
        report(3, false, std::string("exception: ") + e.what());
    }

    // ---- criterion 4: phase-one bookkeeping -------------------------------
    try {
        bool pass = true;
        std::string detail;
        for (const char* name : {"s1-min", "s2-min"}) {
            auto raw = assemble_raw(builtin_case(name));
            int nd = raw->n_diff(), na = raw->n_alg(), ne = raw->n_eq();
            auto red = reduce_index_once(*raw);
            int q = static_cast<int>(red.plan.constraint_rows.size());
            bool ok = red.sys->n_diff() == nd - q && red.sys->n_alg() == na + 2 * q &&
                      red.sys->n_eq() == ne + q &&
                      structural_index_report(*red.sys).cls == IndexReport::Index1;
            pass = pass && ok;
            detail += std::string(name) + " q=" + std::to_string(q) +
                      (ok ? " ok; " : " VIOLATED; ");
        }
        report(4, pass, detail + "(+q equations, +2q algebraic, -q differential, index-1)");
    } catch (const std::exception& e) {
        report(4, false, std::string("exception: ") + e.what());
    }

    // ---- criterion 5: conditioning reproduction ---------------------------
    try {
        // normalized time scale (w0 = 1) keeps the whole grid inside the
    // asymptotic 1/h regime the criterion measures
    auto fx = testfix::make_s1({0.01, 0.6, 0.02, 0.4, 0.8, 1.5}, 1.0);
        auto raw = fx.sys;
        std::mt19937 rng(3);
        std::uniform_real_distribution<double> u(0.2, 1.0);
        std::vector<double> x(raw->n_diff()), z(raw->n_alg());
        for (auto& v : x) v = u(rng);
        for (auto& v : z) v = u(rng);
        std::vector<double> grid{1e-3, 1e-4, 1e-5, 1e-6, 1e-7};
        ConditioningSweep raw_sweep = conditioning_sweep(*raw, 0.0, x, z, grid, 1);

        auto red = reduce_index_once(*raw);
        AlgebraicSolver solver(red.sys);
        std::vector<double> xr(red.sys->n_diff());
        for (auto& v : xr) v = u(rng);
        Vec zr = solver.solve_algebraic(0.0, xr);
        ConditioningSweep red_sweep = conditioning_sweep(
            *red.sys, 0.0, xr, std::span<const double>(zr.data(), zr.size()), grid, 1);

        bool pass = raw_sweep.slope <= -0.9 && red_sweep.slope >= -0.1;
        report(5, pass, "raw slope " + fmt(raw_sweep.slope) + " (<=-0.9), reduced slope " +
                            fmt(red_sweep.slope) + " (>=-0.1)");
    } catch (const std::exception& e) {
        report(5, false, std::string("exception: ") + e.what());
    }

    // ---- criterion 6: Schur vs LU -----------------------------------------
    try {
        std::mt19937 rng(41);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        double worst = 0.0;
        for (int t = 0; t < 1000; ++t) {
            SauerPaiParams m = random_machine(rng);
            TransformerParams tp = random_transformer(rng);
            double delta = 3.0 * u(rng), omega = 1.0 + 0.1 * u(rng);
            double psi_d = u(rng), psi_q = u(rng);
            double id = u(rng), iq = u(rng);
            double dedp = u(rng), deqp = u(rng), dp2d = u(rng), dp2q = u(rng);
            RI<double> i1{u(rng), u(rng)}, i2{u(rng), u(rng)}, i3 = i1 - i2;
            RI<double> v2{1.0 + 0.2 * u(rng), 0.2 * u(rng)};
            auto iv = solve_interface_voltages(m, tp, delta, omega, psi_d, psi_q, id, iq,
                                               dedp, deqp, dp2d, dp2q, i1, i2, i3, v2, kW0);
            Mat A(4, 4);
            A << -1.0 / tp.x1, 0, 1.0 / tp.x1 + iv.phi_dq, iv.theta,
                 0, -1.0 / tp.x1, iv.theta, 1.0 / tp.x1 + iv.phi_qd,
                 1.0 / tp.x2 + 1.0 / tp.x3, 0, iv.phi_dq, iv.theta,
                 0, 1.0 / tp.x2 + 1.0 / tp.x3, iv.theta, iv.phi_qd;
            Vec b(4);
            b << iv.beta_r / kW0 + (tp.r1 / tp.x1) * i1.re - i1.im,
                 iv.beta_i / kW0 + (tp.r1 / tp.x1) * i1.im + i1.re,
                 iv.beta_r / kW0 + v2.re / tp.x2 + (tp.r2 / tp.x2) * i2.re +
                     (tp.r3 / tp.x3) * i3.re - i2.im - i3.im,
                 iv.beta_i / kW0 + v2.im / tp.x2 + (tp.r2 / tp.x2) * i2.im +
                     (tp.r3 / tp.x3) * i3.im + i2.re + i3.re;
            Vec sol = lu_solve(A, b);
            double scale = std::max(1.0, sol.cwiseAbs().maxCoeff());
            worst = std::max({worst, std::abs(sol[0] - iv.v3.re) / scale,
                              std::abs(sol[1] - iv.v3.im) / scale,
                              std::abs(sol[2] - iv.v1.re) / scale,
                              std::abs(sol[3] - iv.v1.im) / scale});
        }
        report(6, worst <= 1e-12,
               "Schur vs dense LU worst relative " + fmt(worst) + " over 1000 draws (<=1e-12)");
    } catch (const std::exception& e) {
        report(6, false, std::string("exception: ") + e.what());
    }

    // ---- criterion 7: hand-derived vs mechanical reduction ----------------
    try {
        std::mt19937 rng(2024);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        double worst_s1 = 0.0;

        // S1: 20 parameter draws x 50 states
        for (int pd = 0; pd < 20; ++pd) {
            TransformerParams tp = random_transformer(rng);
            NetworkCase c = builtin_case("s1-min");
            c.transformers[0].p = tp;
            auto raw = assemble_raw(c);
            auto red = reduce_index_once(*raw);
            AlgebraicSolver solver(red.sys);
            auto model = ComposedModel::build(c);
            const int nd = red.sys->n_diff();
            std::vector<int> map(nd);
            for (int i = 0; i < nd; ++i)
                map[i] = model->index_of(red.sys->var_name(red.sys->diff_vars()[i]));
            for (int t = 0; t < 50; ++t) {
                Vec y(model->size());
                for (int i = 0; i < y.size(); ++i) y[i] = 0.4 + 0.6 * u(rng);
                Vec x(nd);
                for (int i = 0; i < nd; ++i) x[i] = y[map[i]];
                Vec fr = solver.ode_rhs(0.0, std::span<const double>(x.data(), nd));
                std::vector<double> fc(model->size());
                model->rhs(0.0, std::span<const double>(y.data(), y.size()), fc);
                for (int i = 0; i < nd; ++i) {
                    std::string n = red.sys->var_name(red.sys->diff_vars()[i]);
                    if (n.find("T1.") != 0) continue; // the transformer block is under test
                    double a = fr[i], b = fc[map[i]];
                    worst_s1 = std::max(worst_s1, std::abs(a - b) /
                                                      std::max(1.0, std::max(std::abs(a), std::abs(b))));
                }
            }
        }

        // S1+S2: 10 parameter draws x 100 states
        double worst_s2 = 0.0;
        for (int pd = 0; pd < 10; ++pd) {
            NetworkCase c = builtin_case("s2-min");
            c.sgs[0].machine = random_machine(rng);
            c.transformers[0].p = random_transformer(rng);
            c.sgs[0].tau_m = 0.8;
            c.sgs[0].v_ref = 1.05;
            auto raw = assemble_raw(c);
            auto red = reduce_index_once(*raw);
            AlgebraicSolver solver(red.sys);
            auto model = ComposedModel::build(c);
            const int nd = red.sys->n_diff();
            std::vector<int> map(nd);
            for (int i = 0; i < nd; ++i)
                map[i] = model->index_of(red.sys->var_name(red.sys->diff_vars()[i]));
            for (int t = 0; t < 100; ++t) {
                Vec y(model->size());
                for (int i = 0; i < y.size(); ++i) y[i] = 0.5 + 0.5 * u(rng);
                y[model->index_of("G1.delta")] = 2.0 * u(rng);
                y[model->index_of("G1.omega")] = 1.0 + 0.05 * u(rng);
                Vec x(nd);
                for (int i = 0; i < nd; ++i) x[i] = y[map[i]];
                Vec fr = solver.ode_rhs(0.0, std::span<const double>(x.data(), nd));
                std::vector<double> fc(model->size());
                model->rhs(0.0, std::span<const double>(y.data(), y.size()), fc);
                for (int i = 0; i < nd; ++i) {
                    double a = fr[i], b = fc[map[i]];
                    worst_s2 = std::max(worst_s2, std::abs(a - b) /
                                                      std::max(1.0, std::max(std::abs(a), std::abs(b))));
                }
            }
        }
        bool pass = worst_s1 <= 1e-10 && worst_s2 <= 1e-10;
        report(7, pass, "hand vs pipeline worst relative: S1 " + fmt(worst_s1) + ", S1+S2 " +
                            fmt(worst_s2) + " over 1000 evaluations each (<=1e-10)");
    } catch (const std::exception& e) {
        report(7, false, std::string("exception: ") + e.what());
    }

    // ---- criterion 8: scaling harness --------------------------------------
    try {
        // Table-published topology counts, exact
        struct Row { int n, buses, lines, xfmrs, sgs, invs; };
        const Row rows[] = {{1, 9, 6, 3, 2, 1},        {2, 18, 13, 6, 4, 2},
                            {4, 36, 28, 12, 8, 4},     {8, 72, 56, 24, 16, 8},
                            {16, 144, 112, 48, 32, 16}, {32, 288, 224, 96, 64, 32},
                            {64, 576, 448, 192, 128, 64}, {128, 1152, 896, 384, 256, 128}};
        bool counts_ok = true;
        for (const auto& r : rows) {
            ScalingSpec s;
            s.n = r.n;
            auto c = scale_case(wscc9_case(), s);
            counts_ok = counts_ok && static_cast<int>(c.buses.size()) == r.buses &&
                        static_cast<int>(c.lines.size()) == r.lines &&
                        static_cast<int>(c.transformers.size()) == r.xfmrs &&
                        static_cast<int>(c.sgs.size()) == r.sgs &&
                        static_cast<int>(c.gfms.size()) == r.invs;
        }

        cmd::BenchArgs ba;
        ba.cases = "c1..c8";
        ba.reps = 3;
        ba.out_dir = "acceptance_bench";
        if (const char* cli = std::getenv("EMTDQ_CLI")) ba.child_cmd = cli;
        std::ostringstream sink;
        int rc = cmd::bench(ba, sink, sink);

        // parse the produced records for the fit and the C8 limits
        std::ifstream in("acceptance_bench/bench.csv");
        std::string line;
        std::getline(in, line);
        std::map<std::string, std::pair<double, int>> wall; // case -> (sum, n)
        double c8_wall = 0.0, c8_rss = 0.0;
        std::map<std::string, int> buses_of;
        while (std::getline(in, line)) {
            std::istringstream ls(line);
            std::string cell;
            std::vector<std::string> cells;
            while (std::getline(ls, cell, ',')) cells.push_back(cell);
            if (cells.size() < 8 || cells[3] == "1" || cells[4] == "1") continue;
            wall[cells[0]].first += std::stod(cells[5]);
            wall[cells[0]].second += 1;
            buses_of[cells[0]] = std::stoi(cells[1]);
            if (cells[0] == "c8") {
                c8_wall = std::max(c8_wall, std::stod(cells[5]));
                c8_rss = std::max(c8_rss, std::stod(cells[6]));
            }
        }
        std::vector<double> buses, times;
        for (auto& [id, acc] : wall) {
            buses.push_back(buses_of[id]);
            times.push_back(acc.first / acc.second);
        }
        ScalingFit fit = fit_scaling(buses, times);
        bool pass = counts_ok && rc == 0 && wall.size() == 8 && fit.exponent <= 1.8 &&
                    c8_wall <= 60.0 && c8_rss <= 4.0 * (1ll << 30);
        report(8, pass,
               std::string("topology counts ") + (counts_ok ? "exact" : "WRONG") +
                   "; build-time exponent " + fmt(fit.exponent) + " (<=1.8), C8 build " +
                   fmt(c8_wall) + " s (<=60), C8 peak RSS " + fmt(c8_rss / (1 << 30)) +
                   " GiB (<=4)");
    } catch (const std::exception& e) {
        report(8, false, std::string("exception: ") + e.what());
    }

    // ---- criterion 9: integrator quality ------------------------------------
    try {
        // observed order on a smooth problem with analytic solution
        struct PR : Model {
            std::vector<std::string> nm{"y"};
            int size() const override { return 1; }
            int n_diff() const override { return 1; }
            const std::vector<std::string>& names() const override { return nm; }
            void rhs(double t, std::span<const double> y, std::span<double> dy) const override {
                dy[0] = -5.0 * (y[0] - std::sin(t)) + std::cos(t);
            }
        } pr;
        Vec y0(1);
        y0[0] = 0.0;
        std::vector<double> hs{0.02, 0.01, 0.005, 0.0025}, errs;
        for (double h : hs) {
            IntegratorConfig cfg;
            cfg.rtol = 1e6;
            cfg.atol = 1e6;
            cfg.initial_step = h;
            cfg.max_step = h;
            Trajectory tr = integrate(pr, y0, 0.0, 1.0, cfg);
            errs.push_back(std::abs(tr.y.back()[0] - std::sin(1.0)));
        }
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < hs.size(); ++i) {
            double lx = std::log(hs[i]), ly = std::log(errs[i]);
            sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
        }
        int n = static_cast<int>(hs.size());
        double order = (n * sxy - sx * sy) / (n * sxx - sx * sx);

        // stationarity: unperturbed C1 holds the equilibrium for a second
        NetworkCase c = builtin_case("wscc9");
        InitResult ir = initialize_case(c);
        IntegratorConfig cfg;
        Trajectory tr = integrate(*ir.model, ir.y0, 0.0, 1.0, cfg);
        double drift = 0.0;
        for (double t = 0.0; t <= 1.0; t += 0.01)
            drift = std::max(drift, (tr.at(t) - ir.y0).cwiseAbs().maxCoeff());
        bool pass = order >= 3.8 && drift <= 1e-6;
        report(9, pass, "observed order " + fmt(order) + " (>=3.8), 1 s stationarity drift " +
                            fmt(drift) + " (<=1e-6)");
    } catch (const std::exception& e) {
        report(9, false, std::string("exception: ") + e.what());
    }

    // ---- criterion 10: C4 perturbed run completes ---------------------------
    try {
        NetworkCase c = builtin_case("c4");
        apply_load_step(c, "bus8", 0.2, 0.25);
        InitResult ir = initialize_case(c);
        IntegratorConfig cfg; // rtol 1e-7
        std::vector<EventSpec> ev{{0.25, "20% load step at bus8", nullptr}};
        Trajectory tr = integrate(*ir.model, ir.y0, 0.0, 0.5, cfg, ev);
        bool pass = tr.t_end() == 0.5;
        report(10, pass, "C4 (72-bus) perturbed 0.5 s run: " +
                             std::to_string(tr.stats.accepted) + " steps, " +
                             std::to_string(tr.stats.rejected) + " rejections, no underflow");
    } catch (const StepFailure& e) {
        report(10, false, std::string("step-size underflow: ") + e.what());
    } catch (const std::exception& e) {
        report(10, false, std::string("exception: ") + e.what());
    }

    std::cout << (g_failures == 0 ? "ACCEPTANCE: all criteria passed"
                                  : "ACCEPTANCE: " + std::to_string(g_failures) +
                                        " criterion(s) failed")
              << "\n";
    return g_failures == 0 ? 0 : 1;
}

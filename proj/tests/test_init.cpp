#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <complex>

#include "emtdq/cases.hpp"
#include "emtdq/init.hpp"
#include "emtdq/integrator.hpp"

using namespace emtdq;
using cd = std::complex<double>;

namespace {

// Two-bus case: slack machine at b1 feeding a load at b2 through a line.
NetworkCase two_bus(double p_load, double q_load) {
    NetworkCase c;
    c.name = "two-bus";
    c.buses = {{"b1", 230.0}, {"b2", 230.0}};
    c.lines = {{"L12", "b1", "b2", {0.02, 0.12, 0.1}}};
    if (p_load > 0) c.loads = {{"LDB", "b2", {p_load, q_load}}};
    SgDevice g;
    g.name = "G1";
    g.bus = "b1";
    g.slack = true;
    g.v_set = 1.0;
    auto& m = g.machine;
    m.xd = 0.8958; m.xd_p = 0.1198; m.xd_pp = 0.10;
    m.xq = 0.8645; m.xq_p = 0.1969; m.xq_pp = 0.10;
    m.xl = 0.0521; m.ra = 0.003;
    m.td0_p = 6.0; m.tq0_p = 0.535; m.td0_pp = 0.033; m.tq0_pp = 0.078;
    m.h = 6.4; m.d = 2.0;
    // the machine interface needs its transformer; insert one and move the line
    c.transformers = {{"T1", "b1", "b2", {0.0, 0.03, 0.0, 0.03, 1.0, 100.0}}};
    c.lines[0].from = "b2";
    c.lines[0].to = "b2x";
    c.buses.push_back({"b2x", 230.0});
    if (p_load > 0) c.loads[0].bus = "b2x";
    c.sgs = {g};
    return c;
}

} // namespace

TEST_CASE("two-bus, zero load: flat voltage profile") {
    // a bare series branch with no charging, no magnetizing draw and no
    // load carries no current, so the profile is exactly flat
    NetworkCase c;
    c.name = "flat";
    c.buses = {{"b1", 230.0}, {"b2", 230.0}};
    c.rlbranches = {{"B1", "b1", "b2", 0.02, 0.12}};
    SgDevice g;
    g.name = "G1";
    g.bus = "b1";
    g.slack = true;
    g.v_set = 1.0;
    g.machine = two_bus(0.5, 0.2).sgs[0].machine;
    c.sgs = {g};
    auto pf = solve_power_flow(c);
    for (auto v : pf.v) {
        CHECK(std::abs(std::abs(v) - 1.0) <= 1e-10);
        CHECK(std::abs(std::arg(v)) <= 1e-10);
    }
}

TEST_CASE("two-bus with load matches an independent Gauss-Seidel solve") {
    auto c = two_bus(0.9, 0.3);
    auto pf = solve_power_flow(c);

    // independent fixed-point oracle over the same admittance data
    cd y_line = 1.0 / cd(0.02, 0.12);
    cd y_sh(0.0, 0.05);
    cd y1 = 1.0 / cd(0.0, 0.03), y2 = 1.0 / cd(0.0, 0.03), y3 = 1.0 / cd(1.0, 100.0);
    cd yt_series = y1 * y2 / (y1 + y2 + y3);
    cd yt_sh_a = y1 * y3 / (y1 + y2 + y3);
    cd yt_sh_b = y2 * y3 / (y1 + y2 + y3);
    LoadParams lp{0.9, 0.3};
    cd y_load = 1.0 / cd(lp.r(), lp.x());

    // nodes: b1 (slack 1.0 angle 0... magnitude 1.0), b2, b2x
    cd v1 = 1.0, v2 = 1.0, v3 = 1.0;
    for (int it = 0; it < 20000; ++it) {
        // KCL at b2: yt(v2-v1) + ysh_b2 v2 + yline(v2-v3) + ysh v2 = 0
        cd y22 = yt_series + yt_sh_b + y_line + y_sh;
        v2 = (yt_series * v1 + y_line * v3) / y22;
        cd y33 = y_line + y_sh + y_load;
        v3 = (y_line * v2) / y33;
    }
    CHECK(std::abs(pf.v[1] - v2) <= 1e-8);
    CHECK(std::abs(pf.v[2] - v3) <= 1e-8);
}

TEST_CASE("nine-bus power flow converges quickly") {
    auto c = builtin_case("wscc9");
    auto pf = solve_power_flow(c);
    CHECK(pf.iterations <= 10);
    CHECK(pf.mismatch <= 1e-10);
    // sane voltage band
    for (auto v : pf.v) {
        CHECK(std::abs(v) > 0.9);
        CHECK(std::abs(v) < 1.1);
    }
}

TEST_CASE("device initialization lands on the equilibrium before refinement") {
    auto c = builtin_case("wscc9");
    auto pf = solve_power_flow(c);
    auto vals = initialize_devices(c, pf);
    auto model = ComposedModel::build(c);
    Vec y(model->size());
    for (int i = 0; i < model->size(); ++i) y[i] = vals.at(model->names()[i]);
    std::vector<double> dy(model->size());
    model->rhs(0.0, std::span<const double>(y.data(), y.size()), dy);
    double worst = 0.0;
    for (double v : dy) worst = std::max(worst, std::abs(v));
    CHECK(worst <= 1e-6);

    SUBCASE("transformer magnetizing currents close the KCL") {
        for (const auto& t : c.transformers) {
            cd i1{vals.at(t.name + ".i1_R"), vals.at(t.name + ".i1_I")};
            cd i2{vals.at(t.name + ".i2_R"), vals.at(t.name + ".i2_I")};
            cd i3{vals.at(t.name + ".i3_R"), vals.at(t.name + ".i3_I")};
            CHECK(std::abs(i1 - i2 - i3) <= 1e-12);
        }
    }
}

TEST_CASE("unloaded machine init: zero current, aligned emf") {
    // synthetic power-flow solution: terminal at 1.0 with angle 0.3 and no
    // injected current
    NetworkCase c = two_bus(0.5, 0.2);
    c.transformers.clear();
    c.lines.clear();
    c.loads.clear();
    c.buses = {{"b1", 230.0}};
    PowerFlowSolution pf;
    pf.v = {std::polar(1.0, 0.3)};
    pf.inj_current["G1"] = 0.0;
    pf.injection["G1"] = 0.0;
    auto vals = initialize_devices(c, pf);
    CHECK(std::abs(vals.at("G1.psi_d") - 1.0) <= 1e-12);
    CHECK(std::abs(vals.at("G1.psi_q")) <= 1e-12);
    CHECK(std::abs(vals.at("G1.eq_p") - vals.at("G1.vf")) <= 1e-12);
    // delta aligned with the terminal voltage angle at no load
    CHECK(std::abs(vals.at("G1.delta") - 0.3) <= 1e-12);
}

TEST_CASE("refinement: tolerance, idempotence, larger case") {
    auto c = builtin_case("wscc9");
    InitResult ir = initialize_case(c);
    CHECK(ir.refine.residual <= 1e-10);

    // idempotence: refining the refined point changes nothing
    RefineResult again = refine_equilibrium(*ir.model, ir.y0, 1e-10);
    CHECK(again.iterations == 0);
    CHECK((again.y - ir.y0).cwiseAbs().maxCoeff() <= 1e-12);

    auto c4 = builtin_case("c4");
    InitResult ir4 = initialize_case(c4);
    CHECK(ir4.refine.residual <= 1e-10);
    CHECK(ir4.refine.iterations <= 15);
}

TEST_CASE("stationarity: one second of unperturbed integration holds the point") {
    auto c = builtin_case("wscc9");
    InitResult ir = initialize_case(c);
    IntegratorConfig cfg;
    Trajectory tr = integrate(*ir.model, ir.y0, 0.0, 1.0, cfg);
    double worst = 0.0;
    for (double t = 0.0; t <= 1.0; t += 0.01) {
        Vec y = tr.at(t);
        worst = std::max(worst, (y - ir.y0).cwiseAbs().maxCoeff());
    }
    CHECK(worst <= 1e-6);
}

TEST_CASE("ic csv round trip") {
    std::vector<std::string> names{"a.x", "b.y"};
    Vec y(2);
    y << 1.25, -3.5e-7;
    auto text = write_ic_csv(names, y);
    auto back = read_ic_csv(text);
    CHECK(back.at("a.x") == 1.25);
    CHECK(back.at("b.y") == -3.5e-7);
}

TEST_CASE("power flow rejects broken setups") {
    auto c = builtin_case("wscc9");
    c.sgs[0].slack = false; // no slack left
    CHECK_THROWS_WITH_AS(solve_power_flow(c), doctest::Contains("slack"),
                         std::invalid_argument);
    auto f = builtin_case("fig2-loop");
    CHECK_THROWS_AS(solve_power_flow(f), std::invalid_argument);
}

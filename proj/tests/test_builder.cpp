#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "emtdq/cases.hpp"
#include "emtdq/composed.hpp"
#include "emtdq/structural.hpp"

using namespace emtdq;

TEST_CASE("base case topology counts") {
    auto c = wscc9_case();
    CHECK(c.buses.size() == 9);
    CHECK(c.sgs.size() == 2);
    CHECK(c.gfms.size() == 1);
    CHECK(c.lines.size() == 6);
    CHECK(c.transformers.size() == 3);
    CHECK(c.loads.size() == 3);
}

TEST_CASE("base case is deterministic") {
    auto a = write_case_file(wscc9_case());
    auto b = write_case_file(wscc9_case());
    CHECK(a == b);
}

TEST_CASE("scaled cases reproduce the published topology counts") {
    struct Row {
        int n, buses, lines, xfmrs, sgs, invs;
    };
    // buses double per case; lines are 6n plus interconnections
    const Row rows[] = {
        {1, 9, 6, 3, 2, 1},      {2, 18, 13, 6, 4, 2},    {4, 36, 28, 12, 8, 4},
        {8, 72, 56, 24, 16, 8},  {16, 144, 112, 48, 32, 16}, {32, 288, 224, 96, 64, 32},
        {64, 576, 448, 192, 128, 64}, {128, 1152, 896, 384, 256, 128},
    };
    auto base = wscc9_case();
    for (const auto& r : rows) {
        ScalingSpec spec;
        spec.n = r.n;
        auto c = scale_case(base, spec);
        CHECK(static_cast<int>(c.buses.size()) == r.buses);
        CHECK(static_cast<int>(c.lines.size()) == r.lines);
        CHECK(static_cast<int>(c.transformers.size()) == r.xfmrs);
        CHECK(static_cast<int>(c.sgs.size()) == r.sgs);
        CHECK(static_cast<int>(c.gfms.size()) == r.invs);
        c.validate();
    }
}

TEST_CASE("scaling is deterministic in the seed and n=1 is the base case") {
    auto base = wscc9_case();
    ScalingSpec s4;
    s4.n = 4;
    CHECK(write_case_file(scale_case(base, s4)) == write_case_file(scale_case(base, s4)));
    ScalingSpec s1;
    s1.n = 1;
    CHECK(write_case_file(scale_case(base, s1)) == write_case_file(base));
    ScalingSpec other = s4;
    other.seed = 1234;
    CHECK(write_case_file(scale_case(base, other)) != write_case_file(scale_case(base, s4)));
}

TEST_CASE("interconnection lines join distinct instances at load buses") {
    ScalingSpec s;
    s.n = 4;
    auto c = scale_case(wscc9_case(), s);
    int extras = 0;
    for (const auto& l : c.lines) {
        if (l.name[0] != 'x') continue;
        ++extras;
        auto inst = [](const std::string& bus) {
            auto colon = bus.find(':');
            return colon == std::string::npos ? std::string("0") : bus.substr(0, colon);
        };
        CHECK(inst(l.from) != inst(l.to));
        CHECK(l.from.find("bus") != std::string::npos);
    }
    CHECK(extras == 4);
}

TEST_CASE("raw assembly satisfies the constraint accounting") {
    for (const char* name : {"wscc9", "c2", "s1-min", "s2-min"}) {
        auto c = builtin_case(name);
        auto sys = assemble_raw(c);
        IndexReport r = structural_index_report(*sys);
        int expected_q = 2 * static_cast<int>(c.transformers.size()) +
                         2 * static_cast<int>(c.sgs.size());
        CHECK(r.q == expected_q);
    }
}

TEST_CASE("reduced formulation has no algebraic variables and evaluates finitely") {
    auto c = builtin_case("wscc9");
    auto m = ComposedModel::build(c);
    CHECK(m->n_diff() == m->size());
    std::vector<double> y(m->size(), 0.1), dy(m->size());
    m->rhs(0.0, y, dy);
    for (double v : dy) CHECK(std::isfinite(v));
}

TEST_CASE("raw and reduced share the differential variable names") {
    auto c = builtin_case("wscc9");
    auto sys = assemble_raw(c);
    auto m = ComposedModel::build(c);
    // after one reduction pass the remaining differential set equals the
    // composed state set
    auto red_names = m->names();
    std::set<std::string> comp(red_names.begin(), red_names.end());
    int found = 0;
    for (VarId v : sys->diff_vars())
        if (comp.count(sys->var_name(v))) ++found;
    CHECK(found == m->size() - 0); // every composed state exists in the raw system
    CHECK(sys->n_diff() == m->size() + 10); // the ten recategorized currents
}

TEST_CASE("dangling bus is rejected by the composed build") {
    auto c = builtin_case("s2-min");
    // a bare bus with only a transformer and no machine: replace the SG
    // with nothing to leave m1 unowned
    c.sgs.clear();
    c.buses.push_back({"m0", 1.0});
    CHECK_THROWS_WITH_AS(ComposedModel::build(c), doctest::Contains("no shunt capacitance"),
                         std::invalid_argument);
}

TEST_CASE("case file round trip") {
    auto c = builtin_case("wscc9");
    apply_load_step(c, "bus8", 0.2, 0.25);
    std::string text = write_case_file(c);
    auto d = read_case_file(text);
    // the load step is runtime state, not part of the persisted record
    CHECK(d.buses.size() == c.buses.size());
    CHECK(d.sgs.size() == c.sgs.size());
    CHECK(d.sgs[0].machine.xd == c.sgs[0].machine.xd);
    CHECK(d.gfms[0].p.ki_v == c.gfms[0].p.ki_v);
    CHECK(d.lines[2].p.x == c.lines[2].p.x);
    CHECK(write_case_file(d) == text);
}

TEST_CASE("case file parse errors carry line numbers") {
    CHECK_THROWS_WITH_AS(read_case_file("case x\nbogus record here\n"),
                         doctest::Contains("line 2"), std::runtime_error);
    CHECK_THROWS_WITH_AS(read_case_file("case x\nbus b1 kv 1\nline l1 from b1 to b2 r 0.1 x nope b 0\n"),
                         doctest::Contains("line 3"), std::runtime_error);
}

TEST_CASE("load step plumbing") {
    auto c = builtin_case("wscc9");
    CHECK_THROWS_AS(apply_load_step(c, "bus4", 0.2, 0.25), std::invalid_argument);
    apply_load_step(c, "8", 0.2, 0.25); // bare number resolves to bus8
    bool found = false;
    for (const auto& l : c.loads)
        if (l.bus == "bus8") {
            CHECK(l.step_time == 0.25);
            CHECK(l.step_fraction == 0.2);
            found = true;
        }
    CHECK(found);
    // fraction zero leaves the case untouched
    auto c2 = builtin_case("wscc9");
    apply_load_step(c2, "bus8", 0.0, 0.25);
    for (const auto& l : c2.loads) CHECK(l.step_time < 0);
}

TEST_CASE("counts report row") {
    auto c = builtin_case("wscc9");
    auto k = report_counts(c, 73, 0);
    CHECK(counts_csv_row(k) == "wscc9,9,73,0,2,1,6,3\n");
    NetworkCase empty;
    empty.name = "none";
    auto k0 = report_counts(empty, 0, 0);
    CHECK(counts_csv_row(k0) == "none,0,0,0,0,0,0,0\n");
}

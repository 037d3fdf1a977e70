#include "emtdq/cases.hpp"

#include <stdexcept>

namespace emtdq {

namespace {

SgDevice make_sg(const std::string& name, const std::string& bus, bool slack,
                 double v_set, double p_set, SauerPaiParams m) {
    SgDevice d;
    d.name = name;
    d.bus = bus;
    d.slack = slack;
    d.v_set = v_set;
    d.p_set = p_set;
    d.machine = m;
    return d;
}

} // namespace

NetworkCase wscc9_case() {
    NetworkCase c;
    c.name = "wscc9";
    c.base_mva = 100.0;
    c.freq_hz = 60.0;
    c.buses = {{"bus1", 16.5}, {"bus2", 18.0}, {"bus3", 13.8}, {"bus4", 230.0},
               {"bus5", 230.0}, {"bus6", 230.0}, {"bus7", 230.0}, {"bus8", 230.0},
               {"bus9", 230.0}};
    c.lines = {
        {"L45", "bus4", "bus5", {0.0100, 0.0850, 0.176}},
        {"L46", "bus4", "bus6", {0.0170, 0.0920, 0.158}},
        {"L57", "bus5", "bus7", {0.0320, 0.1610, 0.306}},
        {"L69", "bus6", "bus9", {0.0390, 0.1700, 0.358}},
        {"L78", "bus7", "bus8", {0.0085, 0.0720, 0.149}},
        {"L89", "bus8", "bus9", {0.0119, 0.1008, 0.209}},
    };
    // Magnetizing branch R3 + X3 closes the S1 structure; the nameplate
    // series reactance splits evenly across the windings.
    auto xfmr = [](const std::string& n, const std::string& a, const std::string& b,
                   double x) {
        return TransformerDevice{n, a, b, {0.0, x / 2, 0.0, x / 2, 1.0, 100.0}};
    };
    c.transformers = {xfmr("T1", "bus1", "bus4", 0.0576), xfmr("T2", "bus2", "bus7", 0.0625),
                      xfmr("T3", "bus3", "bus9", 0.0586)};
    c.loads = {
        {"LD5", "bus5", {1.25, 0.50}},
        {"LD6", "bus6", {0.90, 0.30}},
        {"LD8", "bus8", {1.00, 0.35}},
    };

    SauerPaiParams g1;
    g1.xd = 0.1460; g1.xd_p = 0.0608; g1.xd_pp = 0.0500;
    g1.xq = 0.0969; g1.xq_p = 0.0969; g1.xq_pp = 0.0500;
    g1.xl = 0.0336; g1.ra = 0.003;
    g1.td0_p = 8.96; g1.tq0_p = 0.310; g1.td0_pp = 0.040; g1.tq0_pp = 0.060;
    g1.h = 23.64; g1.d = 2.0;

    SauerPaiParams g2;
    g2.xd = 0.8958; g2.xd_p = 0.1198; g2.xd_pp = 0.1000;
    g2.xq = 0.8645; g2.xq_p = 0.1969; g2.xq_pp = 0.1000;
    g2.xl = 0.0521; g2.ra = 0.003;
    g2.td0_p = 6.00; g2.tq0_p = 0.535; g2.td0_pp = 0.033; g2.tq0_pp = 0.078;
    g2.h = 6.40; g2.d = 2.0;

    c.sgs = {make_sg("G1", "bus1", true, 1.040, 0.0, g1),
             make_sg("G2", "bus2", false, 1.025, 1.63, g2)};

    GfmDevice inv;
    inv.name = "I1";
    inv.bus = "bus3";
    inv.v_set = 1.025;
    inv.p_set = 0.85;
    c.gfms = {inv};
    return c;
}

NetworkCase builtin_case(const std::string& name) {
    if (name == "wscc9" || name == "c1") {
        NetworkCase c = wscc9_case();
        return c;
    }
    if (name.size() == 2 && name[0] == 'c' && name[1] >= '2' && name[1] <= '8') {
        int k = name[1] - '1';
        ScalingSpec spec;
        spec.n = 1 << k;
        NetworkCase c = scale_case(wscc9_case(), spec);
        c.name = name;
        return c;
    }
    if (name == "s1-min") {
        // Inverter - transformer - pi line - constant impedance load.
        NetworkCase c;
        c.name = "s1-min";
        c.buses = {{"f1", 13.8}, {"f2", 230.0}, {"f3", 230.0}};
        c.transformers = {{"T1", "f1", "f2", {0.0, 0.03, 0.0, 0.03, 1.0, 100.0}}};
        c.lines = {{"L23", "f2", "f3", {0.0085, 0.0720, 0.149}}};
        c.loads = {{"LD3", "f3", {0.50, 0.20}}};
        GfmDevice inv;
        inv.name = "I1";
        inv.bus = "f1";
        inv.slack = true;
        inv.v_set = 1.0;
        inv.p_set = 0.0;
        c.gfms = {inv};
        return c;
    }
    if (name == "s2-min") {
        // SG - transformer - pi line - constant impedance load.
        NetworkCase c;
        c.name = "s2-min";
        c.buses = {{"m1", 18.0}, {"m2", 230.0}, {"m3", 230.0}};
        c.transformers = {{"T1", "m1", "m2", {0.0, 0.03, 0.0, 0.03, 1.0, 100.0}}};
        c.lines = {{"L23", "m2", "m3", {0.0085, 0.0720, 0.149}}};
        c.loads = {{"LD3", "m3", {0.80, 0.30}}};
        SauerPaiParams m;
        m.xd = 0.8958; m.xd_p = 0.1198; m.xd_pp = 0.1000;
        m.xq = 0.8645; m.xq_p = 0.1969; m.xq_pp = 0.1000;
        m.xl = 0.0521; m.ra = 0.003;
        m.td0_p = 6.00; m.tq0_p = 0.535; m.td0_pp = 0.033; m.tq0_pp = 0.078;
        m.h = 6.40; m.d = 2.0;
        c.sgs = {make_sg("G1", "m1", true, 1.02, 0.0, m)};
        return c;
    }
    if (name == "fig1-cutset") {
        // Three inductive branches meet at an unshunted node.
        NetworkCase c;
        c.name = "fig1-cutset";
        c.buses = {{"n0", 1.0}, {"n1", 1.0}, {"n2", 1.0}, {"n3", 1.0}};
        c.rlbranches = {{"B1", "n0", "n1", 0.01, 0.5},
                        {"B2", "n0", "n2", 0.01, 0.8},
                        {"B3", "n0", "n3", 0.01, 1.2}};
        c.shunts = {{"C1", "n1", 0.3}, {"C2", "n2", 0.4}, {"C3", "n3", 0.5}};
        return c;
    }
    if (name == "fig2-loop") {
        // Independent source directly across a capacitor.
        NetworkCase c;
        c.name = "fig2-loop";
        c.buses = {{"n1", 1.0}};
        c.vsources = {{"VS1", "n1", 1.0, 0.05, 2.0 * 3.14159265358979323846 * 5.0,
                       0.0, 0.05, 2.0 * 3.14159265358979323846 * 5.0}};
        c.shunts = {{"C1", "n1", 0.5}};
        c.rlbranches = {{"B1", "n1", "gnd", 0.1, 0.5}};
        return c;
    }
    if (name == "rl-ladder") {
        // Source behind an RL branch into a shunted node: index-1, no cutsets.
        NetworkCase c;
        c.name = "rl-ladder";
        c.buses = {{"n1", 1.0}, {"n2", 1.0}};
        c.vsources = {{"VS1", "n1", 1.0, 0.0, 0.0, 0.0, 0.0, 0.0}};
        c.rlbranches = {{"B1", "n1", "n2", 0.05, 0.3}, {"B2", "n2", "gnd", 0.8, 0.6}};
        c.shunts = {{"C1", "n2", 0.4}};
        return c;
    }
    throw std::invalid_argument("unknown built-in case '" + name + "'");
}

bool is_builtin_case(const std::string& name) {
    try {
        builtin_case(name);
        return true;
    } catch (...) {
        return false;
    }
}

std::vector<std::string> builtin_case_names() {
    return {"wscc9", "c1", "c2", "c3", "c4", "c5", "c6", "c7", "c8",
            "s1-min", "s2-min", "fig1-cutset", "fig2-loop", "rl-ladder"};
}

} // namespace emtdq

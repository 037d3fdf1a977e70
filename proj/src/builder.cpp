#include "emtdq/builder.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

namespace emtdq {

int NetworkCase::bus_index(const std::string& n) const {
    for (std::size_t i = 0; i < buses.size(); ++i)
        if (buses[i].name == n) return static_cast<int>(i);
    return -1;
}

double NetworkCase::bus_shunt_b(int bus) const {
    double b = 0.0;
    const std::string& n = buses[bus].name;
    for (const auto& l : lines) {
        if (l.from == n) b += 0.5 * l.p.b;
        if (l.to == n) b += 0.5 * l.p.b;
    }
    for (const auto& g : gfms)
        if (g.bus == n) b += g.p.bc;
    for (const auto& s : shunts)
        if (s.bus == n) b += s.b;
    return b;
}

void NetworkCase::validate() const {
    auto need_bus = [&](const std::string& b, const std::string& who) {
        if (b != "gnd" && bus_index(b) < 0)
            throw std::invalid_argument(name + ": device " + who + " references unknown bus '" + b + "'");
    };
    for (const auto& d : lines) { need_bus(d.from, d.name); need_bus(d.to, d.name); d.p.validate(); }
    for (const auto& d : transformers) { need_bus(d.from, d.name); need_bus(d.to, d.name); d.p.validate(); }
    for (const auto& d : loads) { need_bus(d.bus, d.name); d.p.validate(); }
    for (const auto& d : sgs) { need_bus(d.bus, d.name); d.machine.validate(); d.avr.validate(); }
    for (const auto& d : gfms) { need_bus(d.bus, d.name); d.p.validate(); }
    for (const auto& d : shunts) need_bus(d.bus, d.name);
    for (const auto& d : rlbranches) { need_bus(d.from, d.name); need_bus(d.to, d.name); }
    for (const auto& d : vsources) need_bus(d.bus, d.name);
    if (freq_hz <= 0) throw std::invalid_argument("case: base frequency must be positive");
}

void apply_load_step(NetworkCase& c, const std::string& bus, double fraction, double time) {
    std::string key = bus;
    if (c.bus_index(key) < 0 && c.bus_index("bus" + bus) >= 0) key = "bus" + bus;
    for (auto& l : c.loads) {
        if (l.bus != key) continue;
        if (fraction == 0.0) return; // nothing to schedule
        l.step_time = time;
        l.step_fraction = fraction;
        return;
    }
    throw std::invalid_argument("load step: no load at bus '" + bus + "'");
}

NetworkCase scale_case(const NetworkCase& base, const ScalingSpec& spec) {
    if (spec.n < 1) throw std::invalid_argument("scale: n must be >= 1");
    NetworkCase c;
    c.name = base.name + (spec.n > 1 ? "x" + std::to_string(spec.n) : "");
    c.base_mva = base.base_mva;
    c.freq_hz = base.freq_hz;

    auto pfx = [](int k, const std::string& s) {
        return k == 0 ? s : "r" + std::to_string(k) + ":" + s;
    };
    for (int k = 0; k < spec.n; ++k) {
        for (const auto& b : base.buses) c.buses.push_back({pfx(k, b.name), b.kv});
        for (auto d : base.lines) {
            d.name = pfx(k, d.name); d.from = pfx(k, d.from); d.to = pfx(k, d.to);
            c.lines.push_back(d);
        }
        for (auto d : base.transformers) {
            d.name = pfx(k, d.name); d.from = pfx(k, d.from); d.to = pfx(k, d.to);
            c.transformers.push_back(d);
        }
        for (auto d : base.loads) {
            d.name = pfx(k, d.name); d.bus = pfx(k, d.bus);
            c.loads.push_back(d);
        }
        for (auto d : base.sgs) {
            d.name = pfx(k, d.name); d.bus = pfx(k, d.bus);
            if (k > 0) d.slack = false; // single slack, instance 0
            c.sgs.push_back(d);
        }
        for (auto d : base.gfms) {
            d.name = pfx(k, d.name); d.bus = pfx(k, d.bus);
            if (k > 0) d.slack = false;
            c.gfms.push_back(d);
        }
        for (auto d : base.shunts) {
            d.name = pfx(k, d.name); d.bus = pfx(k, d.bus);
            c.shunts.push_back(d);
        }
    }

    // Interconnection: random spanning tree over instances plus extras to
    // reach the published line totals (n=2 -> 1 line, n>=3 -> n lines).
    if (spec.n > 1) {
        std::vector<std::string> load_buses;
        for (const auto& l : base.loads) load_buses.push_back(l.bus);
        if (load_buses.empty())
            throw std::invalid_argument("scale: base case has no load buses to interconnect");
        LineParams ip{0.017, 0.092, 0.158}; // parameters of the 4-6 line
        for (const auto& l : base.lines)
            if (l.name == "L46") ip = l.p;

        std::mt19937 rng(spec.seed);
        auto pick_bus = [&](int inst) {
            std::uniform_int_distribution<std::size_t> d(0, load_buses.size() - 1);
            return pfx(inst, load_buses[d(rng)]);
        };
        int idx = 0;
        auto add_link = [&](int a, int b) {
            c.lines.push_back({"x" + std::to_string(idx++), pick_bus(a), pick_bus(b), ip});
        };
        for (int k = 1; k < spec.n; ++k) {
            std::uniform_int_distribution<int> d(0, k - 1);
            add_link(d(rng), k);
        }
        int extras = (spec.n == 2) ? 1 : spec.n;
        for (int e = spec.n - 1; e < extras; ++e) {
            std::uniform_int_distribution<int> d(0, spec.n - 1);
            int a = d(rng), b = d(rng);
            while (b == a) b = d(rng);
            add_link(a, b);
        }
    }
    return c;
}

// --- Raw MNA assembly -------------------------------------------------------

namespace {

struct Emission {
    std::shared_ptr<ExpressionGraph> g;
    double w0;
    std::vector<VarId> diff_vars;
    std::vector<NodeId> f;
    std::vector<VarId> alg_vars;
    std::vector<NodeId> device_g;
    std::vector<VarId> inputs;
    std::vector<InputSignal> input_fns;
    // per-bus: voltage var pair and KCL current accumulator
    std::vector<std::array<VarId, 2>> bus_v;
    std::vector<std::array<std::vector<NodeId>, 2>> bus_cur;
    std::vector<char> bus_diff;

    VarId dvar(const std::string& n, NodeId rhs_placeholder = -1) {
        (void)rhs_placeholder;
        VarId v = g->add_variable(n, VarKind::Differential);
        diff_vars.push_back(v);
        f.push_back(-1);
        return v;
    }
    void set_f(VarId v, NodeId rhs) {
        for (std::size_t i = 0; i < diff_vars.size(); ++i)
            if (diff_vars[i] == v) { f[i] = rhs; return; }
        throw std::logic_error("set_f: unknown differential variable");
    }
    VarId avar(const std::string& n) {
        VarId v = g->add_variable(n, VarKind::Algebraic);
        alg_vars.push_back(v);
        return v;
    }
    VarId input(const std::string& n, InputSignal s) {
        VarId v = g->add_variable(n, VarKind::Input);
        inputs.push_back(v);
        input_fns.push_back(std::move(s));
        return v;
    }
    NodeId c(double v) { return g->constant(v); }
    void inject(int bus, NodeId re, NodeId im) {
        bus_cur[bus][0].push_back(re);
        bus_cur[bus][1].push_back(im);
    }
};

// Series RL pair: d/dt i = (w0/x)(va - vb - r*i -+ x*i_cross). Returns the
// current variable pair.
std::array<VarId, 2> emit_rl_pair(Emission& em, const std::string& name, double r,
                                  double x, NodeId va_re, NodeId va_im, NodeId vb_re,
                                  NodeId vb_im) {
    auto& g = *em.g;
    VarId ir = em.dvar(name + "_R");
    VarId ii = em.dvar(name + "_I");
    NodeId irn = g.var(ir), iin = g.var(ii);
    double k = em.w0 / x;
    NodeId fr = g.mul(em.c(k), g.add(g.sub(g.sub(va_re, vb_re), g.mul(em.c(r), irn)),
                                     g.mul(em.c(x), iin)));
    NodeId fi = g.mul(em.c(k), g.sub(g.sub(g.sub(va_im, vb_im), g.mul(em.c(r), iin)),
                                     g.mul(em.c(x), irn)));
    em.set_f(ir, fr);
    em.set_f(ii, fi);
    return {ir, ii};
}

} // namespace

std::shared_ptr<SemiExplicitDae> assemble_raw(const NetworkCase& c) {
    c.validate();
    Emission em;
    em.g = std::make_shared<ExpressionGraph>();
    em.w0 = c.omega0();
    auto& g = *em.g;
    const int nb = static_cast<int>(c.buses.size());
    em.bus_v.resize(nb);
    em.bus_cur.resize(nb);
    em.bus_diff.resize(nb);

    // Bus voltage variables first: differential where shunt capacitance
    // exists, algebraic otherwise.
    for (int b = 0; b < nb; ++b) {
        bool diff = c.bus_shunt_b(b) > 0.0;
        em.bus_diff[b] = diff;
        const std::string n = c.buses[b].name;
        if (diff) {
            em.bus_v[b] = {em.dvar(n + ".v_R"), em.dvar(n + ".v_I")};
        } else {
            em.bus_v[b] = {em.avar(n + ".v_R"), em.avar(n + ".v_I")};
        }
    }
    auto vre = [&](int b) { return g.var(em.bus_v[b][0]); };
    auto vim = [&](int b) { return g.var(em.bus_v[b][1]); };
    NodeId zero = g.constant(0.0);

    for (const auto& d : c.lines) {
        int a = c.bus_index(d.from), b = c.bus_index(d.to);
        auto i = emit_rl_pair(em, d.name + ".i", d.p.r, d.p.x, vre(a), vim(a), vre(b), vim(b));
        em.inject(a, g.neg(g.var(i[0])), g.neg(g.var(i[1])));
        em.inject(b, g.var(i[0]), g.var(i[1]));
    }

    for (const auto& d : c.transformers) {
        int a = c.bus_index(d.from), b = c.bus_index(d.to);
        VarId v3r = em.avar(d.name + ".v3_R");
        VarId v3i = em.avar(d.name + ".v3_I");
        auto i1 = emit_rl_pair(em, d.name + ".i1", d.p.r1, d.p.x1, vre(a), vim(a),
                               g.var(v3r), g.var(v3i));
        auto i2 = emit_rl_pair(em, d.name + ".i2", d.p.r2, d.p.x2, g.var(v3r), g.var(v3i),
                               vre(b), vim(b));
        auto i3 = emit_rl_pair(em, d.name + ".i3", d.p.r3, d.p.x3, g.var(v3r), g.var(v3i),
                               zero, zero);
        em.inject(a, g.neg(g.var(i1[0])), g.neg(g.var(i1[1])));
        em.inject(b, g.var(i2[0]), g.var(i2[1]));
        // KCL at the magnetizing node: 0 = i1 - i2 - i3.
        em.device_g.push_back(g.sub(g.sub(g.var(i1[0]), g.var(i2[0])), g.var(i3[0])));
        em.device_g.push_back(g.sub(g.sub(g.var(i1[1]), g.var(i2[1])), g.var(i3[1])));
    }

    for (const auto& d : c.loads) {
        int b = c.bus_index(d.bus);
        double t_ev = d.step_time, frac = d.step_fraction;
        InputSignal scale;
        scale.value = [t_ev, frac](double t) {
            return (t_ev >= 0.0 && t >= t_ev) ? 1.0 + frac : 1.0;
        };
        scale.derivative = [](double) { return 0.0; };
        VarId s = em.input(d.name + ".scale", scale);
        // (x/w0) di = s*v - r*i -+ x*i_cross: admittance scaling folded
        // into the driving voltage.
        double r = d.p.r(), x = d.p.x();
        VarId ir = em.dvar(d.name + ".i_R");
        VarId ii = em.dvar(d.name + ".i_I");
        NodeId irn = g.var(ir), iin = g.var(ii), sn = g.var(s);
        double k = em.w0 / x;
        em.set_f(ir, g.mul(em.c(k), g.add(g.sub(g.mul(sn, vre(b)), g.mul(em.c(r), irn)),
                                          g.mul(em.c(x), iin))));
        em.set_f(ii, g.mul(em.c(k), g.sub(g.sub(g.mul(sn, vim(b)), g.mul(em.c(r), iin)),
                                          g.mul(em.c(x), irn))));
        em.inject(b, g.neg(irn), g.neg(iin));
    }

    for (const auto& d : c.sgs) {
        int b = c.bus_index(d.bus);
        const auto& m = d.machine;
        const auto& a = d.avr;
        VarId delta = em.dvar(d.name + ".delta");
        VarId omega = em.dvar(d.name + ".omega");
        VarId psi_d = em.dvar(d.name + ".psi_d");
        VarId psi_q = em.dvar(d.name + ".psi_q");
        VarId ed_p = em.dvar(d.name + ".ed_p");
        VarId eq_p = em.dvar(d.name + ".eq_p");
        VarId psi2_d = em.dvar(d.name + ".psi2_d");
        VarId psi2_q = em.dvar(d.name + ".psi2_q");
        VarId vm = em.dvar(d.name + ".avr_vm");
        VarId vr1 = em.dvar(d.name + ".avr_vr1");
        VarId vr2 = em.dvar(d.name + ".avr_vr2");
        VarId vf = em.dvar(d.name + ".vf");

        NodeId sd = g.sin(g.var(delta)), cd = g.cos(g.var(delta));
        double gd1 = m.gamma_d1(), gq1 = m.gamma_q1();
        double gd2 = m.gamma_d2(), gq2 = m.gamma_q2();
        NodeId id = g.mul(em.c(1.0 / m.xd_pp),
                          g.add(g.add(g.neg(g.var(psi_d)), g.mul(em.c(gd1), g.var(eq_p))),
                                g.mul(em.c(1.0 - gd1), g.var(psi2_d))));
        NodeId iq = g.mul(em.c(1.0 / m.xq_pp),
                          g.add(g.sub(g.neg(g.var(psi_q)), g.mul(em.c(gq1), g.var(ed_p))),
                                g.mul(em.c(1.0 - gq1), g.var(psi2_q))));
        NodeId i_r = g.add(g.mul(id, sd), g.mul(iq, cd));
        NodeId i_i = g.add(g.neg(g.mul(id, cd)), g.mul(iq, sd));
        NodeId vd = g.sub(g.mul(vre(b), sd), g.mul(vim(b), cd));
        NodeId vq = g.add(g.mul(vre(b), cd), g.mul(vim(b), sd));

        em.set_f(delta, g.mul(em.c(em.w0), g.sub(g.var(omega), em.c(1.0))));
        NodeId te = g.sub(g.mul(g.var(psi_d), iq), g.mul(g.var(psi_q), id));
        em.set_f(omega, g.mul(em.c(1.0 / (2.0 * m.h)),
                              g.sub(g.sub(em.c(d.tau_m), te),
                                    g.mul(em.c(m.d), g.sub(g.var(omega), em.c(1.0))))));
        em.set_f(psi_d, g.mul(em.c(em.w0),
                              g.add(g.add(g.mul(em.c(m.ra), id),
                                          g.mul(g.var(omega), g.var(psi_q))), vd)));
        em.set_f(psi_q, g.mul(em.c(em.w0),
                              g.add(g.sub(g.mul(em.c(m.ra), iq),
                                          g.mul(g.var(omega), g.var(psi_d))), vq)));
        em.set_f(eq_p, g.mul(em.c(1.0 / m.td0_p),
                             g.add(g.sub(g.neg(g.mul(em.c(m.xd - m.xd_p),
                                                     g.add(g.sub(g.mul(em.c(gd1), id),
                                                                 g.mul(em.c(gd2), g.var(psi2_d))),
                                                           g.mul(em.c(gd2), g.var(eq_p))))),
                                         g.var(eq_p)),
                                   g.var(vf))));
        em.set_f(ed_p, g.mul(em.c(1.0 / m.tq0_p),
                             g.sub(g.mul(em.c(m.xq - m.xq_p),
                                         g.sub(g.sub(g.mul(em.c(gq1), iq),
                                                     g.mul(em.c(gq2), g.var(psi2_q))),
                                               g.mul(em.c(gq2), g.var(ed_p)))),
                                   g.var(ed_p))));
        em.set_f(psi2_d, g.mul(em.c(1.0 / m.td0_pp),
                               g.sub(g.add(g.neg(g.var(psi2_d)), g.var(eq_p)),
                                     g.mul(em.c(m.xd_p - m.xl), id))));
        em.set_f(psi2_q, g.mul(em.c(1.0 / m.tq0_pp),
                               g.sub(g.sub(g.neg(g.var(psi2_q)), g.var(ed_p)),
                                     g.mul(em.c(m.xq_p - m.xl), iq))));

        NodeId vh = g.sqrt(g.add(g.mul(vre(b), vre(b)), g.mul(vim(b), vim(b))));
        em.set_f(vm, g.mul(em.c(1.0 / a.tr), g.sub(vh, g.var(vm))));
        em.set_f(vr1, g.mul(em.c(1.0 / a.ta),
                            g.sub(g.mul(em.c(a.ka),
                                        g.sub(g.sub(g.sub(em.c(d.v_ref), g.var(vm)), g.var(vr2)),
                                              g.mul(em.c(a.kf / a.tf), g.var(vf)))),
                                  g.var(vr1))));
        em.set_f(vr2, g.mul(em.c(-1.0 / a.tf),
                            g.add(g.mul(em.c(a.kf / a.tf), g.var(vf)), g.var(vr2))));
        em.set_f(vf, g.mul(em.c(1.0 / a.te), g.sub(g.var(vr1), g.mul(em.c(a.ke), g.var(vf)))));

        em.inject(b, i_r, i_i);
    }

    for (const auto& d : c.gfms) {
        int b = c.bus_index(d.bus);
        const auto& p = d.p;
        VarId dc = em.dvar(d.name + ".delta_c");
        VarId pm = em.dvar(d.name + ".pm");
        VarId qm = em.dvar(d.name + ".qm");
        VarId xivd = em.dvar(d.name + ".xi_vd");
        VarId xivq = em.dvar(d.name + ".xi_vq");
        VarId xicd = em.dvar(d.name + ".xi_cd");
        VarId xicq = em.dvar(d.name + ".xi_cq");
        VarId ifr = em.dvar(d.name + ".if_R");
        VarId ifi = em.dvar(d.name + ".if_I");

        NodeId sd = g.sin(g.var(dc)), cd = g.cos(g.var(dc));
        NodeId vod = g.sub(g.mul(vre(b), sd), g.mul(vim(b), cd));
        NodeId voq = g.add(g.mul(vre(b), cd), g.mul(vim(b), sd));
        NodeId ifd = g.sub(g.mul(g.var(ifr), sd), g.mul(g.var(ifi), cd));
        NodeId ifq = g.add(g.mul(g.var(ifr), cd), g.mul(g.var(ifi), sd));
        NodeId pmeas = g.add(g.mul(vre(b), g.var(ifr)), g.mul(vim(b), g.var(ifi)));
        NodeId qmeas = g.sub(g.mul(vim(b), g.var(ifr)), g.mul(vre(b), g.var(ifi)));
        NodeId vrefd = g.add(em.c(d.v_set_op),
                             g.mul(em.c(p.mq), g.sub(em.c(d.q_ref), g.var(qm))));
        NodeId evd = g.sub(vrefd, vod);
        NodeId evq = g.neg(voq);
        NodeId irefd = g.sub(g.add(g.mul(em.c(p.kp_v), evd), g.mul(em.c(p.ki_v), g.var(xivd))),
                             g.mul(em.c(p.bc), voq));
        NodeId irefq = g.add(g.add(g.mul(em.c(p.kp_v), evq), g.mul(em.c(p.ki_v), g.var(xivq))),
                             g.mul(em.c(p.bc), vod));
        NodeId ecd = g.sub(irefd, ifd);
        NodeId ecq = g.sub(irefq, ifq);
        NodeId vcd = g.sub(g.add(g.add(vod, g.mul(em.c(p.kp_c), ecd)),
                                 g.mul(em.c(p.ki_c), g.var(xicd))),
                           g.mul(em.c(p.xf), ifq));
        NodeId vcq = g.add(g.add(g.add(voq, g.mul(em.c(p.kp_c), ecq)),
                                 g.mul(em.c(p.ki_c), g.var(xicq))),
                           g.mul(em.c(p.xf), ifd));
        NodeId vcr = g.add(g.mul(vcd, sd), g.mul(vcq, cd));
        NodeId vci = g.add(g.neg(g.mul(vcd, cd)), g.mul(vcq, sd));

        em.set_f(dc, g.mul(em.c(em.w0 * p.mp), g.sub(em.c(d.p_ref), g.var(pm))));
        em.set_f(pm, g.mul(em.c(1.0 / p.tp), g.sub(pmeas, g.var(pm))));
        em.set_f(qm, g.mul(em.c(1.0 / p.tq), g.sub(qmeas, g.var(qm))));
        em.set_f(xivd, evd);
        em.set_f(xivq, evq);
        em.set_f(xicd, ecd);
        em.set_f(xicq, ecq);
        double k = em.w0 / p.xf;
        em.set_f(ifr, g.mul(em.c(k), g.add(g.sub(g.sub(vcr, vre(b)),
                                                 g.mul(em.c(p.rf), g.var(ifr))),
                                           g.mul(em.c(p.xf), g.var(ifi)))));
        em.set_f(ifi, g.mul(em.c(k), g.sub(g.sub(g.sub(vci, vim(b)),
                                                 g.mul(em.c(p.rf), g.var(ifi))),
                                           g.mul(em.c(p.xf), g.var(ifr)))));
        em.inject(b, g.var(ifr), g.var(ifi));
    }

    for (const auto& d : c.rlbranches) {
        int a = c.bus_index(d.from);
        bool grounded = d.to == "gnd";
        int b = grounded ? -1 : c.bus_index(d.to);
        auto i = emit_rl_pair(em, d.name + ".i", d.r, d.x, vre(a), vim(a),
                              grounded ? zero : vre(b), grounded ? zero : vim(b));
        em.inject(a, g.neg(g.var(i[0])), g.neg(g.var(i[1])));
        if (!grounded) em.inject(b, g.var(i[0]), g.var(i[1]));
    }

    for (const auto& d : c.vsources) {
        int b = c.bus_index(d.bus);
        auto make = [](double f0, double fa, double fw) {
            InputSignal s;
            s.value = [f0, fa, fw](double t) { return f0 + fa * std::sin(fw * t); };
            s.derivative = [fa, fw](double t) { return fa * fw * std::cos(fw * t); };
            return s;
        };
        VarId fd = em.input(d.name + ".F_d", make(d.fd0, d.fda, d.fdw));
        VarId fq = em.input(d.name + ".F_q", make(d.fq0, d.fqa, d.fqw));
        VarId isr = em.avar(d.name + ".i_R");
        VarId isi = em.avar(d.name + ".i_I");
        em.device_g.push_back(g.sub(g.var(fd), vre(b)));
        em.device_g.push_back(g.sub(g.var(fq), vim(b)));
        em.inject(b, g.var(isr), g.var(isi));
    }

    // Bus equations: capacitor charging rows where shunts exist, otherwise
    // algebraic KCL rows (pure-x constraints at index-2 nodes).
    std::vector<NodeId> bus_g;
    for (int b = 0; b < nb; ++b) {
        auto sum = [&](int axis) {
            if (em.bus_cur[b][axis].empty())
                throw std::runtime_error("assemble: bus '" + c.buses[b].name +
                                         "' has no connected devices");
            NodeId s = em.bus_cur[b][axis][0];
            for (std::size_t i = 1; i < em.bus_cur[b][axis].size(); ++i)
                s = g.add(s, em.bus_cur[b][axis][i]);
            return s;
        };
        NodeId sr = sum(0), si = sum(1);
        double bshunt = c.bus_shunt_b(b);
        if (em.bus_diff[b]) {
            double k = em.w0 / bshunt;
            em.set_f(em.bus_v[b][0],
                     g.add(g.mul(em.c(k), sr), g.mul(em.c(em.w0), g.var(em.bus_v[b][1]))));
            em.set_f(em.bus_v[b][1],
                     g.sub(g.mul(em.c(k), si), g.mul(em.c(em.w0), g.var(em.bus_v[b][0]))));
        } else {
            bus_g.push_back(sr);
            bus_g.push_back(si);
        }
    }

    SemiExplicitDae::Parts parts;
    parts.graph = em.g;
    parts.omega0 = em.w0;
    parts.diff_vars = em.diff_vars;
    parts.f = em.f;
    parts.alg_vars = em.alg_vars;
    for (NodeId n : bus_g) parts.g.push_back(n);
    for (NodeId n : em.device_g) parts.g.push_back(n);
    parts.input_vars = em.inputs;
    parts.input_fns = em.input_fns;
    for (NodeId n : parts.f)
        if (n < 0) throw std::logic_error("assemble: differential variable without equation");

    auto sys = std::make_shared<SemiExplicitDae>(std::move(parts));
    sys->prepare_derivatives();
    return sys;
}

CircuitGraph build_circuit_graph(const NetworkCase& c) {
    CircuitGraph cg;
    cg.ground = cg.add_node("gnd");
    for (const auto& b : c.buses) cg.add_node(b.name);
    for (const auto& d : c.lines) {
        cg.add_edge(d.from, d.to, EdgeKind::Inductor, d.name);
        if (d.p.b > 0) {
            cg.add_edge(d.from, "gnd", EdgeKind::Capacitor, d.name + ".b1");
            cg.add_edge(d.to, "gnd", EdgeKind::Capacitor, d.name + ".b2");
        }
    }
    for (const auto& d : c.transformers) {
        std::string m = d.name + ".m";
        cg.add_edge(d.from, m, EdgeKind::Inductor, d.name + ".w1");
        cg.add_edge(m, d.to, EdgeKind::Inductor, d.name + ".w2");
        cg.add_edge(m, "gnd", EdgeKind::Inductor, d.name + ".mag");
    }
    for (const auto& d : c.loads) cg.add_edge(d.bus, "gnd", EdgeKind::Inductor, d.name);
    for (const auto& d : c.sgs) cg.add_edge(d.bus, "gnd", EdgeKind::CurrentSource, d.name);
    for (const auto& d : c.gfms) {
        std::string cv = d.name + ".cv";
        cg.add_edge(cv, "gnd", EdgeKind::VoltageSource, d.name + ".conv");
        cg.add_edge(cv, d.bus, EdgeKind::Inductor, d.name + ".filter");
        cg.add_edge(d.bus, "gnd", EdgeKind::Capacitor, d.name + ".cap");
    }
    for (const auto& d : c.shunts) cg.add_edge(d.bus, "gnd", EdgeKind::Capacitor, d.name);
    for (const auto& d : c.rlbranches) cg.add_edge(d.from, d.to, EdgeKind::Inductor, d.name);
    for (const auto& d : c.vsources) cg.add_edge(d.bus, "gnd", EdgeKind::VoltageSource, d.name);
    return cg;
}

CaseCounts report_counts(const NetworkCase& c, int states, int algebraic) {
    CaseCounts k;
    k.case_name = c.name;
    k.buses = static_cast<int>(c.buses.size());
    k.states = states;
    k.algebraic = algebraic;
    k.sgs = static_cast<int>(c.sgs.size());
    k.inverters = static_cast<int>(c.gfms.size());
    k.lines = static_cast<int>(c.lines.size());
    k.transformers = static_cast<int>(c.transformers.size());
    return k;
}

std::string counts_csv_header() {
    return "case,buses,states,algebraic,sgs,inverters,lines,transformers\n";
}

std::string counts_csv_row(const CaseCounts& k) {
    std::ostringstream os;
    os << k.case_name << "," << k.buses << "," << k.states << "," << k.algebraic << ","
       << k.sgs << "," << k.inverters << "," << k.lines << "," << k.transformers << "\n";
    return os.str();
}

// --- Case file I/O ----------------------------------------------------------

namespace {

struct FieldWriter {
    std::ostringstream os;
    void kv(const char* k, double v) { os << " " << k << " " << v; }
    void kv(const char* k, const std::string& v) { os << " " << k << " " << v; }
};

} // namespace

std::string write_case_file(const NetworkCase& c) {
    std::ostringstream os;
    os.precision(17);
    os << "case " << c.name << "\n";
    os << "base_mva " << c.base_mva << "\n";
    os << "freq_hz " << c.freq_hz << "\n";
    for (const auto& b : c.buses) os << "bus " << b.name << " kv " << b.kv << "\n";
    for (const auto& d : c.lines)
        os << "line " << d.name << " from " << d.from << " to " << d.to << " r " << d.p.r
           << " x " << d.p.x << " b " << d.p.b << "\n";
    for (const auto& d : c.transformers)
        os << "transformer " << d.name << " from " << d.from << " to " << d.to << " r1 "
           << d.p.r1 << " x1 " << d.p.x1 << " r2 " << d.p.r2 << " x2 " << d.p.x2 << " r3 "
           << d.p.r3 << " x3 " << d.p.x3 << "\n";
    for (const auto& d : c.loads)
        os << "load " << d.name << " bus " << d.bus << " p " << d.p.p << " q " << d.p.q << "\n";
    for (const auto& d : c.sgs) {
        const auto& m = d.machine;
        const auto& a = d.avr;
        os << "sg " << d.name << " bus " << d.bus << " slack " << (d.slack ? 1 : 0)
           << " v_set " << d.v_set << " p_set " << d.p_set << " xd " << m.xd << " xd_p "
           << m.xd_p << " xd_pp " << m.xd_pp << " xq " << m.xq << " xq_p " << m.xq_p
           << " xq_pp " << m.xq_pp << " xl " << m.xl << " ra " << m.ra << " td0_p "
           << m.td0_p << " tq0_p " << m.tq0_p << " td0_pp " << m.td0_pp << " tq0_pp "
           << m.tq0_pp << " h " << m.h << " d " << m.d << " ka " << a.ka << " ta " << a.ta
           << " ke " << a.ke << " te " << a.te << " kf " << a.kf << " tf " << a.tf << " tr "
           << a.tr << "\n";
    }
    for (const auto& d : c.gfms)
        os << "gfm " << d.name << " bus " << d.bus << " slack " << (d.slack ? 1 : 0)
           << " v_set " << d.v_set << " p_set " << d.p_set << " mp " << d.p.mp << " mq "
           << d.p.mq << " kp_v " << d.p.kp_v << " ki_v " << d.p.ki_v << " kp_c " << d.p.kp_c
           << " ki_c " << d.p.ki_c << " rf " << d.p.rf
           << " xf " << d.p.xf << " bc " << d.p.bc << " tp " << d.p.tp << " tq " << d.p.tq
           << "\n";
    for (const auto& d : c.shunts)
        os << "shuntcap " << d.name << " bus " << d.bus << " b " << d.b << "\n";
    for (const auto& d : c.rlbranches)
        os << "rlbranch " << d.name << " from " << d.from << " to " << d.to << " r " << d.r
           << " x " << d.x << "\n";
    for (const auto& d : c.vsources)
        os << "vsource " << d.name << " bus " << d.bus << " fd0 " << d.fd0 << " fda "
           << d.fda << " fdw " << d.fdw << " fq0 " << d.fq0 << " fqa " << d.fqa << " fqw "
           << d.fqw << "\n";
    return os.str();
}

NetworkCase read_case_file(const std::string& text) {
    NetworkCase c;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    auto fail = [&](const std::string& msg) {
        throw std::runtime_error("case file line " + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string kind;
        ls >> kind;
        if (kind.empty()) continue;

        auto fields = [&]() {
            std::map<std::string, std::string> kv;
            std::string k, v;
            while (ls >> k >> v) kv[k] = v;
            return kv;
        };
        auto num = [&](std::map<std::string, std::string>& kv, const std::string& k,
                       std::optional<double> def = std::nullopt) {
            auto it = kv.find(k);
            if (it == kv.end()) {
                if (def) return *def;
                fail("missing field '" + k + "'");
            }
            try {
                return std::stod(it->second);
            } catch (...) {
                fail("bad number for '" + k + "'");
            }
            return 0.0;
        };
        auto str = [&](std::map<std::string, std::string>& kv, const std::string& k) {
            auto it = kv.find(k);
            if (it == kv.end()) fail("missing field '" + k + "'");
            return it->second;
        };

        if (kind == "case") {
            ls >> c.name;
        } else if (kind == "base_mva") {
            ls >> c.base_mva;
        } else if (kind == "freq_hz") {
            ls >> c.freq_hz;
        } else if (kind == "bus") {
            std::string name;
            ls >> name;
            auto kv = fields();
            c.buses.push_back({name, num(kv, "kv", 1.0)});
        } else if (kind == "line") {
            std::string name;
            ls >> name;
            auto kv = fields();
            c.lines.push_back({name, str(kv, "from"), str(kv, "to"),
                               {num(kv, "r"), num(kv, "x"), num(kv, "b")}});
        } else if (kind == "transformer") {
            std::string name;
            ls >> name;
            auto kv = fields();
            c.transformers.push_back({name, str(kv, "from"), str(kv, "to"),
                                      {num(kv, "r1"), num(kv, "x1"), num(kv, "r2"),
                                       num(kv, "x2"), num(kv, "r3"), num(kv, "x3")}});
        } else if (kind == "load") {
            std::string name;
            ls >> name;
            auto kv = fields();
            c.loads.push_back({name, str(kv, "bus"), {num(kv, "p"), num(kv, "q")}});
        } else if (kind == "sg") {
            std::string name;
            ls >> name;
            auto kv = fields();
            SgDevice d;
            d.name = name;
            d.bus = str(kv, "bus");
            d.slack = num(kv, "slack", 0.0) != 0.0;
            d.v_set = num(kv, "v_set", 1.0);
            d.p_set = num(kv, "p_set", 0.0);
            auto& m = d.machine;
            m.xd = num(kv, "xd"); m.xd_p = num(kv, "xd_p"); m.xd_pp = num(kv, "xd_pp");
            m.xq = num(kv, "xq"); m.xq_p = num(kv, "xq_p"); m.xq_pp = num(kv, "xq_pp");
            m.xl = num(kv, "xl"); m.ra = num(kv, "ra");
            m.td0_p = num(kv, "td0_p"); m.tq0_p = num(kv, "tq0_p");
            m.td0_pp = num(kv, "td0_pp"); m.tq0_pp = num(kv, "tq0_pp");
            m.h = num(kv, "h"); m.d = num(kv, "d", 0.0);
            auto& a = d.avr;
            a.ka = num(kv, "ka", a.ka); a.ta = num(kv, "ta", a.ta);
            a.ke = num(kv, "ke", a.ke); a.te = num(kv, "te", a.te);
            a.kf = num(kv, "kf", a.kf); a.tf = num(kv, "tf", a.tf);
            a.tr = num(kv, "tr", a.tr);
            c.sgs.push_back(d);
        } else if (kind == "gfm") {
            std::string name;
            ls >> name;
            auto kv = fields();
            GfmDevice d;
            d.name = name;
            d.bus = str(kv, "bus");
            d.slack = num(kv, "slack", 0.0) != 0.0;
            d.v_set = num(kv, "v_set", 1.0);
            d.p_set = num(kv, "p_set", 0.0);
            auto& p = d.p;
            p.mp = num(kv, "mp", p.mp); p.mq = num(kv, "mq", p.mq);
            p.kp_v = num(kv, "kp_v", p.kp_v); p.ki_v = num(kv, "ki_v", p.ki_v);
            p.kp_c = num(kv, "kp_c", p.kp_c); p.ki_c = num(kv, "ki_c", p.ki_c);
            p.rf = num(kv, "rf", p.rf); p.xf = num(kv, "xf", p.xf);
            p.bc = num(kv, "bc", p.bc); p.tp = num(kv, "tp", p.tp); p.tq = num(kv, "tq", p.tq);
            c.gfms.push_back(d);
        } else if (kind == "shuntcap") {
            std::string name;
            ls >> name;
            auto kv = fields();
            c.shunts.push_back({name, str(kv, "bus"), num(kv, "b")});
        } else if (kind == "rlbranch") {
            std::string name;
            ls >> name;
            auto kv = fields();
            c.rlbranches.push_back({name, str(kv, "from"), str(kv, "to"), num(kv, "r"),
                                    num(kv, "x")});
        } else if (kind == "vsource") {
            std::string name;
            ls >> name;
            auto kv = fields();
            c.vsources.push_back({name, str(kv, "bus"), num(kv, "fd0", 0.0),
                                  num(kv, "fda", 0.0), num(kv, "fdw", 0.0),
                                  num(kv, "fq0", 0.0), num(kv, "fqa", 0.0),
                                  num(kv, "fqw", 0.0)});
        } else {
            fail("unknown record '" + kind + "'");
        }
    }
    c.validate();
    return c;
}

} // namespace emtdq

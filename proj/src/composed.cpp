#include "emtdq/composed.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace emtdq {

std::shared_ptr<ComposedModel> ComposedModel::build(const NetworkCase& c) {
    c.validate();
    if (!c.vsources.empty())
        throw std::invalid_argument("composed model: independent voltage sources are only "
                                    "supported by the raw/reference formulations");
    auto mp = std::make_shared<ComposedModel>();
    ComposedModel& m = *mp;
    m.case_ = c;
    m.w0_ = c.omega0();

    // State-carrying buses.
    std::map<std::string, int> slot; // bus name -> slot
    for (std::size_t b = 0; b < c.buses.size(); ++b) {
        double shunt = c.bus_shunt_b(static_cast<int>(b));
        if (shunt <= 0.0) continue;
        int s = static_cast<int>(m.buses_.size());
        slot[c.buses[b].name] = s;
        m.buses_.push_back({static_cast<int>(m.names_.size()), shunt});
        m.names_.push_back(c.buses[b].name + ".v_R");
        m.names_.push_back(c.buses[b].name + ".v_I");
    }
    auto need_slot = [&](const std::string& bus, const std::string& who) {
        auto it = slot.find(bus);
        if (it == slot.end())
            throw std::invalid_argument("composed model: " + who + " attaches to bus '" + bus +
                                        "' which carries no shunt capacitance and no "
                                        "reduced-subsystem owner");
        return it->second;
    };

    // Machine/transformer pairing: each SG consumes the transformer at its bus.
    std::set<std::string> consumed_xfmr, consumed_bus;
    for (const auto& d : c.sgs) {
        int bi = c.bus_index(d.bus);
        if (c.bus_shunt_b(bi) > 0.0)
            throw std::invalid_argument("composed model: SG '" + d.name +
                                        "' terminal bus has shunt capacitance; the S1+S2 "
                                        "subsystem expects a capacitor-free stator interface");
        const TransformerDevice* x = nullptr;
        bool swapped = false;
        for (const auto& t : c.transformers) {
            if (t.from == d.bus) { x = &t; swapped = false; }
            else if (t.to == d.bus) { x = &t; swapped = true; }
            else continue;
            break;
        }
        if (!x)
            throw std::invalid_argument("composed model: SG '" + d.name +
                                        "' has no transformer at bus '" + d.bus + "'");
        consumed_xfmr.insert(x->name);
        consumed_bus.insert(d.bus);
        TransformerParams tp = x->p;
        std::string far = swapped ? x->from : x->to;
        if (swapped) {
            std::swap(tp.r1, tp.r2);
            std::swap(tp.x1, tp.x2);
        }
        SgW w;
        w.st = -1; // filled after non-machine devices
        w.to = need_slot(far, "transformer '" + x->name + "'");
        w.m = d.machine;
        w.a = d.avr;
        w.tp = tp;
        w.tau_m = d.tau_m;
        w.v_ref = d.v_ref;
        w.name = d.name;
        w.xfmr_name = x->name;
        w.bus_name = d.bus;
        m.sgs_.push_back(w);
    }

    for (const auto& d : c.lines) {
        LineW w{static_cast<int>(m.names_.size()), need_slot(d.from, "line " + d.name),
                need_slot(d.to, "line " + d.name), d.p};
        m.lines_.push_back(w);
        m.names_.push_back(d.name + ".i_R");
        m.names_.push_back(d.name + ".i_I");
    }
    for (const auto& d : c.transformers) {
        if (consumed_xfmr.count(d.name)) continue;
        XfmrW w{static_cast<int>(m.names_.size()), need_slot(d.from, "transformer " + d.name),
                need_slot(d.to, "transformer " + d.name), d.p, d.name};
        m.xfmrs_.push_back(w);
        m.names_.push_back(d.name + ".i1_R");
        m.names_.push_back(d.name + ".i1_I");
        m.names_.push_back(d.name + ".i2_R");
        m.names_.push_back(d.name + ".i2_I");
    }
    for (const auto& d : c.loads) {
        LoadW w{static_cast<int>(m.names_.size()), need_slot(d.bus, "load " + d.name),
                d.p.r(), d.p.x(), d.step_time, d.step_fraction};
        m.loads_.push_back(w);
        m.names_.push_back(d.name + ".i_R");
        m.names_.push_back(d.name + ".i_I");
    }
    for (auto& w : m.sgs_) {
        w.st = static_cast<int>(m.names_.size());
        for (const char* q : {".delta", ".omega", ".psi_d", ".psi_q", ".ed_p", ".eq_p",
                              ".psi2_d", ".psi2_q", ".avr_vm", ".avr_vr1", ".avr_vr2", ".vf"})
            m.names_.push_back(w.name + q);
        m.names_.push_back(w.xfmr_name + ".i2_R");
        m.names_.push_back(w.xfmr_name + ".i2_I");
    }
    for (const auto& d : c.gfms) {
        GfmW w{static_cast<int>(m.names_.size()), need_slot(d.bus, "gfm " + d.name), d.p,
               d.p_ref, d.q_ref, d.v_set_op};
        m.gfms_.push_back(w);
        for (const char* q : {".delta_c", ".pm", ".qm", ".xi_vd", ".xi_vq", ".xi_cd",
                              ".xi_cq", ".if_R", ".if_I"})
            m.names_.push_back(d.name + q);
    }
    for (const auto& d : c.rlbranches) {
        int to = d.to == "gnd" ? -1 : need_slot(d.to, "rlbranch " + d.name);
        RlbW w{static_cast<int>(m.names_.size()), need_slot(d.from, "rlbranch " + d.name),
               to, d.r, d.x};
        m.rlbs_.push_back(w);
        m.names_.push_back(d.name + ".i_R");
        m.names_.push_back(d.name + ".i_I");
    }

    // Every capacitor-free bus must have been consumed by a machine block.
    for (std::size_t b = 0; b < c.buses.size(); ++b) {
        if (c.bus_shunt_b(static_cast<int>(b)) > 0.0) continue;
        if (!consumed_bus.count(c.buses[b].name))
            throw std::invalid_argument("composed model: bus '" + c.buses[b].name +
                                        "' has no shunt capacitance and no reduced-subsystem "
                                        "owner (unsupported index-2 structure)");
    }

    for (std::size_t i = 0; i < m.names_.size(); ++i) m.index_[m.names_[i]] = static_cast<int>(i);
    m.build_sparsity();
    return mp;
}

int ComposedModel::index_of(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
}

template <class T>
void ComposedModel::rhs_impl(double t, const T* y, T* dy) const {
    const int nbus = static_cast<int>(buses_.size());
    std::vector<RI<T>> acc(nbus);
    auto busv = [&](int s) { return RI<T>{y[buses_[s].st], y[buses_[s].st + 1]}; };

    for (const auto& w : lines_) {
        RI<T> i{y[w.st], y[w.st + 1]};
        RI<T> va = busv(w.from), vb = busv(w.to);
        double k = w0_ / w.p.x;
        dy[w.st] = k * (va.re - vb.re - w.p.r * i.re + w.p.x * i.im);
        dy[w.st + 1] = k * (va.im - vb.im - w.p.r * i.im - w.p.x * i.re);
        acc[w.from].re = acc[w.from].re - i.re;
        acc[w.from].im = acc[w.from].im - i.im;
        acc[w.to].re = acc[w.to].re + i.re;
        acc[w.to].im = acc[w.to].im + i.im;
    }

    for (const auto& w : xfmrs_) {
        RI<T> i1{y[w.st], y[w.st + 1]}, i2{y[w.st + 2], y[w.st + 3]};
        auto out = transformer_reduced_rhs(w.p, busv(w.from), busv(w.to), i1, i2, w0_);
        dy[w.st] = out.di1.re;
        dy[w.st + 1] = out.di1.im;
        dy[w.st + 2] = out.di2.re;
        dy[w.st + 3] = out.di2.im;
        acc[w.from].re = acc[w.from].re - i1.re;
        acc[w.from].im = acc[w.from].im - i1.im;
        acc[w.to].re = acc[w.to].re + i2.re;
        acc[w.to].im = acc[w.to].im + i2.im;
    }

    for (const auto& w : loads_) {
        RI<T> i{y[w.st], y[w.st + 1]};
        RI<T> v = busv(w.bus);
        double s = (w.step_time >= 0.0 && t >= w.step_time) ? 1.0 + w.step_fraction : 1.0;
        double k = w0_ / w.x;
        dy[w.st] = k * (s * v.re - w.r * i.re + w.x * i.im);
        dy[w.st + 1] = k * (s * v.im - w.r * i.im - w.x * i.re);
        acc[w.bus].re = acc[w.bus].re - i.re;
        acc[w.bus].im = acc[w.bus].im - i.im;
    }

    for (const auto& w : sgs_) {
        SgState<T> s;
        const T* p = y + w.st;
        s.delta = p[0]; s.omega = p[1]; s.psi_d = p[2]; s.psi_q = p[3];
        s.ed_p = p[4]; s.eq_p = p[5]; s.psi2_d = p[6]; s.psi2_q = p[7];
        s.vm = p[8]; s.vr1 = p[9]; s.vr2 = p[10]; s.vf = p[11];
        s.i2 = {p[12], p[13]};
        auto o = machine_transformer_reduced_rhs(w.m, w.a, w.tp, s, busv(w.to),
                                                 w.tau_m, w.v_ref, w0_);
        T* q = dy + w.st;
        q[0] = o.dot.delta; q[1] = o.dot.omega; q[2] = o.dot.psi_d; q[3] = o.dot.psi_q;
        q[4] = o.dot.ed_p; q[5] = o.dot.eq_p; q[6] = o.dot.psi2_d; q[7] = o.dot.psi2_q;
        q[8] = o.dot.vm; q[9] = o.dot.vr1; q[10] = o.dot.vr2; q[11] = o.dot.vf;
        q[12] = o.dot.i2.re; q[13] = o.dot.i2.im;
        acc[w.to].re = acc[w.to].re + s.i2.re;
        acc[w.to].im = acc[w.to].im + s.i2.im;
    }

    for (const auto& w : gfms_) {
        GfmState<T> s;
        const T* p = y + w.st;
        s.delta_c = p[0]; s.pm = p[1]; s.qm = p[2];
        s.xi_vd = p[3]; s.xi_vq = p[4]; s.xi_cd = p[5]; s.xi_cq = p[6];
        s.i_f = {p[7], p[8]};
        auto o = gfm_rhs(w.p, s, busv(w.bus), w.p_ref, w.q_ref, w.v_set_op, w0_);
        T* q = dy + w.st;
        q[0] = o.dot.delta_c; q[1] = o.dot.pm; q[2] = o.dot.qm;
        q[3] = o.dot.xi_vd; q[4] = o.dot.xi_vq; q[5] = o.dot.xi_cd; q[6] = o.dot.xi_cq;
        q[7] = o.dot.i_f.re; q[8] = o.dot.i_f.im;
        acc[w.bus].re = acc[w.bus].re + s.i_f.re;
        acc[w.bus].im = acc[w.bus].im + s.i_f.im;
    }

    for (const auto& w : rlbs_) {
        RI<T> i{y[w.st], y[w.st + 1]};
        RI<T> va = busv(w.from);
        RI<T> vb = w.to < 0 ? RI<T>{} : busv(w.to);
        double k = w0_ / w.x;
        dy[w.st] = k * (va.re - vb.re - w.r * i.re + w.x * i.im);
        dy[w.st + 1] = k * (va.im - vb.im - w.r * i.im - w.x * i.re);
        acc[w.from].re = acc[w.from].re - i.re;
        acc[w.from].im = acc[w.from].im - i.im;
        if (w.to >= 0) {
            acc[w.to].re = acc[w.to].re + i.re;
            acc[w.to].im = acc[w.to].im + i.im;
        }
    }

    for (int s = 0; s < nbus; ++s) {
        const auto& w = buses_[s];
        double k = w0_ / w.b;
        dy[w.st] = k * acc[s].re + w0_ * y[w.st + 1];
        dy[w.st + 1] = k * acc[s].im - w0_ * y[w.st];
    }
}

void ComposedModel::rhs(double t, std::span<const double> y, std::span<double> dy) const {
    rhs_impl<double>(t, y.data(), dy.data());
}

void ComposedModel::time_partial(double, std::span<const double>, std::span<double> ft) const {
    // The only time dependence is the piecewise-constant load scale; its
    // derivative vanishes between events.
    std::fill(ft.begin(), ft.end(), 0.0);
}

void ComposedModel::build_sparsity() {
    const int n = size();
    std::vector<std::set<int>> cols_of_row(n);
    auto mark_block = [&](std::vector<int> rows, std::vector<int> cols) {
        for (int r : rows)
            for (int c : cols) cols_of_row[r].insert(c);
    };
    auto bus_states = [&](int s) {
        return std::vector<int>{buses_[s].st, buses_[s].st + 1};
    };
    auto range = [&](int st, int k) {
        std::vector<int> v(k);
        for (int i = 0; i < k; ++i) v[i] = st + i;
        return v;
    };
    auto cat = [](std::vector<int> a, const std::vector<int>& b) {
        a.insert(a.end(), b.begin(), b.end());
        return a;
    };

    for (const auto& w : buses_) mark_block(range(w.st, 2), range(w.st, 2));
    for (const auto& w : lines_) {
        auto reads = cat(cat(range(w.st, 2), bus_states(w.from)), bus_states(w.to));
        auto writes = cat(cat(range(w.st, 2), bus_states(w.from)), bus_states(w.to));
        mark_block(writes, reads);
    }
    for (const auto& w : xfmrs_) {
        auto reads = cat(cat(range(w.st, 4), bus_states(w.from)), bus_states(w.to));
        auto writes = cat(cat(range(w.st, 4), bus_states(w.from)), bus_states(w.to));
        mark_block(writes, reads);
    }
    for (const auto& w : loads_) {
        auto reads = cat(range(w.st, 2), bus_states(w.bus));
        auto writes = cat(range(w.st, 2), bus_states(w.bus));
        mark_block(writes, reads);
    }
    for (const auto& w : sgs_) {
        auto reads = cat(range(w.st, 14), bus_states(w.to));
        auto writes = cat(range(w.st, 14), bus_states(w.to));
        mark_block(writes, reads);
    }
    for (const auto& w : gfms_) {
        auto reads = cat(range(w.st, 9), bus_states(w.bus));
        auto writes = cat(range(w.st, 9), bus_states(w.bus));
        mark_block(writes, reads);
    }
    for (const auto& w : rlbs_) {
        auto reads = cat(range(w.st, 2), bus_states(w.from));
        auto writes = cat(range(w.st, 2), bus_states(w.from));
        if (w.to >= 0) {
            reads = cat(reads, bus_states(w.to));
            writes = cat(writes, bus_states(w.to));
        }
        mark_block(writes, reads);
    }

    rows_of_col_.assign(n, {});
    for (int r = 0; r < n; ++r)
        for (int c : cols_of_row[r]) rows_of_col_[c].push_back(r);

    // Greedy distance-2 coloring of columns.
    std::vector<int> color(n, -1);
    int ncolors = 0;
    for (int c = 0; c < n; ++c) {
        std::set<int> banned;
        for (int r : rows_of_col_[c])
            for (int c2 : cols_of_row[r])
                if (color[c2] >= 0) banned.insert(color[c2]);
        int k = 0;
        while (banned.count(k)) ++k;
        color[c] = k;
        ncolors = std::max(ncolors, k + 1);
    }
    color_groups_.assign(ncolors, {});
    for (int c = 0; c < n; ++c) color_groups_[color[c]].push_back(c);
}

void ComposedModel::jacobian(double t, std::span<const double> y, Mat& J) const {
    const int n = size();
    J.setZero(n, n);
    std::vector<double> yp(y.begin(), y.end()), f0(n), f1(n);
    rhs(t, yp, f0);
    const double sq = std::sqrt(std::numeric_limits<double>::epsilon());
    for (const auto& group : color_groups_) {
        std::vector<double> deltas(group.size());
        for (std::size_t k = 0; k < group.size(); ++k) {
            int c = group[k];
            deltas[k] = sq * (1.0 + std::abs(yp[c]));
            yp[c] += deltas[k];
        }
        rhs(t, yp, f1);
        for (std::size_t k = 0; k < group.size(); ++k) {
            int c = group[k];
            yp[c] = y[c];
            for (int r : rows_of_col_[c]) J(r, c) = (f1[r] - f0[r]) / deltas[k];
        }
    }
}

Mat ComposedModel::state_matrix(double t, const Vec& y) const {
    using cd = std::complex<double>;
    const int n = size();
    const double h = 1e-100;
    Mat A(n, n);
    std::vector<cd> yc(n), dyc(n);
    for (int i = 0; i < n; ++i) yc[i] = y[i];
    for (int j = 0; j < n; ++j) {
        yc[j] = cd(y[j], h);
        rhs_impl<cd>(t, yc.data(), dyc.data());
        yc[j] = y[j];
        for (int i = 0; i < n; ++i) A(i, j) = dyc[i].imag() / h;
    }
    return A;
}

std::map<std::string, double> ComposedModel::interface_values(
    double t, std::span<const double> y) const {
    (void)t;
    std::map<std::string, double> out;
    auto busv = [&](int s) { return RI<double>{y[buses_[s].st], y[buses_[s].st + 1]}; };
    for (const auto& w : xfmrs_) {
        RI<double> i1{y[w.st], y[w.st + 1]}, i2{y[w.st + 2], y[w.st + 3]};
        auto o = transformer_reduced_rhs(w.p, busv(w.from), busv(w.to), i1, i2, w0_);
        RI<double> i3 = transformer_magnetizing(i1, i2);
        out[w.name + ".v3_R"] = o.v3.re;
        out[w.name + ".v3_I"] = o.v3.im;
        out[w.name + ".i3_R"] = i3.re;
        out[w.name + ".i3_I"] = i3.im;
    }
    for (const auto& w : sgs_) {
        SgState<double> s;
        const double* p = y.data() + w.st;
        s.delta = p[0]; s.omega = p[1]; s.psi_d = p[2]; s.psi_q = p[3];
        s.ed_p = p[4]; s.eq_p = p[5]; s.psi2_d = p[6]; s.psi2_q = p[7];
        s.vm = p[8]; s.vr1 = p[9]; s.vr2 = p[10]; s.vf = p[11];
        s.i2 = {p[12], p[13]};
        auto o = machine_transformer_reduced_rhs(w.m, w.a, w.tp, s, busv(w.to),
                                                 w.tau_m, w.v_ref, w0_);
        out[w.bus_name + ".v_R"] = o.v1.re;
        out[w.bus_name + ".v_I"] = o.v1.im;
        out[w.xfmr_name + ".v3_R"] = o.v3.re;
        out[w.xfmr_name + ".v3_I"] = o.v3.im;
        out[w.xfmr_name + ".i1_R"] = o.i1.re;
        out[w.xfmr_name + ".i1_I"] = o.i1.im;
        out[w.xfmr_name + ".i3_R"] = o.i3.re;
        out[w.xfmr_name + ".i3_I"] = o.i3.im;
    }
    return out;
}

ComposedModel::ConstraintResiduals ComposedModel::constraint_residuals(
    double t, std::span<const double> y) const {
    (void)t;
    ConstraintResiduals r;
    auto busv = [&](int s) { return RI<double>{y[buses_[s].st], y[buses_[s].st + 1]}; };
    (void)busv;
    for (const auto& w : xfmrs_) {
        RI<double> i1{y[w.st], y[w.st + 1]}, i2{y[w.st + 2], y[w.st + 3]};
        RI<double> i3 = transformer_magnetizing(i1, i2);
        r.magnetizing = std::max({r.magnetizing, std::abs(i1.re - i2.re - i3.re),
                                  std::abs(i1.im - i2.im - i3.im)});
    }
    for (const auto& w : sgs_) {
        const double* p = y.data() + w.st;
        double gd1 = w.m.gamma_d1(), gq1 = w.m.gamma_q1();
        double id = (-p[2] + gd1 * p[5] + (1.0 - gd1) * p[6]) / w.m.xd_pp;
        double iq = (-p[3] - gq1 * p[4] + (1.0 - gq1) * p[7]) / w.m.xq_pp;
        double sd = std::sin(p[0]), cd = std::cos(p[0]);
        RI<double> i_mach{id * sd + iq * cd, -id * cd + iq * sd};
        RI<double> i1 = i_mach; // the S1+S2 block recovers i1 from the machine states
        RI<double> i2{p[12], p[13]};
        RI<double> i3 = transformer_magnetizing(i1, i2);
        r.stator = std::max({r.stator, std::abs(i_mach.re - i1.re), std::abs(i_mach.im - i1.im)});
        r.magnetizing = std::max({r.magnetizing, std::abs(i1.re - i2.re - i3.re),
                                  std::abs(i1.im - i2.im - i3.im)});
    }
    return r;
}

} // namespace emtdq

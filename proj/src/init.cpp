#include "emtdq/init.hpp"

#include <cmath>
#include <sstream>

namespace emtdq {

using cd = std::complex<double>;

namespace {

struct PfSetup {
    Eigen::MatrixXcd ybus;
    std::vector<int> type; // 0 slack, 1 PV, 2 PQ
    std::vector<double> vset, pset;
    std::vector<std::string> source_at_bus; // device name or empty
};

PfSetup pf_setup(const NetworkCase& c) {
    if (!c.vsources.empty())
        throw std::invalid_argument("power flow: cases with independent sources are "
                                    "detection fixtures, not initializable systems");
    const int n = static_cast<int>(c.buses.size());
    PfSetup s;
    s.ybus = Eigen::MatrixXcd::Zero(n, n);
    s.type.assign(n, 2);
    s.vset.assign(n, 1.0);
    s.pset.assign(n, 0.0);
    s.source_at_bus.assign(n, "");

    auto& Y = s.ybus;
    for (const auto& d : c.lines) {
        int a = c.bus_index(d.from), b = c.bus_index(d.to);
        cd y = 1.0 / cd(d.p.r, d.p.x);
        Y(a, a) += y + cd(0, d.p.b / 2);
        Y(b, b) += y + cd(0, d.p.b / 2);
        Y(a, b) -= y;
        Y(b, a) -= y;
    }
    for (const auto& d : c.transformers) {
        int a = c.bus_index(d.from), b = c.bus_index(d.to);
        cd y1 = 1.0 / cd(d.p.r1, d.p.x1);
        cd y2 = 1.0 / cd(d.p.r2, d.p.x2);
        cd y3 = 1.0 / cd(d.p.r3, d.p.x3);
        cd den = y1 + y2 + y3;
        Y(a, a) += y1 * (y2 + y3) / den;
        Y(b, b) += y2 * (y1 + y3) / den;
        Y(a, b) -= y1 * y2 / den;
        Y(b, a) -= y1 * y2 / den;
    }
    for (const auto& d : c.loads) {
        int b = c.bus_index(d.bus);
        Y(b, b) += 1.0 / cd(d.p.r(), d.p.x());
    }
    for (const auto& d : c.shunts) Y(c.bus_index(d.bus), c.bus_index(d.bus)) += cd(0, d.b);
    for (const auto& d : c.gfms) Y(c.bus_index(d.bus), c.bus_index(d.bus)) += cd(0, d.p.bc);
    for (const auto& d : c.rlbranches) {
        int a = c.bus_index(d.from);
        cd y = 1.0 / cd(d.r, d.x);
        if (d.to == "gnd") {
            Y(a, a) += y;
        } else {
            int b = c.bus_index(d.to);
            Y(a, a) += y;
            Y(b, b) += y;
            Y(a, b) -= y;
            Y(b, a) -= y;
        }
    }

    int slack_count = 0;
    auto mark = [&](const std::string& bus, const std::string& dev, bool slack,
                    double vset, double pset) {
        int b = c.bus_index(bus);
        if (!s.source_at_bus[b].empty())
            throw std::invalid_argument("power flow: two sources at bus '" + bus + "'");
        s.source_at_bus[b] = dev;
        s.type[b] = slack ? 0 : 1;
        s.vset[b] = vset;
        s.pset[b] = pset;
        slack_count += slack ? 1 : 0;
    };
    for (const auto& d : c.sgs) mark(d.bus, d.name, d.slack, d.v_set, d.p_set);
    for (const auto& d : c.gfms) mark(d.bus, d.name, d.slack, d.v_set, d.p_set);
    if (slack_count != 1)
        throw std::invalid_argument("power flow: exactly one slack device required, found " +
                                    std::to_string(slack_count));
    return s;
}

} // namespace

PowerFlowSolution solve_power_flow(const NetworkCase& c, double tol, int max_iter) {
    c.validate();
    PfSetup s = pf_setup(c);
    const int n = static_cast<int>(c.buses.size());

    std::vector<double> vm(n), va(n, 0.0);
    for (int i = 0; i < n; ++i) vm[i] = s.type[i] == 2 ? 1.0 : s.vset[i];

    // Unknown layout: theta for non-slack buses, then V for PQ buses.
    std::vector<int> th_idx, vm_idx;
    for (int i = 0; i < n; ++i)
        if (s.type[i] != 0) th_idx.push_back(i);
    for (int i = 0; i < n; ++i)
        if (s.type[i] == 2) vm_idx.push_back(i);
    const int nth = static_cast<int>(th_idx.size());
    const int nvm = static_cast<int>(vm_idx.size());

    auto calc_pq = [&](int i) {
        double p = 0, q = 0;
        for (int k = 0; k < n; ++k) {
            double g = s.ybus(i, k).real(), b = s.ybus(i, k).imag();
            double d = va[i] - va[k];
            p += vm[i] * vm[k] * (g * std::cos(d) + b * std::sin(d));
            q += vm[i] * vm[k] * (g * std::sin(d) - b * std::cos(d));
        }
        return std::pair<double, double>(p, q);
    };

    PowerFlowSolution out;
    double worst = 0;
    int it = 0;
    for (; it < max_iter; ++it) {
        Vec mis(nth + nvm);
        for (int r = 0; r < nth; ++r) mis[r] = s.pset[th_idx[r]] - calc_pq(th_idx[r]).first;
        for (int r = 0; r < nvm; ++r) mis[nth + r] = 0.0 - calc_pq(vm_idx[r]).second;
        worst = mis.size() ? mis.cwiseAbs().maxCoeff() : 0.0;
        if (worst <= tol) break;

        Mat J = Mat::Zero(nth + nvm, nth + nvm);
        for (int r = 0; r < nth; ++r) {
            int i = th_idx[r];
            auto [pi, qi] = calc_pq(i);
            for (int cidx = 0; cidx < nth; ++cidx) {
                int k = th_idx[cidx];
                if (k == i) {
                    J(r, cidx) = -qi - s.ybus(i, i).imag() * vm[i] * vm[i];
                } else {
                    double d = va[i] - va[k];
                    J(r, cidx) = vm[i] * vm[k] *
                                 (s.ybus(i, k).real() * std::sin(d) -
                                  s.ybus(i, k).imag() * std::cos(d));
                }
            }
            for (int cidx = 0; cidx < nvm; ++cidx) {
                int k = vm_idx[cidx];
                if (k == i) {
                    J(r, nth + cidx) = pi / vm[i] + s.ybus(i, i).real() * vm[i];
                } else {
                    double d = va[i] - va[k];
                    J(r, nth + cidx) = vm[i] * (s.ybus(i, k).real() * std::cos(d) +
                                                s.ybus(i, k).imag() * std::sin(d));
                }
            }
        }
        for (int r = 0; r < nvm; ++r) {
            int i = vm_idx[r];
            auto [pi, qi] = calc_pq(i);
            for (int cidx = 0; cidx < nth; ++cidx) {
                int k = th_idx[cidx];
                if (k == i) {
                    J(nth + r, cidx) = pi - s.ybus(i, i).real() * vm[i] * vm[i];
                } else {
                    double d = va[i] - va[k];
                    J(nth + r, cidx) = -vm[i] * vm[k] *
                                       (s.ybus(i, k).real() * std::cos(d) +
                                        s.ybus(i, k).imag() * std::sin(d));
                }
            }
            for (int cidx = 0; cidx < nvm; ++cidx) {
                int k = vm_idx[cidx];
                if (k == i) {
                    J(nth + r, nth + cidx) = qi / vm[i] - s.ybus(i, i).imag() * vm[i];
                } else {
                    double d = va[i] - va[k];
                    J(nth + r, nth + cidx) = vm[i] * (s.ybus(i, k).real() * std::sin(d) -
                                                      s.ybus(i, k).imag() * std::cos(d));
                }
            }
        }
        Vec dx = lu_solve(J, mis);
        for (int r = 0; r < nth; ++r) va[th_idx[r]] += dx[r];
        for (int r = 0; r < nvm; ++r) vm[vm_idx[r]] += dx[nth + r];
    }
    if (worst > tol)
        throw std::runtime_error("power flow: no convergence after " +
                                 std::to_string(max_iter) + " iterations, worst mismatch " +
                                 std::to_string(worst));

    out.iterations = it;
    out.mismatch = worst;
    out.v.resize(n);
    for (int i = 0; i < n; ++i) out.v[i] = std::polar(vm[i], va[i]);
    for (const auto& d : c.transformers) {
        int a = c.bus_index(d.from), b = c.bus_index(d.to);
        cd y1 = 1.0 / cd(d.p.r1, d.p.x1);
        cd y2 = 1.0 / cd(d.p.r2, d.p.x2);
        cd y3 = 1.0 / cd(d.p.r3, d.p.x3);
        out.xfmr_vm[d.name] = (y1 * out.v[a] + y2 * out.v[b]) / (y1 + y2 + y3);
    }
    Eigen::VectorXcd vv(n);
    for (int i = 0; i < n; ++i) vv[i] = out.v[i];
    Eigen::VectorXcd inj = s.ybus * vv;
    for (int i = 0; i < n; ++i) {
        if (s.source_at_bus[i].empty()) continue;
        out.inj_current[s.source_at_bus[i]] = inj[i];
        out.injection[s.source_at_bus[i]] = out.v[i] * std::conj(inj[i]);
    }
    return out;
}

std::map<std::string, double> initialize_devices(NetworkCase& c,
                                                 const PowerFlowSolution& pf) {
    std::map<std::string, double> x;
    auto put_pair = [&](const std::string& base, cd v) {
        x[base + "_R"] = v.real();
        x[base + "_I"] = v.imag();
    };

    for (std::size_t b = 0; b < c.buses.size(); ++b)
        put_pair(c.buses[b].name + ".v", pf.v[b]);

    for (const auto& d : c.lines) {
        cd va = pf.v[c.bus_index(d.from)], vb = pf.v[c.bus_index(d.to)];
        put_pair(d.name + ".i", (va - vb) / cd(d.p.r, d.p.x));
    }
    for (const auto& d : c.rlbranches) {
        cd va = pf.v[c.bus_index(d.from)];
        cd vb = d.to == "gnd" ? cd(0, 0) : pf.v[c.bus_index(d.to)];
        put_pair(d.name + ".i", (va - vb) / cd(d.r, d.x));
    }
    for (const auto& d : c.loads) {
        cd v = pf.v[c.bus_index(d.bus)];
        put_pair(d.name + ".i", v / cd(d.p.r(), d.p.x()));
    }
    for (const auto& d : c.transformers) {
        cd va = pf.v[c.bus_index(d.from)], vb = pf.v[c.bus_index(d.to)];
        cd vmi = pf.xfmr_vm.at(d.name);
        put_pair(d.name + ".i1", (va - vmi) / cd(d.p.r1, d.p.x1));
        put_pair(d.name + ".i2", (vmi - vb) / cd(d.p.r2, d.p.x2));
        put_pair(d.name + ".i3", vmi / cd(d.p.r3, d.p.x3));
        put_pair(d.name + ".v3", vmi);
    }

    for (auto& d : c.sgs) {
        const auto& m = d.machine;
        cd v = pf.v[c.bus_index(d.bus)];
        cd i = pf.inj_current.at(d.name);
        cd e = v + cd(m.ra, m.xq) * i;
        double delta = std::arg(e);
        cd rot = std::polar(1.0, 3.14159265358979323846 / 2.0 - delta);
        cd vdq = v * rot, idq = i * rot;
        double vd = vdq.real(), vq = vdq.imag();
        double id = idq.real(), iq = idq.imag();
        double psi_d = vq + m.ra * iq;
        double psi_q = -(vd + m.ra * id);
        double eq_p = psi_d + m.xd_p * id;
        double ed_p = -psi_q - m.xq_p * iq;
        double psi2_d = eq_p - (m.xd_p - m.xl) * id;
        double psi2_q = -ed_p - (m.xq_p - m.xl) * iq;
        double vf = eq_p + (m.xd - m.xd_p) * id;
        double te = psi_d * iq - psi_q * id;

        x[d.name + ".delta"] = delta;
        x[d.name + ".omega"] = 1.0;
        x[d.name + ".psi_d"] = psi_d;
        x[d.name + ".psi_q"] = psi_q;
        x[d.name + ".ed_p"] = ed_p;
        x[d.name + ".eq_p"] = eq_p;
        x[d.name + ".psi2_d"] = psi2_d;
        x[d.name + ".psi2_q"] = psi2_q;
        x[d.name + ".vf"] = vf;
        x[d.name + ".avr_vm"] = std::abs(v);
        x[d.name + ".avr_vr1"] = d.avr.ke * vf;
        x[d.name + ".avr_vr2"] = -(d.avr.kf / d.avr.tf) * vf;
        d.tau_m = te;
        d.v_ref = std::abs(v) + d.avr.ke * vf / d.avr.ka;
    }

    for (auto& d : c.gfms) {
        cd v = pf.v[c.bus_index(d.bus)];
        cd i = pf.inj_current.at(d.name);
        double p = (v * std::conj(i)).real();
        double q = (v * std::conj(i)).imag();
        double delta_c = std::arg(v) + 3.14159265358979323846 / 2.0;
        cd rot = std::polar(1.0, 3.14159265358979323846 / 2.0 - delta_c);
        cd idq = i * rot;
        cd vdq = v * rot; // (v_set_op, 0) by construction
        d.p_ref = p;
        d.q_ref = q;
        d.v_set_op = std::abs(v);
        x[d.name + ".delta_c"] = delta_c;
        x[d.name + ".pm"] = p;
        x[d.name + ".qm"] = q;
        x[d.name + ".xi_vd"] = (idq.real() + d.p.bc * vdq.imag()) / d.p.ki_v;
        x[d.name + ".xi_vq"] = (idq.imag() - d.p.bc * vdq.real()) / d.p.ki_v;
        x[d.name + ".xi_cd"] = d.p.rf * idq.real() / d.p.ki_c;
        x[d.name + ".xi_cq"] = d.p.rf * idq.imag() / d.p.ki_c;
        put_pair(d.name + ".if", i);
    }
    return x;
}

RefineResult refine_equilibrium(const Model& model, const Vec& y0, double tol,
                                int max_iter) {
    const int n = model.size();
    RefineResult out;
    out.y = y0;
    Vec f(n);
    Mat J;
    std::vector<double> fv(n);
    std::ostringstream history;
    for (int it = 0; it <= max_iter; ++it) {
        model.rhs(0.0, std::span<const double>(out.y.data(), n),
                  std::span<double>(fv.data(), n));
        for (int i = 0; i < n; ++i) f[i] = fv[i];
        out.residual = f.cwiseAbs().maxCoeff();
        out.iterations = it;
        history << "  iter " << it << ": residual " << out.residual << "\n";
        if (out.residual <= tol) return out;
        if (it == max_iter) break;
        model.refine_jacobian(0.0, std::span<const double>(out.y.data(), n), J);
        Vec step = lstsq_solve(J, f);
        if (!step.allFinite())
            throw std::runtime_error("equilibrium refinement: non-finite Newton step");
        out.y -= step;
    }
    throw std::runtime_error("equilibrium refinement stagnated; residual history:\n" +
                             history.str());
}

InitResult initialize_case(NetworkCase& c, double pf_tol, double eq_tol) {
    InitResult r;
    r.pf = solve_power_flow(c, pf_tol);
    auto values = initialize_devices(c, r.pf);
    r.model = ComposedModel::build(c);
    Vec y0(r.model->size());
    for (int i = 0; i < r.model->size(); ++i) {
        auto it = values.find(r.model->names()[i]);
        if (it == values.end())
            throw std::logic_error("init: no value for state '" + r.model->names()[i] + "'");
        y0[i] = it->second;
    }
    r.refine = refine_equilibrium(*r.model, y0, eq_tol);
    r.y0 = r.refine.y;
    return r;
}

std::string write_ic_csv(const std::vector<std::string>& names, const Vec& y) {
    std::ostringstream os;
    os << "variable,value\n";
    os.precision(17);
    for (std::size_t i = 0; i < names.size(); ++i) os << names[i] << "," << y[i] << "\n";
    return os.str();
}

std::map<std::string, double> read_ic_csv(const std::string& text) {
    std::map<std::string, double> out;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (first) { first = false; continue; }
        auto comma = line.find(',');
        if (comma == std::string::npos)
            throw std::runtime_error("ic file: malformed line '" + line + "'");
        out[line.substr(0, comma)] = std::stod(line.substr(comma + 1));
    }
    return out;
}

} // namespace emtdq

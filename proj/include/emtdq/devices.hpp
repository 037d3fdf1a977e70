#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>

namespace emtdq {

// Network-frame (RI) pair. The rotating-frame cross terms follow the
// convention that the R-row picks up +X*i_I and the I-row -X*i_R.
template <class T>
struct RI {
    T re{}, im{};
};

template <class T> RI<T> operator+(RI<T> a, RI<T> b) { return {a.re + b.re, a.im + b.im}; }
template <class T> RI<T> operator-(RI<T> a, RI<T> b) { return {a.re - b.re, a.im - b.im}; }

// --- Parameter records ---------------------------------------------------

struct TransformerParams {
    double r1 = 0.0, x1 = 0.0; // primary leakage
    double r2 = 0.0, x2 = 0.0; // secondary leakage
    double r3 = 0.0, x3 = 0.0; // magnetizing branch
    void validate() const;
};

struct SauerPaiParams {
    double xd, xd_p, xd_pp;
    double xq, xq_p, xq_pp;
    double xl, ra;
    double td0_p, tq0_p, td0_pp, tq0_pp;
    double h, d;

    double gamma_d1() const { return (xd_pp - xl) / (xd_p - xl); }
    double gamma_q1() const { return (xq_pp - xl) / (xq_p - xl); }
    double gamma_d2() const { return (1.0 - gamma_d1()) / (xd_p - xl); }
    double gamma_q2() const { return (1.0 - gamma_q1()) / (xq_p - xl); }
    void validate() const;
};

struct AvrTypeIParams {
    double ka = 20.0, ta = 0.2;
    double ke = 1.0, te = 0.314;
    double kf = 0.063, tf = 0.35;
    double tr = 0.02;
    void validate() const;
};

struct GfmParams {
    double mp = 0.05, mq = 0.05;       // P-f and Q-V droop gains
    double kp_v = 0.59, ki_v = 736.0;  // voltage loop PI (current reference)
    double kp_c = 1.27, ki_c = 14.3;   // current loop PI (converter voltage)
    double rf = 0.005, xf = 0.15;      // filter choke
    double bc = 0.08;                  // filter capacitor susceptance
    double tp = 0.05, tq = 0.05;       // power measurement lags
    void validate() const;
};

struct LineParams {
    double r, x, b; // series R, X and total charging susceptance
    void validate() const;
};

struct LoadParams {
    double p, q; // pu demand used to size the series branch at 1.0 pu
    double r() const { return p / (p * p + q * q); }
    double x() const { return q / (p * p + q * q); }
    void validate() const;
};

// --- S1: transformer with magnetizing branch ------------------------------

// Closed-form magnetizing-node voltage plus the two winding current
// derivative pairs. Pure function; the denominator 1/X1 + 1/X2 + 1/X3 is
// positive by the parameter invariants.
template <class T>
struct TransformerReduced {
    RI<T> v3;
    RI<T> di1;
    RI<T> di2;
};

template <class T>
TransformerReduced<T> transformer_reduced_rhs(const TransformerParams& p,
                                              RI<T> v1, RI<T> v2,
                                              RI<T> i1, RI<T> i2, double w0) {
    const double den = 1.0 / p.x1 + 1.0 / p.x2 + 1.0 / p.x3;
    const double ci1 = p.r3 / p.x3 - p.r1 / p.x1;
    const double ci2 = p.r3 / p.x3 - p.r2 / p.x2;
    TransformerReduced<T> out;
    out.v3.re = (v1.re / p.x1 + v2.re / p.x2 + ci1 * i1.re - ci2 * i2.re) / den;
    out.v3.im = (v1.im / p.x1 + v2.im / p.x2 + ci1 * i1.im - ci2 * i2.im) / den;
    out.di1.re = (w0 / p.x1) * (v1.re - out.v3.re - p.r1 * i1.re + p.x1 * i1.im);
    out.di1.im = (w0 / p.x1) * (v1.im - out.v3.im - p.r1 * i1.im - p.x1 * i1.re);
    out.di2.re = (w0 / p.x2) * (out.v3.re - v2.re - p.r2 * i2.re + p.x2 * i2.im);
    out.di2.im = (w0 / p.x2) * (out.v3.im - v2.im - p.r2 * i2.im - p.x2 * i2.re);
    return out;
}

// Magnetizing current recovered from the retained KCL i3 = i1 - i2.
template <class T>
RI<T> transformer_magnetizing(RI<T> i1, RI<T> i2) {
    return i1 - i2;
}

// --- S1+S2: Sauer-Pai machine, dynamic stator, transformer ----------------

template <class T>
struct SgState {
    T delta, omega;
    T psi_d, psi_q;
    T ed_p, eq_p;     // transient emfs e'_d, e'_q
    T psi2_d, psi2_q; // damper-winding fluxes
    T vm, vr1, vr2, vf; // AVR
    RI<T> i2;         // transformer secondary current
};

template <class T>
struct InterfaceSolve {
    T phi_dq, phi_qd, theta;
    T beta_r, beta_i;
    T gam_d1, gam_q1;
    RI<T> v3, v1;
};

// Assembles the 4x4 tearing system over (v3, v1) and solves it with the
// Schur complement of the diagonal upper-left block. The machine-side
// derivative terms arrive through gam_*(e', psi'') and the exact chain
// rule contributes delta_dot = w0*(omega - 1) on the rotation terms.
template <class T>
InterfaceSolve<T> solve_interface_voltages(const SauerPaiParams& m,
                                           const TransformerParams& tp,
                                           T delta, T omega,
                                           T psi_d, T psi_q,
                                           T id, T iq,
                                           T ded_p, T deq_p,
                                           T dpsi2_d, T dpsi2_q,
                                           RI<T> i1, RI<T> i2, RI<T> i3,
                                           RI<T> v2, double w0) {
    using std::cos;
    using std::sin;
    InterfaceSolve<T> s;
    const T sd = sin(delta), cd = cos(delta);
    const double gd1 = m.gamma_d1(), gq1 = m.gamma_q1();

    s.gam_d1 = (gd1 * deq_p + (1.0 - gd1) * dpsi2_d) / w0;
    s.gam_q1 = (-gq1 * ded_p + (1.0 - gq1) * dpsi2_q) / w0;
    s.phi_dq = sd * sd / m.xd_pp + cd * cd / m.xq_pp;
    s.phi_qd = cd * cd / m.xd_pp + sd * sd / m.xq_pp;
    s.theta = (-1.0 / m.xd_pp + 1.0 / m.xq_pp) * sd * cd;

    const T ddelta = w0 * (omega - 1.0);
    const T gd = (w0 / m.xd_pp) * (s.gam_d1 - m.ra * id - omega * psi_q);
    const T gq = (w0 / m.xq_pp) * (s.gam_q1 - m.ra * iq + omega * psi_d);
    s.beta_r = ddelta * (id * cd - iq * sd) + sd * gd + cd * gq;
    s.beta_i = ddelta * (id * sd + iq * cd) - cd * gd + sd * gq;

    const double X1 = tp.x1, X2 = tp.x2, X3 = tp.x3;
    const T b1 = s.beta_r / w0 + (tp.r1 / X1) * i1.re - i1.im;
    const T b2 = s.beta_i / w0 + (tp.r1 / X1) * i1.im + i1.re;
    const T b3 = s.beta_r / w0 + v2.re / X2 + (tp.r2 / X2) * i2.re +
                 (tp.r3 / X3) * i3.re - i2.im - i3.im;
    const T b4 = s.beta_i / w0 + v2.im / X2 + (tp.r2 / X2) * i2.im +
                 (tp.r3 / X3) * i3.im + i2.re + i3.re;

    // Rows 1-2 give v3 in terms of v1; substitute into rows 3-4.
    const double alpha = 1.0 / X2 + 1.0 / X3;
    const double ax1 = alpha * X1;
    const T s11 = ax1 * (1.0 / X1 + s.phi_dq) + s.phi_dq;
    const T s12 = (ax1 + 1.0) * s.theta;
    const T s22 = ax1 * (1.0 / X1 + s.phi_qd) + s.phi_qd;
    const T r1 = b3 + ax1 * b1;
    const T r2 = b4 + ax1 * b2;
    const T det = s11 * s22 - s12 * s12;
    if (std::abs(det) < 1e-300)
        throw std::runtime_error("interface solve: singular Schur block");
    s.v1.re = (s22 * r1 - s12 * r2) / det;
    s.v1.im = (s11 * r2 - s12 * r1) / det;
    s.v3.re = X1 * ((1.0 / X1 + s.phi_dq) * s.v1.re + s.theta * s.v1.im - b1);
    s.v3.im = X1 * (s.theta * s.v1.re + (1.0 / X1 + s.phi_qd) * s.v1.im - b2);
    return s;
}

template <class T>
struct SgDerivs {
    SgState<T> dot;    // state derivatives (i2 slot holds di2)
    T id, iq;          // stator currents, machine frame
    RI<T> i1, i3;      // recovered transformer currents
    RI<T> v1, v3;      // interface voltages
    T te;              // electrical torque
};

template <class T>
SgDerivs<T> machine_transformer_reduced_rhs(const SauerPaiParams& m,
                                            const AvrTypeIParams& a,
                                            const TransformerParams& tp,
                                            const SgState<T>& s, RI<T> v2,
                                            double tau_m, double v_ref, double w0) {
    using std::cos;
    using std::sin;
    using std::sqrt;
    SgDerivs<T> o;
    const double gd1 = m.gamma_d1(), gq1 = m.gamma_q1();
    const double gd2 = m.gamma_d2(), gq2 = m.gamma_q2();
    const T sd = sin(s.delta), cd = cos(s.delta);

    o.id = (-s.psi_d + gd1 * s.eq_p + (1.0 - gd1) * s.psi2_d) / m.xd_pp;
    o.iq = (-s.psi_q - gq1 * s.ed_p + (1.0 - gq1) * s.psi2_q) / m.xq_pp;
    o.i1.re = o.id * sd + o.iq * cd;
    o.i1.im = -o.id * cd + o.iq * sd;
    o.i3 = o.i1 - s.i2;

    o.dot.eq_p = (-(m.xd - m.xd_p) * (gd1 * o.id - gd2 * s.psi2_d + gd2 * s.eq_p) -
                  s.eq_p + s.vf) / m.td0_p;
    o.dot.ed_p = ((m.xq - m.xq_p) * (gq1 * o.iq - gq2 * s.psi2_q - gq2 * s.ed_p) -
                  s.ed_p) / m.tq0_p;
    o.dot.psi2_d = (-s.psi2_d + s.eq_p - (m.xd_p - m.xl) * o.id) / m.td0_pp;
    o.dot.psi2_q = (-s.psi2_q - s.ed_p - (m.xq_p - m.xl) * o.iq) / m.tq0_pp;

    InterfaceSolve<T> iv = solve_interface_voltages(
        m, tp, s.delta, s.omega, s.psi_d, s.psi_q, o.id, o.iq,
        o.dot.ed_p, o.dot.eq_p, o.dot.psi2_d, o.dot.psi2_q,
        o.i1, s.i2, o.i3, v2, w0);
    o.v1 = iv.v1;
    o.v3 = iv.v3;

    const T vd = o.v1.re * sd - o.v1.im * cd;
    const T vq = o.v1.re * cd + o.v1.im * sd;
    o.dot.psi_d = w0 * (m.ra * o.id + s.omega * s.psi_q + vd);
    o.dot.psi_q = w0 * (m.ra * o.iq - s.omega * s.psi_d + vq);

    o.te = s.psi_d * o.iq - s.psi_q * o.id;
    o.dot.delta = w0 * (s.omega - 1.0);
    o.dot.omega = (tau_m - o.te - m.d * (s.omega - 1.0)) / (2.0 * m.h);

    const T vh = sqrt(o.v1.re * o.v1.re + o.v1.im * o.v1.im);
    o.dot.vm = (vh - s.vm) / a.tr;
    o.dot.vr1 = (a.ka * (v_ref - s.vm - s.vr2 - (a.kf / a.tf) * s.vf) - s.vr1) / a.ta;
    o.dot.vr2 = -((a.kf / a.tf) * s.vf + s.vr2) / a.tf;
    o.dot.vf = (s.vr1 - a.ke * s.vf) / a.te;

    o.dot.i2.re = (w0 / tp.x2) * (o.v3.re - v2.re - tp.r2 * s.i2.re + tp.x2 * s.i2.im);
    o.dot.i2.im = (w0 / tp.x2) * (o.v3.im - v2.im - tp.r2 * s.i2.im - tp.x2 * s.i2.re);
    return o;
}

// --- Grid-forming inverter ------------------------------------------------

template <class T>
struct GfmState {
    T delta_c;        // converter frame angle
    T pm, qm;         // filtered power measurements
    T xi_vd, xi_vq;   // voltage-loop integrators
    T xi_cd, xi_cq;   // current-loop integrators
    RI<T> i_f;        // filter choke current
};

template <class T>
struct GfmDerivs {
    GfmState<T> dot;
    RI<T> v_conv;   // modulated converter voltage, network frame
    T p, q;         // instantaneous measured power at the filter bus
};

// Droop GFM with the standard dual loop: P-f droop steers the frame, Q-V
// droop the voltage magnitude reference; the voltage PI commands a choke
// current, the current PI synthesizes the converter voltage with the usual
// decoupling terms. The current loop is what damps the LC resonance. The
// filter capacitor lives on the terminal bus.
template <class T>
GfmDerivs<T> gfm_rhs(const GfmParams& g, const GfmState<T>& s, RI<T> v_bus,
                     double p_ref, double q_ref, double v_set, double w0) {
    using std::cos;
    using std::sin;
    GfmDerivs<T> o;
    const T sd = sin(s.delta_c), cd = cos(s.delta_c);
    const T vo_d = v_bus.re * sd - v_bus.im * cd;
    const T vo_q = v_bus.re * cd + v_bus.im * sd;
    const T if_d = s.i_f.re * sd - s.i_f.im * cd;
    const T if_q = s.i_f.re * cd + s.i_f.im * sd;

    o.p = v_bus.re * s.i_f.re + v_bus.im * s.i_f.im;
    o.q = v_bus.im * s.i_f.re - v_bus.re * s.i_f.im;

    const T vref_d = v_set + g.mq * (q_ref - s.qm);
    const T ev_d = vref_d - vo_d;
    const T ev_q = -vo_q;
    const T iref_d = g.kp_v * ev_d + g.ki_v * s.xi_vd - g.bc * vo_q;
    const T iref_q = g.kp_v * ev_q + g.ki_v * s.xi_vq + g.bc * vo_d;
    const T ec_d = iref_d - if_d;
    const T ec_q = iref_q - if_q;
    const T vc_d = vo_d + g.kp_c * ec_d + g.ki_c * s.xi_cd - g.xf * if_q;
    const T vc_q = vo_q + g.kp_c * ec_q + g.ki_c * s.xi_cq + g.xf * if_d;
    o.v_conv.re = vc_d * sd + vc_q * cd;
    o.v_conv.im = -vc_d * cd + vc_q * sd;

    o.dot.delta_c = w0 * g.mp * (p_ref - s.pm);
    o.dot.pm = (o.p - s.pm) / g.tp;
    o.dot.qm = (o.q - s.qm) / g.tq;
    o.dot.xi_vd = ev_d;
    o.dot.xi_vq = ev_q;
    o.dot.xi_cd = ec_d;
    o.dot.xi_cq = ec_q;
    o.dot.i_f.re = (w0 / g.xf) * (o.v_conv.re - v_bus.re - g.rf * s.i_f.re + g.xf * s.i_f.im);
    o.dot.i_f.im = (w0 / g.xf) * (o.v_conv.im - v_bus.im - g.rf * s.i_f.im - g.xf * s.i_f.re);
    return o;
}

} // namespace emtdq

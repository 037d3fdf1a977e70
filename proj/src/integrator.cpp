#include "emtdq/integrator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace emtdq {

void Model::jacobian(double t, std::span<const double> y, Mat& J) const {
    const int n = size();
    J.resize(n, n);
    std::vector<double> yp(y.begin(), y.end());
    std::vector<double> f0(n), f1(n);
    rhs(t, yp, f0);
    const double sq = std::sqrt(std::numeric_limits<double>::epsilon());
    for (int j = 0; j < n; ++j) {
        double save = yp[j];
        double d = sq * (1.0 + std::abs(save));
        yp[j] = save + d;
        rhs(t, yp, f1);
        yp[j] = save;
        for (int i = 0; i < n; ++i) J(i, j) = (f1[i] - f0[i]) / d;
    }
}

void Model::time_partial(double t, std::span<const double> y,
                         std::span<double> ft) const {
    const int n = size();
    std::vector<double> f0(n), f1(n);
    const double d = std::cbrt(std::numeric_limits<double>::epsilon()) * (1.0 + std::abs(t));
    rhs(t - d, y, f0);
    rhs(t + d, y, f1);
    for (int i = 0; i < n; ++i) ft[i] = (f1[i] - f0[i]) / (2.0 * d);
}

DaeModel::DaeModel(std::shared_ptr<const SemiExplicitDae> sys) : sys_(std::move(sys)) {
    const_cast<SemiExplicitDae&>(*sys_).prepare_derivatives();
    for (VarId v : sys_->diff_vars()) names_.push_back(sys_->var_name(v));
    for (VarId v : sys_->alg_vars()) names_.push_back(sys_->var_name(v));
    ws_ = sys_->make_workspace();
}

void DaeModel::rhs(double t, std::span<const double> y, std::span<double> dy) const {
    const int nd = sys_->n_diff(), na = sys_->n_alg();
    sys_->load_point(t, y.subspan(0, nd), y.subspan(nd, na), ws_);
    for (int i = 0; i < nd; ++i) dy[i] = ws_.node_values[sys_->f_equations()[i]];
    for (int j = 0; j < na; ++j) dy[nd + j] = ws_.node_values[sys_->g_equations()[j]];
}

void DaeModel::jacobian(double t, std::span<const double> y, Mat& J) const {
    const int nd = sys_->n_diff(), na = sys_->n_alg();
    J = sys_->jacobian(t, y.subspan(0, nd), y.subspan(nd, na), ws_);
}

void DaeModel::time_partial(double t, std::span<const double> y,
                            std::span<double> ft) const {
    const int nd = sys_->n_diff(), na = sys_->n_alg();
    Vec v = sys_->time_partial(t, y.subspan(0, nd), y.subspan(nd, na), ws_);
    for (int i = 0; i < v.size(); ++i) ft[i] = v[i];
}

namespace {

// Rosenbrock 4(3), stiffly accurate, for M y' = f(t, y) with singular
// diagonal mass (Hairer & Wanner's RODAS coefficient set). Stage 6 doubles
// as the embedded error estimate.
struct RodasCoef {
    static constexpr double gamma = 0.25;
    static constexpr double c2 = 0.386, c3 = 0.21, c4 = 0.63;
    static constexpr double d1 = 0.25, d2 = -0.1043, d3 = 0.1035, d4 = -0.0362;
    static constexpr double a21 = 1.544;
    static constexpr double a31 = 0.9466785280815826, a32 = 0.2557011698983284;
    static constexpr double a41 = 3.314825187068521, a42 = 2.896124015972201,
                            a43 = 0.9986419139977817;
    static constexpr double a51 = 1.221224509226641, a52 = 6.019134481288629,
                            a53 = 12.53708332932087, a54 = -0.6878860361058950;
    static constexpr double c21 = -5.6688;
    static constexpr double c31 = -2.430093356833875, c32 = -0.2063599157091915;
    static constexpr double c41 = -0.1073529058151375, c42 = -9.594562251023355,
                            c43 = -20.47028614809616;
    static constexpr double c51 = 7.496443313967647, c52 = -10.24680431464352,
                            c53 = -33.99990352819905, c54 = 11.70890893206160;
    static constexpr double c61 = 8.083246795921522, c62 = -7.981132988064893,
                            c63 = -31.52159432874371, c64 = 16.31930543123136,
                            c65 = -6.058818238834054;
    static constexpr double d21 = 10.12623508344586, d22 = -7.487995877610167,
                            d23 = -34.80091861555747, d24 = -7.992771707568823,
                            d25 = 1.025137723295662;
    static constexpr double d31 = -0.6762803392801253, d32 = 6.087714651680015,
                            d33 = 16.43084320892478, d34 = 24.76722511418386,
                            d35 = -6.594389125716872;
};

struct Segment {
    double t0, t1;
};

} // namespace

Vec Trajectory::at(double time) const {
    if (t.empty()) throw std::runtime_error("trajectory: empty");
    const double lo = t.front(), hi = t.back();
    if (time < lo - 1e-12 || time > hi + 1e-12)
        throw std::out_of_range("trajectory: t out of range");
    time = std::clamp(time, lo, hi);
    // Exact node hits return the accepted values.
    auto it = std::lower_bound(t.begin(), t.end(), time);
    if (it != t.end() && *it == time) return y[it - t.begin()];
    std::size_t k = static_cast<std::size_t>(it - t.begin());
    if (k == 0) return y.front();
    --k; // interval [t_k, t_{k+1}]
    double h = t[k + 1] - t[k];
    double s = (time - t[k]) / h;
    return y[k] * (1.0 - s) + s * (y[k + 1] + (1.0 - s) * (cont2[k] + s * cont3[k]));
}

Trajectory integrate(const Model& model, const Vec& y0, double t0, double t1,
                     const IntegratorConfig& cfg,
                     const std::vector<EventSpec>& events) {
    using C = RodasCoef;
    if (cfg.order != 4)
        throw std::invalid_argument("integrator: only the order-4(3) pair is implemented");
    if (!(cfg.rtol > 0.0) || !(cfg.atol > 0.0))
        throw std::invalid_argument("integrator: tolerances must be positive");
    if (!(t1 >= t0)) throw std::invalid_argument("integrator: t_end < t_start");

    const int n = model.size();
    const int nd = model.n_diff();
    if (y0.size() != n) throw std::invalid_argument("integrator: state size mismatch");

    auto wall0 = std::chrono::steady_clock::now();

    Trajectory traj;
    traj.names = model.names();
    traj.n_differential = nd;
    traj.t.push_back(t0);
    traj.y.push_back(y0);

    // Consistency guard for DAE starts.
    {
        std::vector<double> f(n);
        model.rhs(t0, std::span<const double>(y0.data(), n), f);
        for (int i = nd; i < n; ++i)
            if (std::abs(f[i]) > 1e-3)
                throw std::runtime_error("integrator: inconsistent initial algebraic state, g[" +
                                         std::to_string(i - nd) + "]=" + std::to_string(f[i]));
    }

    // Segment per event inside the span.
    std::vector<Segment> segments;
    std::vector<const EventSpec*> seg_event;
    {
        std::vector<const EventSpec*> in_span;
        for (const auto& e : events)
            if (e.time > t0 && e.time < t1) in_span.push_back(&e);
        std::sort(in_span.begin(), in_span.end(),
                  [](auto* a, auto* b) { return a->time < b->time; });
        double cur = t0;
        for (auto* e : in_span) {
            segments.push_back({cur, e->time});
            seg_event.push_back(e);
            cur = e->time;
        }
        segments.push_back({cur, t1});
        seg_event.push_back(nullptr);
    }

    if (t1 == t0) return traj;

    Vec y = y0;
    Mat J(n, n), E(n, n);
    Vec f0(n), ft(n), k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), ytmp(n), rhs(n);
    auto& st = traj.stats;

    auto mass_combo = [&](const Vec& v) {
        Vec r = v;
        r.tail(n - nd).setZero();
        return r;
    };

    double h = std::min(cfg.initial_step, cfg.max_step);

    for (std::size_t seg = 0; seg < segments.size(); ++seg) {
        double t = segments[seg].t0;
        const double tend = segments[seg].t1;
        if (seg > 0) h = std::min(cfg.initial_step, cfg.max_step); // restart after event

        while (t < tend) {
            h = std::min({h, cfg.max_step, tend - t});
            if (h < 1e-14 * std::max(1.0, std::abs(t))) {
                int dom = 0;
                throw StepFailure("integrator: step size underflow at t=" + std::to_string(t),
                                  t, dom);
            }

            std::span<const double> ys(y.data(), n);
            model.rhs(t, ys, std::span<double>(f0.data(), n));
            model.time_partial(t, ys, std::span<double>(ft.data(), n));
            model.jacobian(t, ys, J);
            ++st.jac_evals;
            st.rhs_evals += 2;

            bool step_done = false;
            int lin_retries = 0;
            while (!step_done) {
                // E = M/(h*gamma) - J with M = diag(1...1, 0...0)
                E = -J;
                for (int i = 0; i < nd; ++i) E(i, i) += 1.0 / (h * C::gamma);
                Eigen::PartialPivLU<Mat> lu(E);
                ++st.lu_decomps;

                auto solve_stage = [&](const Vec& r, Vec& k) -> bool {
                    k = lu.solve(r);
                    return k.allFinite();
                };

                bool ok = true;
                rhs = f0 + (h * C::d1) * ft;
                ok = ok && solve_stage(rhs, k1);

                if (ok) {
                    ytmp = y + C::a21 * k1;
                    model.rhs(t + C::c2 * h, std::span<const double>(ytmp.data(), n),
                              std::span<double>(rhs.data(), n));
                    ++st.rhs_evals;
                    rhs += (h * C::d2) * ft + mass_combo(C::c21 * k1) / h;
                    ok = solve_stage(rhs, k2);
                }
                if (ok) {
                    ytmp = y + C::a31 * k1 + C::a32 * k2;
                    model.rhs(t + C::c3 * h, std::span<const double>(ytmp.data(), n),
                              std::span<double>(rhs.data(), n));
                    ++st.rhs_evals;
                    rhs += (h * C::d3) * ft + mass_combo(C::c31 * k1 + C::c32 * k2) / h;
                    ok = solve_stage(rhs, k3);
                }
                if (ok) {
                    ytmp = y + C::a41 * k1 + C::a42 * k2 + C::a43 * k3;
                    model.rhs(t + C::c4 * h, std::span<const double>(ytmp.data(), n),
                              std::span<double>(rhs.data(), n));
                    ++st.rhs_evals;
                    rhs += (h * C::d4) * ft +
                           mass_combo(C::c41 * k1 + C::c42 * k2 + C::c43 * k3) / h;
                    ok = solve_stage(rhs, k4);
                }
                Vec y5(n), y6(n);
                if (ok) {
                    y5 = y + C::a51 * k1 + C::a52 * k2 + C::a53 * k3 + C::a54 * k4;
                    model.rhs(t + h, std::span<const double>(y5.data(), n),
                              std::span<double>(rhs.data(), n));
                    ++st.rhs_evals;
                    rhs += mass_combo(C::c51 * k1 + C::c52 * k2 + C::c53 * k3 + C::c54 * k4) / h;
                    ok = solve_stage(rhs, k5);
                }
                if (ok) {
                    y6 = y5 + k5;
                    model.rhs(t + h, std::span<const double>(y6.data(), n),
                              std::span<double>(rhs.data(), n));
                    ++st.rhs_evals;
                    rhs += mass_combo(C::c61 * k1 + C::c62 * k2 + C::c63 * k3 + C::c64 * k4 +
                                      C::c65 * k5) / h;
                    ok = solve_stage(rhs, k6);
                }

                if (!ok) {
                    if (++lin_retries > 12)
                        throw StepFailure("integrator: linear solve failure at t=" +
                                          std::to_string(t), t, 0);
                    h *= 0.5;
                    continue;
                }

                Vec ynew = y6 + k6;
                double err = 0.0;
                int dom = 0;
                double dommax = 0.0;
                for (int i = 0; i < n; ++i) {
                    double sk = cfg.atol + cfg.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
                    double e = k6[i] / sk;
                    err += e * e;
                    if (std::abs(e) > dommax) { dommax = std::abs(e); dom = i; }
                }
                err = std::sqrt(err / n);
                if (!std::isfinite(err)) err = 1e10;

                double fac = std::clamp(0.9 * std::pow(err, -0.25), 0.2, 6.0);
                if (err <= 1.0) {
                    traj.t.push_back(t + h);
                    traj.y.push_back(ynew);
                    traj.cont2.push_back(C::d21 * k1 + C::d22 * k2 + C::d23 * k3 +
                                         C::d24 * k4 + C::d25 * k5);
                    traj.cont3.push_back(C::d31 * k1 + C::d32 * k2 + C::d33 * k3 +
                                         C::d34 * k4 + C::d35 * k5);
                    t += h;
                    y = ynew;
                    ++st.accepted;
                    h *= fac;
                    step_done = true;
                } else {
                    ++st.rejected;
                    h *= std::min(fac, 0.9);
                    if (h < 1e-14 * std::max(1.0, std::abs(t)))
                        throw StepFailure("integrator: step size underflow at t=" +
                                              std::to_string(t) + " (dominant component " +
                                              model.names()[dom] + ")",
                                          t, dom);
                    break; // refresh Jacobian at the same t
                }
            }
        }
        if (seg_event[seg]) {
            traj.events.emplace_back(seg_event[seg]->time, seg_event[seg]->description);
            if (seg_event[seg]->action) seg_event[seg]->action();
        }
    }

    traj.stats.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    return traj;
}

NewtonMatrixProbe newton_iteration_matrix(const SemiExplicitDae& sys, double t,
                                          std::span<const double> x,
                                          std::span<const double> z,
                                          double h, int k) {
    if (k < 1 || k > 5) throw std::invalid_argument("newton matrix: k in 1..5 required");
    if (!(h > 0.0)) throw std::invalid_argument("newton matrix: h must be positive");

    static const std::vector<std::vector<double>> bdf = {
        {1.0, -1.0},
        {1.5, -2.0, 0.5},
        {11.0 / 6.0, -3.0, 1.5, -1.0 / 3.0},
        {25.0 / 12.0, -4.0, 3.0, -4.0 / 3.0, 0.25},
        {137.0 / 60.0, -5.0, 5.0, -10.0 / 3.0, 1.25, -0.2},
    };

    NewtonMatrixProbe p;
    p.h = h;
    p.k = k;
    p.alpha = bdf[k - 1];

    const_cast<SemiExplicitDae&>(sys).prepare_derivatives();
    auto ws = sys.make_workspace();
    Mat J = sys.jacobian(t, x, z, ws);
    const int nd = sys.n_diff(), na = sys.n_alg();
    p.matrix = Mat::Zero(nd + na, nd + na);
    p.matrix.topLeftCorner(nd, nd) = -h * J.topLeftCorner(nd, nd);
    for (int i = 0; i < nd; ++i) p.matrix(i, i) += p.alpha[0];
    p.matrix.topRightCorner(nd, na) = -h * J.topRightCorner(nd, na);
    p.matrix.bottomLeftCorner(na, nd) = J.bottomLeftCorner(na, nd);
    p.matrix.bottomRightCorner(na, na) = J.bottomRightCorner(na, na);
    p.cond = cond1(p.matrix);
    return p;
}

ConditioningSweep conditioning_sweep(const SemiExplicitDae& sys, double t,
                                     std::span<const double> x,
                                     std::span<const double> z,
                                     std::span<const double> h_grid, int k) {
    ConditioningSweep out;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (double h : h_grid) {
        NewtonMatrixProbe p = newton_iteration_matrix(sys, t, x, z, h, k);
        out.rows.push_back({h, p.cond});
        if (std::isfinite(p.cond) && p.cond > 0) {
            double lx = std::log10(h), ly = std::log10(p.cond);
            sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
            ++n;
        }
    }
    if (n >= 2) out.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return out;
}

} // namespace emtdq

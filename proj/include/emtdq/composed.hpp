#pragma once

#include <complex>
#include <map>
#include <memory>

#include "emtdq/builder.hpp"
#include "emtdq/model.hpp"

namespace emtdq {

// Block-composed ODE over the hand-derived reduced subsystem models: no
// algebraic variables remain. Machine+transformer pairs collapse into one
// block (S1+S2); remaining transformers use the closed-form magnetizing
// voltage (S1); every surviving bus carries shunt capacitance.
class ComposedModel : public Model {
public:
    static std::shared_ptr<ComposedModel> build(const NetworkCase& c);

    int size() const override { return static_cast<int>(names_.size()); }
    int n_diff() const override { return size(); }
    const std::vector<std::string>& names() const override { return names_; }

    void rhs(double t, std::span<const double> y, std::span<double> dy) const override;
    void jacobian(double t, std::span<const double> y, Mat& J) const override;
    void time_partial(double t, std::span<const double> y,
                      std::span<double> ft) const override;

    void refine_jacobian(double t, std::span<const double> y, Mat& J) const override {
        J = state_matrix(t, Eigen::Map<const Vec>(y.data(), y.size()));
    }

    // Exact state matrix by complex-step differentiation.
    Mat state_matrix(double t, const Vec& y) const;

    int index_of(const std::string& name) const; // -1 when absent

    // Recovered interface quantities (v1/v3 of machine blocks, v3 of plain
    // transformer blocks, i1/i3 recoveries) keyed by raw-system names.
    std::map<std::string, double> interface_values(double t,
                                                   std::span<const double> y) const;

    // Infinity norms of the retained KCL identities recomputed from states.
    struct ConstraintResiduals {
        double magnetizing = 0.0;
        double stator = 0.0;
    };
    ConstraintResiduals constraint_residuals(double t, std::span<const double> y) const;

    const NetworkCase& network_case() const { return case_; }

private:
    template <class T>
    void rhs_impl(double t, const T* y, T* dy) const;

    struct BusW { int st; double b; };
    struct LineW { int st, from, to; LineParams p; };        // from/to: bus slots
    struct XfmrW { int st, from, to; TransformerParams p; std::string name; };
    struct LoadW { int st, bus; double r, x, step_time, step_fraction; };
    struct SgW {
        int st, to;
        SauerPaiParams m;
        AvrTypeIParams a;
        TransformerParams tp;
        double tau_m, v_ref;
        std::string name, xfmr_name, bus_name;
    };
    struct GfmW { int st, bus; GfmParams p; double p_ref, q_ref, v_set_op; };
    struct RlbW { int st, from, to; double r, x; }; // to == -1 means ground

    NetworkCase case_;
    double w0_ = 0.0;
    std::vector<std::string> names_;
    std::vector<BusW> buses_;
    std::vector<LineW> lines_;
    std::vector<XfmrW> xfmrs_;
    std::vector<LoadW> loads_;
    std::vector<SgW> sgs_;
    std::vector<GfmW> gfms_;
    std::vector<RlbW> rlbs_;
    std::map<std::string, int> index_;

    // Structural sparsity and column groups for the finite-difference
    // Jacobian used during integration.
    std::vector<std::vector<int>> rows_of_col_;
    std::vector<std::vector<int>> color_groups_;
    void build_sparsity();
};

} // namespace emtdq

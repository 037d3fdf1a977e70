#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <thread>

#include "emtdq/expr.hpp"

using namespace emtdq;

TEST_CASE("hash consing returns the same id for identical structure") {
    ExpressionGraph g;
    VarId x = g.add_variable("x", VarKind::Differential);
    NodeId a = g.add(g.var(x), g.var(x));
    NodeId b = g.add(g.var(x), g.var(x));
    CHECK(a == b);
    std::size_t before = g.node_count();
    NodeId c = g.add(g.var(x), g.var(x));
    CHECK(c == a);
    CHECK(g.node_count() == before);
}

TEST_CASE("children precede parents") {
    ExpressionGraph g;
    VarId x = g.add_variable("x", VarKind::Differential);
    NodeId n = g.mul(g.sin(g.var(x)), g.add(g.var(x), g.constant(2.0)));
    CHECK(g.node(n).a < n);
    CHECK(g.node(n).b < n);
}

TEST_CASE("neg of zero evaluates to zero") {
    ExpressionGraph g;
    NodeId n = g.neg(g.constant(0.0));
    Valuation v;
    CHECK(g.evaluate(n, v) == 0.0);
}

TEST_CASE("kcl residual node evaluates the current balance") {
    ExpressionGraph g;
    VarId i1 = g.add_variable("i1R", VarKind::Differential);
    VarId i2 = g.add_variable("i2R", VarKind::Differential);
    VarId i3 = g.add_variable("i3R", VarKind::Differential);
    NodeId kcl = g.sub(g.var(i1), g.add(g.var(i2), g.var(i3)));
    CHECK(g.dump(kcl) == "(sub i1R (add i2R i3R))");
    Valuation v;
    v.set(i1, 1.0);
    v.set(i2, 0.4);
    v.set(i3, 0.6);
    CHECK(g.evaluate(kcl, v) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("sin at zero, division by zero reporting, missing valuation") {
    ExpressionGraph g;
    VarId d = g.add_variable("delta", VarKind::Differential);
    Valuation v;
    v.set(d, 0.0);
    CHECK(g.evaluate(g.sin(g.var(d)), v) == 0.0);
    NodeId bad = g.div(g.constant(1.0), g.var(d));
    CHECK_THROWS_WITH_AS(g.evaluate(bad, v), doctest::Contains("division by zero"),
                         std::runtime_error);
    Valuation empty;
    CHECK_THROWS_AS(g.evaluate(g.var(d), empty), std::runtime_error);
}

TEST_CASE("d-axis inductor residual matches the hand-coded closed form") {
    // (w0/x) * (vd - r*id + x*iq) against direct arithmetic
    ExpressionGraph g;
    VarId vd = g.add_variable("vd", VarKind::Differential);
    VarId id = g.add_variable("id", VarKind::Differential);
    VarId iq = g.add_variable("iq", VarKind::Differential);
    const double w0 = 376.99111843077515, x = 0.085, r = 0.01;
    NodeId f = g.mul(g.constant(w0 / x),
                     g.add(g.sub(g.var(vd), g.mul(g.constant(r), g.var(id))),
                           g.mul(g.constant(x), g.var(iq))));
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int k = 0; k < 50; ++k) {
        double a = u(rng), b = u(rng), c = u(rng);
        Valuation v;
        v.set(vd, a);
        v.set(id, b);
        v.set(iq, c);
        double expect = (w0 / x) * (a - r * b + x * c);
        double got = g.evaluate(f, v);
        CHECK(std::abs(got - expect) <= 1e-15 * std::max(1.0, std::abs(expect)));
    }
}

TEST_CASE("time differentiation: chain rule basics") {
    ExpressionGraph g;
    VarId d = g.add_variable("delta", VarKind::Differential);
    std::unordered_map<VarId, NodeId> bind{{d, g.deriv(d)}};
    NodeId dn = g.differentiate_time(g.sin(g.var(d)), bind);
    Valuation v;
    v.set(d, 0.7);
    v.set_deriv(d, 1.3);
    CHECK(g.evaluate(dn, v) == doctest::Approx(std::cos(0.7) * 1.3).epsilon(1e-14));
}

TEST_CASE("time differentiation of the kcl gives xdot form") {
    ExpressionGraph g;
    VarId i1 = g.add_variable("i1", VarKind::Differential);
    VarId i2 = g.add_variable("i2", VarKind::Differential);
    VarId i3 = g.add_variable("i3", VarKind::Differential);
    NodeId kcl = g.sub(g.sub(g.var(i1), g.var(i2)), g.var(i3));
    std::unordered_map<VarId, NodeId> bind;
    for (VarId v : {i1, i2, i3}) bind[v] = g.deriv(v);
    NodeId h = g.differentiate_time(kcl, bind);
    Valuation v;
    v.set_deriv(i1, 3.0);
    v.set_deriv(i2, 1.0);
    v.set_deriv(i3, 2.0);
    CHECK(g.evaluate(h, v) == doctest::Approx(0.0));
    CHECK(g.dump(h) == "(sub (sub (ddt i1) (ddt i2)) (ddt i3))");
}

TEST_CASE("unbound variable in time differentiation is an error") {
    ExpressionGraph g;
    VarId a = g.add_variable("a", VarKind::Differential);
    VarId b = g.add_variable("b", VarKind::Differential);
    std::unordered_map<VarId, NodeId> bind{{a, g.deriv(a)}};
    CHECK_THROWS_WITH_AS(g.differentiate_time(g.mul(g.var(a), g.var(b)), bind),
                         doctest::Contains("unbound"), std::runtime_error);
}

namespace {

// Random DAG generator for the AD-vs-FD property.
struct RandomDag {
    ExpressionGraph g;
    std::vector<VarId> vars;
    std::mt19937 rng;
    explicit RandomDag(unsigned seed) : rng(seed) {
        for (int i = 0; i < 4; ++i)
            vars.push_back(g.add_variable("v" + std::to_string(i), VarKind::Differential));
    }
    NodeId build(int depth) {
        std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 7);
        std::uniform_real_distribution<double> cv(-2.0, 2.0);
        std::uniform_int_distribution<std::size_t> vi(0, vars.size() - 1);
        switch (pick(rng)) {
            case 0: return g.constant(cv(rng));
            case 1: return g.var(vars[vi(rng)]);
            case 2: return g.add(build(depth - 1), build(depth - 1));
            case 3: return g.sub(build(depth - 1), build(depth - 1));
            case 4: return g.mul(build(depth - 1), build(depth - 1));
            case 5: return g.neg(build(depth - 1));
            case 6: return g.sin(build(depth - 1));
            default: return g.cos(build(depth - 1));
        }
    }
};

} // namespace

TEST_CASE("property: time derivative matches finite differences along a path") {
    // x_i(t) = base_i + slope_i * t, compare AD against central differences.
    for (unsigned seed = 1; seed <= 25; ++seed) {
        RandomDag rd(seed);
        NodeId e = rd.build(8);
        std::mt19937 rng(seed * 77);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        std::vector<double> base(rd.vars.size()), slope(rd.vars.size());
        for (std::size_t i = 0; i < rd.vars.size(); ++i) {
            base[i] = u(rng);
            slope[i] = u(rng);
        }
        std::unordered_map<VarId, NodeId> bind;
        for (std::size_t i = 0; i < rd.vars.size(); ++i)
            bind[rd.vars[i]] = rd.g.constant(slope[i]);
        NodeId de = rd.g.differentiate_time(e, bind);

        auto value_at = [&](double t) {
            Valuation v;
            for (std::size_t i = 0; i < rd.vars.size(); ++i)
                v.set(rd.vars[i], base[i] + slope[i] * t);
            return rd.g.evaluate(e, v);
        };
        Valuation v0;
        for (std::size_t i = 0; i < rd.vars.size(); ++i) v0.set(rd.vars[i], base[i]);
        double ad = rd.g.evaluate(de, v0);
        const double h = 1e-6;
        double fd = (value_at(h) - value_at(-h)) / (2 * h);
        CHECK(std::abs(ad - fd) / std::max(1.0, std::abs(ad)) <= 1e-6);
    }
}

TEST_CASE("linear form extraction on the kcl and rotation shapes") {
    ExpressionGraph g;
    VarId i1 = g.add_variable("i1", VarKind::Differential);
    VarId i2 = g.add_variable("i2", VarKind::Differential);
    VarId i3 = g.add_variable("i3", VarKind::Differential);
    VarId d = g.add_variable("delta", VarKind::Differential);
    VarId id = g.add_variable("id", VarKind::Algebraic);

    SUBCASE("kcl is linear with coefficients 1,-1,-1") {
        NodeId kcl = g.sub(g.sub(g.var(i1), g.var(i2)), g.var(i3));
        VarId over[3] = {i1, i2, i3};
        auto lf = g.extract_linear_form(kcl, over);
        REQUIRE(lf.has_value());
        Valuation v;
        CHECK(g.evaluate(lf->coefficients[0], v) == 1.0);
        CHECK(g.evaluate(lf->coefficients[1], v) == -1.0);
        CHECK(g.evaluate(lf->coefficients[2], v) == -1.0);
        CHECK(g.evaluate(lf->remainder, v) == 0.0);
    }
    SUBCASE("sin(delta)*id is affine in id with coefficient sin(delta)") {
        NodeId e = g.mul(g.sin(g.var(d)), g.var(id));
        VarId over[1] = {id};
        auto lf = g.extract_linear_form(e, over);
        REQUIRE(lf.has_value());
        Valuation v;
        v.set(d, 0.4);
        CHECK(g.evaluate(lf->coefficients[0], v) == doctest::Approx(std::sin(0.4)));
        CHECK(g.evaluate(lf->remainder, v) == 0.0);
    }
    SUBCASE("sin(delta)*delta is not affine in delta") {
        NodeId e = g.mul(g.sin(g.var(d)), g.var(d));
        VarId over[1] = {d};
        CHECK_FALSE(g.extract_linear_form(e, over).has_value());
    }
}

TEST_CASE("property: linear form reconstructs the expression") {
    for (unsigned seed = 30; seed < 45; ++seed) {
        RandomDag rd(seed);
        // affine combination: sum coeff_i(v2,v3) * v_i + remainder(v2,v3)
        NodeId e = rd.g.add(
            rd.g.add(rd.g.mul(rd.g.sin(rd.g.var(rd.vars[2])), rd.g.var(rd.vars[0])),
                     rd.g.mul(rd.g.constant(1.7), rd.g.var(rd.vars[1]))),
            rd.g.cos(rd.g.var(rd.vars[3])));
        VarId over[2] = {rd.vars[0], rd.vars[1]};
        auto lf = rd.g.extract_linear_form(e, over);
        REQUIRE(lf.has_value());
        std::mt19937 rng(seed);
        std::uniform_real_distribution<double> u(-3.0, 3.0);
        for (int k = 0; k < 100; ++k) {
            Valuation v;
            for (VarId x : rd.vars) v.set(x, u(rng));
            double direct = rd.g.evaluate(e, v);
            double recon = rd.g.evaluate(lf->coefficients[0], v) * v.get(rd.vars[0]) +
                           rd.g.evaluate(lf->coefficients[1], v) * v.get(rd.vars[1]) +
                           rd.g.evaluate(lf->remainder, v);
            CHECK(std::abs(direct - recon) <= 1e-12 * std::max(1.0, std::abs(direct)));
        }
    }
}

TEST_CASE("substitution rebuilds with dedup") {
    ExpressionGraph g;
    VarId x = g.add_variable("x", VarKind::Algebraic);
    VarId y = g.add_variable("y", VarKind::Differential);
    NodeId e = g.add(g.mul(g.constant(2.0), g.var(x)), g.var(y));
    std::unordered_map<VarId, NodeId> map{{x, g.mul(g.constant(3.0), g.var(y))}};
    NodeId s = g.substitute(e, map);
    Valuation v;
    v.set(y, 1.5);
    CHECK(g.evaluate(s, v) == doctest::Approx(2.0 * 3.0 * 1.5 + 1.5));
    CHECK(g.substitute(e, map) == s);
}

TEST_CASE("arity and child validation") {
    ExpressionGraph g;
    NodeId one = g.constant(1.0);
    NodeId ch[1] = {one};
    CHECK_THROWS_AS(g.add_expression(Op::Add, std::span<const NodeId>(ch, 1)),
                    std::invalid_argument);
    CHECK_THROWS_AS(g.add(one, 999), std::out_of_range);
    VarId z = g.add_variable("z", VarKind::Algebraic);
    CHECK_THROWS_AS(g.deriv(z), std::invalid_argument); // algebraic has no derivative-ref
}

TEST_CASE("concurrent read-only evaluation is safe") {
    ExpressionGraph g;
    VarId x = g.add_variable("x", VarKind::Differential);
    NodeId e = g.mul(g.sin(g.var(x)), g.add(g.var(x), g.constant(1.0)));
    std::vector<std::thread> pool;
    std::atomic<int> failures{0};
    for (int t = 0; t < 4; ++t) {
        pool.emplace_back([&, t] {
            for (int k = 0; k < 2000; ++k) {
                double xv = 0.1 * t + 1e-3 * k;
                Valuation v;
                v.set(x, xv);
                double expect = std::sin(xv) * (xv + 1.0);
                if (std::abs(g.evaluate(e, v) - expect) > 1e-14) ++failures;
            }
        });
    }
    for (auto& th : pool) th.join();
    CHECK(failures == 0);
}

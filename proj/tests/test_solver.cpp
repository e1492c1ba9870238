#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "qmfg/solver.hpp"

#include <cmath>
#include <vector>

using namespace qmfg;

namespace {

ModelParams with_q(ModelParams p, double q) {
    p.q = q;
    return p;
}

// Parameter sets every structural property is checked against.
std::vector<ModelParams> test_matrix() {
    std::vector<ModelParams> out{short_horizon_scenario(), unit_horizon_scenario()};
    ModelParams neg = short_horizon_scenario();
    neg.mu0 = -0.7;
    neg.a = 0.4;
    neg.alpha = QuantileLevel(0.1);
    out.push_back(neg);
    ModelParams flat;
    flat.a = 0.0;
    flat.b = 1.3;
    flat.r = 0.8;
    flat.sigma = 0.5;
    flat.q = 0.2;
    flat.alpha = QuantileLevel(0.6);
    flat.mu0 = 0.3;
    flat.V0 = 0.1;
    flat.T = 0.5;
    out.push_back(flat);
    return out;
}

double pi_residual(const CoupledSolution& s, const ModelParams& p) {
    const double g = p.gain();
    return oracle::residual(
        s.pi, [&](std::size_t k, double y) { return 2 * p.a * y - g * y * y + s.q_alpha[k]; }, -1.0);
}

double v_residual(const CoupledSolution& s, const ModelParams& p) {
    const double g = p.gain();
    return oracle::residual(
        s.variance, [&](std::size_t k, double y) { return 2 * (p.a - g * s.pi[k]) * y + p.sigma * p.sigma; }, 1.0);
}

double s_residual(const CoupledSolution& s, const ModelParams& p) {
    const double g = p.gain();
    return oracle::residual(
        s.offset, [&](std::size_t k, double y) { return (p.a - g * s.pi[k]) * y - s.q_alpha[k] * s.mean[k]; },
        -1.0);
}

}  // namespace

TEST_SUITE("closed-form paths") {
    TEST_CASE("mean path") {
        const TimeGrid g(0.2, 2000);
        const ScalarPath zero = mean_path(unit_horizon_scenario(), TimeGrid(1.0, 100));
        for (double v : zero.values()) CHECK(v == 0.0);
        ModelParams flat;
        flat.mu0 = 3.0;
        const ScalarPath three = mean_path(flat, g);
        for (double v : three.values()) CHECK(v == 3.0);
        CHECK(std::abs(mean_path(short_horizon_scenario(), g).back() - 0.970446) < 1e-6);
        CHECK(std::abs(mean_path(short_horizon_scenario(), g).back() - std::exp(-0.03)) <= 1e-12);
    }
    TEST_CASE("quantile coefficient") {
        const TimeGrid g(1.0, 10);
        const ScalarPath zero = ScalarPath::constant(g, 0.0);
        const ScalarPath one = ScalarPath::constant(g, 1.0);
        ModelParams p;
        p.q = 0.0;
        p.alpha = QuantileLevel(0.9);
        const ScalarPath none = q_path(one, one, p);
        for (double v : none.values()) CHECK(v == 0.0);
        p.q = 1.0;
        const ScalarPath two = q_path(zero, zero, p);
        for (double v : two.values()) CHECK(v == 2.0);
        p.alpha = QuantileLevel(0.95);
        const double ref = 1.0 + std::exp(static_cast<double>(oracle::bisect_probit(0.95L)));
        CHECK(std::abs(ref - 6.180252) < 1e-6);
        const ScalarPath coupled = q_path(zero, one, p);
        for (double v : coupled.values()) CHECK(std::abs(v - ref) < 1e-12);
    }
    TEST_CASE("negative variance: roundoff clamps, larger values throw") {
        const TimeGrid g(1.0, 2);
        ModelParams p;
        p.q = 1.0;
        const ScalarPath mean = ScalarPath::constant(g, 0.0);
        const ScalarPath tiny(g, {0.0, -1e-13, 0.0});
        CHECK(q_path(mean, tiny, p)[1] == 2.0);
        const ScalarPath bad(g, {0.0, -1e-9, 0.0});
        CHECK_THROWS_AS(q_path(mean, bad, p), DomainError);
    }
}

TEST_SUITE("sweeps") {
    TEST_CASE("riccati examples") {
        ModelParams p;
        const TimeGrid g(1.0, 2000);
        const ScalarPath flat = riccati_backward(ScalarPath::constant(g, 0.0), p);
        for (double v : flat.values()) CHECK(v == 0.0);
        const ScalarPath pi = riccati_backward(ScalarPath::constant(g, 1.0), p);
        CHECK(pi.back() == 0.0);
        CHECK(std::abs(pi.front() - std::tanh(1.0)) <= 1e-6);
        for (std::size_t k = 0; k < g.n_nodes(); ++k) CHECK(std::abs(pi[k] - std::tanh(1.0 - g.node(k))) <= 1e-9);
    }
    TEST_CASE("variance examples") {
        const TimeGrid g(1.0, 1000);
        ModelParams p;
        p.sigma = 1.0;
        const ScalarPath zero = ScalarPath::constant(g, 0.0);
        const ScalarPath v = variance_forward(zero, p);
        for (std::size_t k = 0; k < g.n_nodes(); ++k) CHECK(std::abs(v[k] - g.node(k)) <= 1e-12);
        p.a = 0.5;
        p.sigma = 0.0;
        p.V0 = 1.0;
        CHECK(std::abs(variance_forward(zero, p).back() - std::exp(1.0)) <= 1e-8);
    }
    TEST_CASE("offset examples") {
        const TimeGrid g(1.0, 1000);
        ModelParams p;
        const ScalarPath zero = ScalarPath::constant(g, 0.0);
        const ScalarPath one = ScalarPath::constant(g, 1.0);
        const ScalarPath no_mean = offset_backward(zero, one, zero, p);
        const ScalarPath no_weight = offset_backward(zero, zero, one, p);
        for (double v : no_mean.values()) CHECK(v == 0.0);
        for (double v : no_weight.values()) CHECK(v == 0.0);
        // -s' = -1, s(1) = 0 gives s(t) = t - 1.
        const ScalarPath s = offset_backward(zero, one, one, p);
        CHECK(std::abs(s.front() + 1.0) <= 1e-6);
        // With drift 0.3: s(t) = (1 - e^{0.3(1-t)}) / 0.3.
        p.a = 0.3;
        const ScalarPath s3 = offset_backward(zero, one, one, p);
        CHECK(std::abs(s3.front() - (1.0 - std::exp(0.3)) / 0.3) <= 1e-10);
    }
}

TEST_SUITE("fixed point") {
    TEST_CASE("no coupling when q = 0") {
        ModelParams p = with_q(short_horizon_scenario(), 0.0);
        const auto sol = solve_fixed_point(p, SolverConfig::for_horizon(p.T));
        CHECK(sol.converged);
        CHECK(sol.iterations <= 2);
        const TimeGrid& g = sol.grid();
        const double s2 = p.sigma * p.sigma;
        for (std::size_t k = 0; k < g.n_nodes(); ++k) {
            CHECK(sol.pi[k] == 0.0);
            CHECK(sol.offset[k] == 0.0);
            const double e = std::exp(2 * p.a * g.node(k));
            CHECK(std::abs(sol.variance[k] - (e * p.V0 + s2 * (e - 1) / (2 * p.a))) <= 1e-12);
        }
    }
    TEST_CASE("short-horizon scenario converges and is grid independent") {
        const ModelParams p = short_horizon_scenario();
        const auto sol = solve_fixed_point(p, SolverConfig::for_horizon(p.T, 2000));
        const auto fine = solve_fixed_point(p, SolverConfig::for_horizon(p.T, 4000));
        REQUIRE(sol.converged);
        CHECK(sol.final_update_norm <= 1e-10);
        CHECK(sol.iterations <= 200);
        CHECK(std::abs(sol.pi.front() - fine.pi.front()) <= 1e-6);
        CHECK(std::abs(sol.variance.back() - fine.variance.back()) <= 1e-6);
        CHECK(std::abs(sol.offset.front() - fine.offset.front()) <= 1e-6);
        double sup = 0.0;
        for (std::size_t k = 0; k < sol.grid().n_nodes(); ++k) sup = std::max(sup, std::abs(sol.pi[k] - fine.pi[2 * k]));
        CHECK(sup <= 1e-6);
    }
    TEST_CASE("unit-horizon scenario converges with pure Picard") {
        const ModelParams p = unit_horizon_scenario();
        const auto sol = solve_fixed_point(p, SolverConfig::for_horizon(p.T));
        CHECK(sol.converged);
        CHECK(sol.final_update_norm <= 1e-10);
    }
    TEST_CASE("damping reaches the same fixed point") {
        const ModelParams p = unit_horizon_scenario();
        SolverConfig c = SolverConfig::for_horizon(p.T);
        const auto plain = solve_fixed_point(p, c);
        c.damping = 0.5;
        const auto damped = solve_fixed_point(p, c);
        REQUIRE(damped.converged);
        CHECK(sup_distance(plain.pi, damped.pi) <= 1e-9);
    }
    TEST_CASE("pins, signs and residuals across the test matrix") {
        for (const ModelParams& p : test_matrix()) {
            const auto sol = solve_fixed_point(p, SolverConfig::for_horizon(p.T));
            REQUIRE(sol.converged);
            const double dt = sol.grid().dt();
            CHECK(sol.pi.back() == 0.0);
            CHECK(sol.offset.back() == 0.0);
            CHECK(sol.variance.front() == p.V0);
            CHECK(sol.mean.front() == p.mu0);
            for (std::size_t k = 0; k < sol.grid().n_nodes(); ++k) {
                CHECK(sol.pi[k] >= 0.0);
                CHECK(sol.variance[k] >= 0.0);
                CHECK(sol.q_alpha[k] >= p.q);
            }
            CHECK(pi_residual(sol, p) <= 10 * dt * dt);
            CHECK(v_residual(sol, p) <= 10 * dt * dt);
            CHECK(s_residual(sol, p) <= 10 * dt * dt);
        }
    }
    TEST_CASE("one more sweep moves Pi by at most twice the tolerance") {
        for (const ModelParams& p : test_matrix()) {
            const SolverConfig c = SolverConfig::for_horizon(p.T);
            const auto sol = solve_fixed_point(p, c);
            CHECK(sup_distance(picard_sweep(sol.pi, p), sol.pi) <= 2 * c.picard_tol);
        }
    }
    TEST_CASE("quantile coupling lowers variance and raises Pi against the constant coefficient") {
        const ModelParams p = unit_horizon_scenario();
        const auto quant = solve_fixed_point(p, SolverConfig::for_horizon(p.T));
        const auto flat = solve_constant_coefficient(p, quant.grid());
        for (std::size_t k = 0; k < quant.grid().n_nodes(); ++k) {
            CHECK(quant.variance[k] <= flat.variance[k]);
            CHECK(quant.pi[k] >= flat.pi[k]);
        }
        // The baseline coefficient is q (1 + e^{xbar}), i.e. 2q here since xbar = 0.
        for (double v : flat.q_alpha.values()) CHECK(v == 2.0 * p.q);
    }
    TEST_CASE("higher alpha raises the first-iterate coefficient") {
        ModelParams lo = short_horizon_scenario();
        ModelParams hi = lo;
        lo.alpha = QuantileLevel(0.9);
        hi.alpha = QuantileLevel(0.99);
        const TimeGrid g(lo.T, 2000);
        const ScalarPath zero = ScalarPath::constant(g, 0.0);
        const ScalarPath v = variance_forward(zero, lo);
        const ScalarPath m = mean_path(lo, g);
        const ScalarPath q_lo = q_path(m, v, lo);
        const ScalarPath q_hi = q_path(m, v, hi);
        for (std::size_t k = 0; k < g.n_nodes(); ++k) CHECK(q_hi[k] >= q_lo[k]);
    }
    TEST_CASE("iteration cap reports non-convergence but returns the iterate") {
        const ModelParams p = unit_horizon_scenario();
        SolverConfig c = SolverConfig::for_horizon(p.T);
        c.max_iters = 2;
        const auto sol = solve_fixed_point(p, c);
        CHECK_FALSE(sol.converged);
        CHECK(sol.iterations == 2);
        CHECK(sol.final_update_norm > c.picard_tol);
        CHECK_THROWS_AS(require_converged(sol), NonConvergenceError);
    }
}

TEST_SUITE("feedback and consistency") {
    TEST_CASE("feedback control") {
        ModelParams p;
        CHECK(feedback_control(0.0, 0.0, 5.0, p) == 0.0);
        CHECK(feedback_control(1.0, 0.0, 2.0, p) == -2.0);
        p.b = 0.75;
        p.r = 3.5;
        CHECK(std::abs(feedback_control(0.1, -0.05, 1.0, p) + 0.010714) < 1e-6);
    }
    TEST_CASE("mean ODE matches the closed form") {
        ModelParams p = short_horizon_scenario();
        p.mu0 = 0.0;
        CHECK(mean_ode_consistency(solve_fixed_point(p, SolverConfig::for_horizon(p.T)), p) == 0.0);
        ModelParams q0 = with_q(short_horizon_scenario(), 0.0);
        CHECK(mean_ode_consistency(solve_fixed_point(q0, SolverConfig::for_horizon(q0.T, 1000)), q0) <= 1e-8);
        const ModelParams f = short_horizon_scenario();
        CHECK(mean_ode_consistency(solve_fixed_point(f, SolverConfig::for_horizon(f.T, 2000)), f) <= 1e-4);
    }
}

TEST_SUITE("variance-only special case") {
    TEST_CASE("q = 0 gives zero gains") {
        const ModelParams p = with_q(unit_horizon_scenario(), 0.0);
        const auto sc = solve_special_case(p, SolverConfig::for_horizon(p.T));
        for (std::size_t k = 0; k < sc.p.size(); ++k) {
            CHECK(sc.base.pi[k] == 0.0);
            CHECK(sc.p[k] == 0.0);
            CHECK(sc.h[k] == 0.0);
        }
    }
    TEST_CASE("H identity, P residual and decoupled gain") {
        for (const ModelParams& p : test_matrix()) {
            const auto sc = solve_special_case(p, SolverConfig::for_horizon(p.T));
            REQUIRE(sc.base.converged);
            double hmax = 0.0;
            for (double v : sc.h.values()) hmax = std::max(hmax, std::abs(v));
            CHECK(hmax <= 1e-8);
            CHECK(sc.p.back() == 0.0);
            const double g = p.gain();
            const double dt = sc.p.grid().dt();
            const double res = oracle::residual(
                sc.p,
                [&](std::size_t k, double y) {
                    return 2 * (p.a - g * sc.base.pi[k]) * y - g * y * y - sc.base.q_alpha[k];
                },
                -1.0);
            CHECK(res <= 10 * dt * dt);
            CHECK(pi_residual(sc.base, p) <= 10 * dt * dt);
            // u = -(b/r)(Pi x + P xbar) = -(b/r) Pi (x - xbar) when P = -Pi.
            for (std::size_t k = 0; k < sc.p.size(); ++k) CHECK(std::abs(sc.p[k] + sc.base.pi[k]) <= 1e-8);
            for (double v : sc.base.q_alpha.values()) CHECK(v >= p.q);
        }
    }
}

TEST_SUITE("validation") {
    TEST_CASE("model invariants") {
        auto bad = [](auto mutate) {
            ModelParams p = short_horizon_scenario();
            mutate(p);
            return p;
        };
        CHECK_THROWS_AS(validate(bad([](ModelParams& p) { p.b = 0.0; })), ValidationError);
        CHECK_THROWS_AS(validate(bad([](ModelParams& p) { p.r = 0.0; })), ValidationError);
        CHECK_THROWS_AS(validate(bad([](ModelParams& p) { p.q = -1.0; })), ValidationError);
        CHECK_THROWS_AS(validate(bad([](ModelParams& p) { p.V0 = -0.1; })), ValidationError);
        CHECK_THROWS_AS(validate(bad([](ModelParams& p) { p.T = 0.0; })), ValidationError);
        CHECK_THROWS_AS(validate(bad([](ModelParams& p) { p.sigma = -1.0; })), ValidationError);
        CHECK_THROWS_AS(validate(bad([](ModelParams& p) { p.a = NAN; })), ValidationError);
        CHECK_NOTHROW(validate(short_horizon_scenario()));
        try {
            validate(bad([](ModelParams& p) { p.b = 0.0; }));
        } catch (const ValidationError& e) {
            CHECK(std::string(e.what()).find("b != 0") != std::string::npos);
        }
    }
    TEST_CASE("solver config") {
        const ModelParams p = short_horizon_scenario();
        SolverConfig c = SolverConfig::for_horizon(1.0);
        CHECK_THROWS_AS(solve_fixed_point(p, c), GridMismatchError);
        c = SolverConfig::for_horizon(p.T);
        c.damping = 1.0;
        CHECK_THROWS_AS(solve_fixed_point(p, c), ValidationError);
        c.damping = 0.0;
        c.picard_tol = 0.0;
        CHECK_THROWS_AS(solve_fixed_point(p, c), ValidationError);
        c.picard_tol = 1e-10;
        c.max_iters = 0;
        CHECK_THROWS_AS(solve_fixed_point(p, c), ValidationError);
    }
}

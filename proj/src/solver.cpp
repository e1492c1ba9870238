#include "qmfg/solver.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

namespace qmfg {

SolverConfig SolverConfig::for_horizon(double T, std::size_t n_steps) {
    return SolverConfig{.grid = TimeGrid{T, n_steps}};
}

void validate(const SolverConfig& c, const ModelParams& params) {
    if (!(c.picard_tol > 0.0)) throw ValidationError("solver.picard_tol must be positive");
    if (c.max_iters < 1) throw ValidationError("solver.max_iters must be >= 1");
    if (!(c.damping >= 0.0 && c.damping < 1.0)) throw ValidationError("solver.damping must lie in [0, 1)");
    if (c.grid.t1() != params.T) throw GridMismatchError("solver grid horizon differs from model.T");
}

ScalarPath mean_path(const ModelParams& params, const TimeGrid& grid) {
    std::vector<double> v(grid.n_nodes());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = std::exp(params.a * grid.node(k)) * params.mu0;
    return ScalarPath(grid, std::move(v));
}

namespace {

double clamped_sqrt(double v, double t) {
    if (v < -1e-12) {
        std::ostringstream msg;
        msg << "negative variance " << v << " at t = " << t;
        throw DomainError(msg.str());
    }
    return std::sqrt(std::max(v, 0.0));
}

template <typename ExponentFn>
ScalarPath coupling_path(const ScalarPath& variance, const ModelParams& params, ExponentFn exponent) {
    const double z = probit(params.alpha);
    const TimeGrid& grid = variance.grid();
    std::vector<double> v(grid.n_nodes());
    for (std::size_t k = 0; k < v.size(); ++k) {
        const double sd = clamped_sqrt(variance[k], grid.node(k));
        v[k] = params.q * (1.0 + std::exp(exponent(k) + sd * z));
    }
    return ScalarPath(grid, std::move(v));
}

}  // namespace

ScalarPath q_path(const ScalarPath& mean, const ScalarPath& variance, const ModelParams& params) {
    if (!(mean.grid() == variance.grid())) throw GridMismatchError("q_path: mean and variance grids differ");
    return coupling_path(variance, params, [&](std::size_t k) { return mean[k]; });
}

ScalarPath q_path_variance_only(const ScalarPath& variance, const ModelParams& params) {
    return coupling_path(variance, params, [](std::size_t) { return 0.0; });
}

ScalarPath riccati_backward(const ScalarPath& q_alpha, const ModelParams& params) {
    const double a = params.a;
    const double g = params.gain();
    auto rhs = [&](const Stage& s, double pi) { return 2.0 * a * pi - g * pi * pi + q_alpha.at(s); };
    return ScalarPath(q_alpha.grid(), detail::rk4_backward<double>(rhs, 0.0, q_alpha.grid()));
}

ScalarPath variance_forward(const ScalarPath& pi, const ModelParams& params) {
    const double a = params.a;
    const double g = params.gain();
    const double s2 = params.sigma * params.sigma;
    auto rhs = [&](const Stage& s, double v) { return 2.0 * (a - g * pi.at(s)) * v + s2; };
    return ScalarPath(pi.grid(), detail::rk4_forward<double>(rhs, params.V0, pi.grid()));
}

ScalarPath offset_backward(const ScalarPath& pi, const ScalarPath& q_alpha, const ScalarPath& mean,
                           const ModelParams& params) {
    if (!(pi.grid() == q_alpha.grid()) || !(pi.grid() == mean.grid())) {
        throw GridMismatchError("offset_backward: input paths live on different grids");
    }
    const double a = params.a;
    const double g = params.gain();
    auto rhs = [&](const Stage& st, double s) { return (a - g * pi.at(st)) * s - q_alpha.at(st) * mean.at(st); };
    return ScalarPath(pi.grid(), detail::rk4_backward<double>(rhs, 0.0, pi.grid()));
}

namespace {

struct PicardResult {
    ScalarPath pi;
    ScalarPath variance;
    ScalarPath q_alpha;
    std::size_t iterations;
    double update_norm;
    bool converged;
};

// The returned pi is exactly riccati_backward(q_alpha); variance and q_alpha come
// from the previous iterate, which is within update_norm of pi.
template <typename CouplingFn>
PicardResult picard(const ModelParams& params, const SolverConfig& config, CouplingFn coupling) {
    ScalarPath pi = ScalarPath::constant(config.grid, 0.0);
    for (std::size_t it = 1;; ++it) {
        ScalarPath variance = variance_forward(pi, params);
        ScalarPath q_alpha = coupling(variance);
        ScalarPath pi_new = riccati_backward(q_alpha, params);
        const double norm = sup_distance(pi_new, pi);
        if (norm <= config.picard_tol || it >= config.max_iters) {
            return PicardResult{std::move(pi_new), std::move(variance), std::move(q_alpha), it, norm,
                                norm <= config.picard_tol};
        }
        if (config.damping == 0.0) {
            pi = std::move(pi_new);
        } else {
            std::vector<double> mixed(pi.size());
            for (std::size_t k = 0; k < mixed.size(); ++k) {
                mixed[k] = config.damping * pi[k] + (1.0 - config.damping) * pi_new[k];
            }
            pi = ScalarPath(config.grid, std::move(mixed));
        }
    }
}

}  // namespace

CoupledSolution solve_fixed_point(const ModelParams& params, const SolverConfig& config) {
    validate(params);
    validate(config, params);
    ScalarPath mean = mean_path(params, config.grid);
    PicardResult res = picard(params, config, [&](const ScalarPath& v) { return q_path(mean, v, params); });
    ScalarPath offset = offset_backward(res.pi, res.q_alpha, mean, params);
    return CoupledSolution{std::move(res.pi),  std::move(res.variance), std::move(res.q_alpha),
                           std::move(offset),  std::move(mean),         res.iterations,
                           res.update_norm,    res.converged};
}

CoupledSolution solve_constant_coefficient(const ModelParams& params, const TimeGrid& grid) {
    validate(params);
    ScalarPath mean = mean_path(params, grid);
    ScalarPath q_alpha = q_path(mean, ScalarPath::constant(grid, 0.0), params);
    ScalarPath pi = riccati_backward(q_alpha, params);
    ScalarPath variance = variance_forward(pi, params);
    ScalarPath offset = offset_backward(pi, q_alpha, mean, params);
    return CoupledSolution{std::move(pi), std::move(variance), std::move(q_alpha), std::move(offset),
                           std::move(mean), 1, 0.0, true};
}

ScalarPath picard_sweep(const ScalarPath& pi, const ModelParams& params) {
    ScalarPath mean = mean_path(params, pi.grid());
    return riccati_backward(q_path(mean, variance_forward(pi, params), params), params);
}

double feedback_control(double pi_t, double s_t, double x, const ModelParams& params) {
    return -(params.b / params.r) * (pi_t * x + s_t);
}

double mean_ode_consistency(const CoupledSolution& solution, const ModelParams& params) {
    const double a = params.a;
    const double g = params.gain();
    const ScalarPath& pi = solution.pi;
    const ScalarPath& s = solution.offset;
    auto rhs = [&](const Stage& st, double x) { return (a - g * pi.at(st)) * x - g * s.at(st); };
    ScalarPath integrated(pi.grid(), detail::rk4_forward<double>(rhs, params.mu0, pi.grid()));
    return sup_distance(integrated, mean_path(params, pi.grid()));
}

SpecialCaseSolution solve_special_case(const ModelParams& params, const SolverConfig& config) {
    validate(params);
    validate(config, params);
    const TimeGrid& grid = config.grid;
    ScalarPath mean = mean_path(params, grid);
    PicardResult res = picard(params, config, [&](const ScalarPath& v) { return q_path_variance_only(v, params); });

    // Pi and P share stages so their sum is the RK4 image of the H equation,
    // whose zero terminal value keeps H at roundoff level.
    const double a = params.a;
    const double g = params.gain();
    const ScalarPath& q_alpha = res.q_alpha;
    using Pair = std::array<double, 2>;
    auto rhs = [&](const Stage& s, const Pair& y) {
        const double qa = q_alpha.at(s);
        const double pi = y[0];
        const double p = y[1];
        return Pair{2.0 * a * pi - g * pi * pi + qa, 2.0 * (a - g * pi) * p - g * p * p - qa};
    };
    std::vector<Pair> pair = detail::rk4_backward<Pair>(rhs, Pair{0.0, 0.0}, grid);
    std::vector<double> pi_v(pair.size());
    std::vector<double> p_v(pair.size());
    std::vector<double> h_v(pair.size());
    double h_max = 0.0;
    for (std::size_t k = 0; k < pair.size(); ++k) {
        pi_v[k] = pair[k][0];
        p_v[k] = pair[k][1];
        h_v[k] = pair[k][0] + pair[k][1];
        h_max = std::max(h_max, std::abs(h_v[k]));
    }
    if (h_max > 1e-8) {
        std::ostringstream msg;
        msg << "Pi + P deviates from zero by " << h_max;
        throw IdentityViolationError(msg.str());
    }
    ScalarPath pi(grid, std::move(pi_v));
    ScalarPath offset = offset_backward(pi, q_alpha, mean, params);
    CoupledSolution base{std::move(pi),     std::move(res.variance), res.q_alpha, std::move(offset),
                         std::move(mean),   res.iterations,          res.update_norm, res.converged};
    return SpecialCaseSolution{std::move(base), ScalarPath(grid, std::move(p_v)), ScalarPath(grid, std::move(h_v))};
}

void require_converged(const CoupledSolution& solution) {
    if (!solution.converged) {
        std::ostringstream msg;
        msg << "Picard iteration did not converge after " << solution.iterations
            << " iterations (last update " << solution.final_update_norm << ")";
        throw NonConvergenceError(msg.str());
    }
}

}  // namespace qmfg

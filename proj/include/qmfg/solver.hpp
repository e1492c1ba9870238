#pragma once

#include "qmfg/core_math.hpp"
#include "qmfg/model.hpp"

#include <cstddef>

namespace qmfg {

struct SolverConfig {
    TimeGrid grid{1.0, 2000};
    double picard_tol = 1e-10;
    std::size_t max_iters = 200;
    double damping = 0.0;  ///< weight on the previous iterate, in [0, 1)

    /// Default tolerances on a grid of n_steps over [0, params.T].
    static SolverConfig for_horizon(double T, std::size_t n_steps = 2000);
};

void validate(const SolverConfig& config, const ModelParams& params);

/// Equilibrium bundle. `converged` is false if max_iters was reached with
/// final_update_norm above picard_tol; the paths are still the last iterate.
struct CoupledSolution {
    ScalarPath pi;
    ScalarPath variance;
    ScalarPath q_alpha;
    ScalarPath offset;
    ScalarPath mean;
    std::size_t iterations = 0;
    double final_update_norm = 0.0;
    bool converged = false;

    const TimeGrid& grid() const noexcept { return pi.grid(); }
};

struct SpecialCaseSolution {
    CoupledSolution base;
    ScalarPath p;  ///< decoupling Riccati solution, s = P * xbar
    ScalarPath h;  ///< Pi + P, identically zero in exact arithmetic
};

/// Closed-form mean field e^{a t} mu0.
ScalarPath mean_path(const ModelParams& params, const TimeGrid& grid);

/// q (1 + exp(mean + sqrt(V) probit(alpha))) nodewise. Variance values in
/// [-1e-12, 0) are roundoff and clamp to 0; anything below throws DomainError.
ScalarPath q_path(const ScalarPath& mean, const ScalarPath& variance, const ModelParams& params);

/// Same coupling with the mean term removed: q (1 + exp(sqrt(V) probit(alpha))).
ScalarPath q_path_variance_only(const ScalarPath& variance, const ModelParams& params);

/// -Pi' = 2 a Pi - (b^2/r) Pi^2 + q_alpha, Pi(T) = 0.
ScalarPath riccati_backward(const ScalarPath& q_alpha, const ModelParams& params);

/// V' = 2 (a - (b^2/r) Pi) V + sigma^2, V(0) = V0.
ScalarPath variance_forward(const ScalarPath& pi, const ModelParams& params);

/// -s' = (a - (b^2/r) Pi) s - q_alpha xbar, s(T) = 0.
ScalarPath offset_backward(const ScalarPath& pi, const ScalarPath& q_alpha, const ScalarPath& mean,
                           const ModelParams& params);

/// Picard iteration Pi <- T(Pi) starting from Pi = 0, then the offset equation.
CoupledSolution solve_fixed_point(const ModelParams& params, const SolverConfig& config);

/// Solve with the constant coefficient q (1 + e^{xbar(t)}) obtained by setting
/// V = 0 in the quantile coupling. Used as the comparison baseline.
CoupledSolution solve_constant_coefficient(const ModelParams& params, const TimeGrid& grid);

/// One more full sweep V -> q_alpha -> Pi applied to a solution's Pi.
ScalarPath picard_sweep(const ScalarPath& pi, const ModelParams& params);

/// u = -(b/r)(Pi_t x + s_t).
double feedback_control(double pi_t, double s_t, double x, const ModelParams& params);

/// Integrates xbar' = (a - (b^2/r) Pi) xbar - (b^2/r) s forward from mu0 with the
/// solution's Pi and s and returns the sup deviation from e^{at} mu0.
double mean_ode_consistency(const CoupledSolution& solution, const ModelParams& params);

/// Variance-only coupling. Runs the same Picard loop, then integrates Pi and P
/// together so that H = Pi + P follows the RK4 image of -H' = 2aH - (b^2/r)H^2.
/// Throws IdentityViolationError if max |H| > 1e-8.
SpecialCaseSolution solve_special_case(const ModelParams& params, const SolverConfig& config);

/// Throws NonConvergenceError if the solution did not converge.
void require_converged(const CoupledSolution& solution);

}  // namespace qmfg

#pragma once

#include "qmfg/model.hpp"

#include <optional>
#include <span>

namespace qmfg {

/// Sufficient conditions for existence (Schauder) and uniqueness (contraction)
/// of the fixed point in the ball ||Pi||_inf <= m.
struct ConditionReport {
    double mu_star = 0.0;
    double m_witness = 0.0;
    double existence_lhs = 0.0;
    bool existence_holds = false;
    double contraction_lhs = 0.0;
    bool contraction_holds = false;

    bool both_hold() const noexcept { return existence_holds && contraction_holds; }
};

/// max{mu0, e^{aT} mu0}, for either sign of mu0.
double mu_star(const ModelParams& params);

/// T [2|a|m + (b^2/r)m^2 + q + q exp(mu* + |z| sqrt(V0 + sigma^2 T) exp(T(|a| + (b^2/r)m)))]
/// with z = probit(alpha). Existence holds when this is <= m.
double existence_lhs(const ModelParams& params, double m);

/// T (2|a| + (b^2/r)m^2 + q |z| (b^2/r) T sqrt(V0 + sigma^2 T)
///    * exp(mu* + 3T(|a| + (b^2/r)m) + |z| sqrt(V0 + sigma^2 T) exp(T(|a| + (b^2/r)m)))).
/// The contraction condition holds when this is < 1.
double contraction_lhs(const ModelParams& params, double m);

ConditionReport check(const ModelParams& params, double m);

/// Smallest grid value at which both conditions hold. The grid must be
/// nonempty and strictly increasing.
std::optional<double> search_witness(const ModelParams& params, std::span<const double> m_grid);

/// Uniform grid start, start + step, ..., up to stop (inclusive within roundoff).
std::vector<double> make_m_grid(double start, double stop, double step);

struct GapBound {
    double lhs;
    double rhs;
    double log_lhs;  ///< -inf when lhs is 0
    double log_rhs;

    /// lhs <= rhs, decided in log space so it stays meaningful past double range.
    bool holds() const noexcept { return log_lhs <= log_rhs; }
};

/// lhs = |e^{c sqrt x} - e^{c sqrt y}|,
/// rhs = e^{max(c sqrt x, c sqrt y)} / (2 min(c sqrt x, c sqrt y)) * c^2 |x - y|.
GapBound exp_sqrt_gap_bound(double x, double y, double c);

}  // namespace qmfg

#include "qmfg/conditions.hpp"

#include <algorithm>
#include <cmath>

namespace qmfg {

namespace {

void require_nonnegative_m(double m) {
    if (!(m >= 0.0) || !std::isfinite(m)) throw DomainError("ball radius m must be finite and nonnegative");
}

struct Shared {
    double abs_a;
    double g;
    double abs_z;
    double spread;  // sqrt(V0 + sigma^2 T)
    double growth;  // exp(T(|a| + g m))
};

Shared shared_terms(const ModelParams& p, double m) {
    const double abs_a = std::abs(p.a);
    const double g = p.gain();
    return Shared{abs_a, g, std::abs(probit(p.alpha)), std::sqrt(p.V0 + p.sigma * p.sigma * p.T),
                  std::exp(p.T * (abs_a + g * m))};
}

}  // namespace

double mu_star(const ModelParams& params) {
    return std::max(params.mu0, std::exp(params.a * params.T) * params.mu0);
}

double existence_lhs(const ModelParams& params, double m) {
    require_nonnegative_m(m);
    const Shared s = shared_terms(params, m);
    const double tail = params.q * std::exp(mu_star(params) + s.abs_z * s.spread * s.growth);
    return params.T * (2.0 * s.abs_a * m + s.g * m * m + params.q + tail);
}

double contraction_lhs(const ModelParams& params, double m) {
    require_nonnegative_m(m);
    const Shared s = shared_terms(params, m);
    const double exponent = mu_star(params) + 3.0 * params.T * (s.abs_a + s.g * m) + s.abs_z * s.spread * s.growth;
    const double coupling = params.q * s.abs_z * s.g * params.T * s.spread * std::exp(exponent);
    return params.T * (2.0 * s.abs_a + s.g * m * m + coupling);
}

ConditionReport check(const ModelParams& params, double m) {
    validate(params);
    ConditionReport r;
    r.mu_star = mu_star(params);
    r.m_witness = m;
    r.existence_lhs = existence_lhs(params, m);
    r.existence_holds = r.existence_lhs <= m;
    r.contraction_lhs = contraction_lhs(params, m);
    r.contraction_holds = r.contraction_lhs < 1.0;
    return r;
}

std::optional<double> search_witness(const ModelParams& params, std::span<const double> m_grid) {
    if (m_grid.empty()) throw ValidationError("search_witness: empty m grid");
    for (std::size_t i = 1; i < m_grid.size(); ++i) {
        if (!(m_grid[i] > m_grid[i - 1])) throw ValidationError("search_witness: m grid must be strictly increasing");
    }
    for (double m : m_grid) {
        if (check(params, m).both_hold()) return m;
    }
    return std::nullopt;
}

std::vector<double> make_m_grid(double start, double stop, double step) {
    if (!(step > 0.0) || !(stop >= start) || !(start >= 0.0)) {
        throw ValidationError("m grid needs 0 <= start <= stop and step > 0");
    }
    std::vector<double> grid;
    const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
    grid.reserve(count);
    // start + i*step, not a running sum, so roundoff does not accumulate.
    for (std::size_t i = 0; i < count; ++i) grid.push_back(start + static_cast<double>(i) * step);
    return grid;
}

GapBound exp_sqrt_gap_bound(double x, double y, double c) {
    if (!(x > 0.0) || !(y > 0.0) || !(c > 0.0)) throw DomainError("exp_sqrt_gap_bound: x, y, c must be positive");
    const double u = c * std::sqrt(x);
    const double v = c * std::sqrt(y);
    const double hi = std::max(u, v);
    // e^hi factored out: both sides stay NaN-free when e^hi overflows.
    const double gap = -std::expm1(-std::abs(u - v));
    const double factor = c * c * std::abs(x - y) / (2.0 * std::min(u, v));
    const double scale = std::exp(hi);
    GapBound out{scale * gap, scale * factor, -INFINITY, -INFINITY};
    if (gap > 0.0) out.log_lhs = hi + std::log(gap);
    if (factor > 0.0) out.log_rhs = hi + std::log(factor);
    return out;
}

}  // namespace qmfg

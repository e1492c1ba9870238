#include "qmfg/core_math.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace qmfg {

TimeGrid::TimeGrid(double horizon, std::size_t n_steps) : horizon_(horizon), n_steps_(n_steps), dt_(0.0) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
        throw ValidationError("TimeGrid: horizon T must be positive and finite");
    }
    if (n_steps < 2) {
        throw ValidationError("TimeGrid: n_steps must be >= 2");
    }
    dt_ = horizon / static_cast<double>(n_steps);
}

ScalarPath::ScalarPath(TimeGrid grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.n_nodes()) {
        std::ostringstream msg;
        msg << "ScalarPath: " << values_.size() << " values for a grid with " << grid_.n_nodes() << " nodes";
        throw ValidationError(msg.str());
    }
    for (std::size_t k = 0; k < values_.size(); ++k) {
        if (!std::isfinite(values_[k])) {
            std::ostringstream msg;
            msg << "ScalarPath: non-finite value at t = " << grid_.node(k);
            throw OverflowError(msg.str());
        }
    }
}

ScalarPath ScalarPath::constant(const TimeGrid& grid, double value) {
    return ScalarPath(grid, std::vector<double>(grid.n_nodes(), value));
}

double sup_distance(const ScalarPath& a, const ScalarPath& b) {
    if (!(a.grid() == b.grid())) throw GridMismatchError("sup_distance: paths live on different grids");
    double d = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) d = std::max(d, std::abs(a[k] - b[k]));
    return d;
}

QuantileLevel::QuantileLevel(double alpha) : alpha_(alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        std::ostringstream msg;
        msg << "quantile level alpha = " << alpha << " must lie in the open interval (0, 1)";
        throw DomainError(msg.str());
    }
}

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

namespace {

// Acklam's rational approximation for the lower region, relative error ~1e-9.
double probit_guess_lower(double p) {
    constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                            1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                            6.680131188771972e+01,  -1.328068155288572e+01};
    constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                            -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                            3.754408661907416e+00};
    constexpr double p_low = 0.02425;
    if (p < p_low) {
        const double s = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * s + c[1]) * s + c[2]) * s + c[3]) * s + c[4]) * s + c[5]) /
               ((((d[0] * s + d[1]) * s + d[2]) * s + d[3]) * s + 1.0);
    }
    const double s = p - 0.5;
    const double r = s * s;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * s /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

// p in (0, 0.5]. Newton iterations on the CDF, kept inside a shrinking bracket
// [lo, hi] so a bad step falls back to bisection.
double probit_lower(double p) {
    if (p == 0.5) return 0.0;
    double x = probit_guess_lower(p);
    double lo = -40.0;
    double hi = 0.0;
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    for (int iter = 0; iter < 100; ++iter) {
        const double f = std_normal_cdf(x) - p;
        if (f == 0.0) return x;
        if (f > 0.0) hi = std::min(hi, x);
        else lo = std::max(lo, x);
        const double pdf = inv_sqrt_2pi * std::exp(-0.5 * x * x);
        double next = (pdf > 0.0) ? x - f / pdf : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        const double step = std::abs(next - x);
        x = next;
        if (step <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(x))) break;
        if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(x))) break;
    }
    return x;
}

}  // namespace

double probit(QuantileLevel alpha) {
    const double p = alpha.value();
    if (p <= 0.5) return probit_lower(p);
    return -probit_lower(1.0 - p);
}

double gaussian_quantile(double mu, double sigma, QuantileLevel alpha) {
    if (!(sigma >= 0.0)) throw DomainError("gaussian_quantile: sigma must be nonnegative");
    if (sigma == 0.0) return mu;
    return mu + sigma * probit(alpha);
}

std::size_t empirical_quantile_rank(std::size_t m, QuantileLevel alpha) {
    if (m == 0) throw ValidationError("empirical_quantile: no samples");
    const double md = static_cast<double>(m);
    auto reaches = [&](std::size_t k) { return static_cast<double>(k) / md >= alpha.value(); };
    auto k = static_cast<std::size_t>(std::ceil(alpha.value() * md));
    k = std::clamp<std::size_t>(k, 1, m);
    // ceil(alpha*m) can be off by one when alpha*m rounds across an integer.
    while (k > 1 && reaches(k - 1)) --k;
    while (k < m && !reaches(k)) ++k;
    return k;
}

double empirical_quantile(std::span<const double> samples, QuantileLevel alpha) {
    if (samples.empty()) throw ValidationError("empirical_quantile: no samples");
    for (double x : samples) {
        if (!std::isfinite(x)) throw ValidationError("empirical_quantile: non-finite sample");
    }
    const std::size_t k = empirical_quantile_rank(samples.size(), alpha);
    std::vector<double> work(samples.begin(), samples.end());
    auto nth = work.begin() + static_cast<std::ptrdiff_t>(k - 1);
    std::nth_element(work.begin(), nth, work.end());
    return *nth;
}

namespace detail {

void throw_escape(double t) {
    std::ostringstream msg;
    msg << "integration overflow (finite escape) near t = " << t;
    throw OverflowError(msg.str());
}

}  // namespace detail

ScalarPath integrate_backward(const ScalarField& rhs, double terminal, const TimeGrid& grid) {
    return ScalarPath(grid, detail::rk4_backward<double>(rhs, terminal, grid));
}

ScalarPath integrate_forward(const ScalarField& rhs, double initial, const TimeGrid& grid) {
    return ScalarPath(grid, detail::rk4_forward<double>(rhs, initial, grid));
}

}  // namespace qmfg

#pragma once

// Independent reference computations for tests. Nothing here calls into the
// library's special functions.

#include "qmfg/core_math.hpp"

#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>

namespace oracle {

// erf(x) = 2/sqrt(pi) e^{-x^2} sum_n 2^n x^{2n+1} / (1*3*...*(2n+1)). Every term is
// positive, so there is no cancellation even for large |x|.
inline long double erf_series(long double x) {
    if (x < 0) return -erf_series(-x);
    const long double x2 = x * x;
    long double term = x;
    long double sum = x;
    for (int n = 1; n < 2000; ++n) {
        term *= 2.0L * x2 / (2.0L * n + 1.0L);
        sum += term;
        if (term < sum * 1e-22L) break;
    }
    return 2.0L / std::sqrt(std::numbers::pi_v<long double>) * std::exp(-x2) * sum;
}

// Lower tail through the complement keeps relative accuracy for x << 0.
inline long double normal_cdf(long double x) {
    const long double s = x / std::numbers::sqrt2_v<long double>;
    if (x < 0) return 0.5L * (1.0L - erf_series(-s));
    return 0.5L * (1.0L + erf_series(s));
}

inline long double bisect_probit(long double p) {
    long double lo = -40.0L;
    long double hi = 40.0L;
    for (int i = 0; i < 200; ++i) {
        const long double mid = 0.5L * (lo + hi);
        if (normal_cdf(mid) < p) lo = mid;
        else hi = mid;
    }
    return 0.5L * (lo + hi);
}

// sup over interior nodes of |y'(t_k) - f(t_k, y_k)| with y' from the five-point
// central stencil. `sign` is +1 for y' = f and -1 for -y' = f.
inline double residual(const qmfg::ScalarPath& y, const std::function<double(std::size_t, double)>& f, double sign) {
    const std::size_t n = y.grid().n_steps();
    const double dt = y.grid().dt();
    double worst = 0.0;
    for (std::size_t k = 2; k + 2 <= n; ++k) {
        const double d = (-y[k + 2] + 8.0 * y[k + 1] - 8.0 * y[k - 1] + y[k - 2]) / (12.0 * dt);
        worst = std::max(worst, std::abs(sign * d - f(k, y[k])));
    }
    return worst;
}

}  // namespace oracle

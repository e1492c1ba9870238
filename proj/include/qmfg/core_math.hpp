#pragma once

#include "qmfg/errors.hpp"

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace qmfg {

/// Uniform discretization of [0, T] with n_steps intervals.
class TimeGrid {
public:
    TimeGrid(double horizon, std::size_t n_steps);

    double t0() const noexcept { return 0.0; }
    double t1() const noexcept { return horizon_; }
    std::size_t n_steps() const noexcept { return n_steps_; }
    std::size_t n_nodes() const noexcept { return n_steps_ + 1; }
    double dt() const noexcept { return dt_; }

    /// Node k; the last node is exactly T.
    double node(std::size_t k) const noexcept {
        return k == n_steps_ ? horizon_ : static_cast<double>(k) * dt_;
    }

    /// Same horizon and step count.
    bool operator==(const TimeGrid& other) const noexcept {
        return horizon_ == other.horizon_ && n_steps_ == other.n_steps_;
    }

private:
    double horizon_;
    std::size_t n_steps_;
    double dt_;
};

/// Where a one-step integrator evaluates its right-hand side: either grid node
/// `index`, or the midpoint of [t_index, t_index+1].
struct Stage {
    double t;
    std::size_t index;
    bool midpoint;
};

/// A trajectory sampled at every node of a TimeGrid.
class ScalarPath {
public:
    /// Throws ValidationError on length mismatch and OverflowError on non-finite values.
    ScalarPath(TimeGrid grid, std::vector<double> values);

    /// Constant path.
    static ScalarPath constant(const TimeGrid& grid, double value);

    const TimeGrid& grid() const noexcept { return grid_; }
    std::span<const double> values() const noexcept { return values_; }
    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t k) const noexcept { return values_[k]; }
    double front() const noexcept { return values_.front(); }
    double back() const noexcept { return values_.back(); }

    /// Node value, or the linear interpolant at a midpoint stage.
    double at(const Stage& s) const noexcept {
        return s.midpoint ? 0.5 * (values_[s.index] + values_[s.index + 1]) : values_[s.index];
    }

private:
    TimeGrid grid_;
    std::vector<double> values_;
};

/// sup_k |a_k - b_k|; throws GridMismatchError if the grids differ.
double sup_distance(const ScalarPath& a, const ScalarPath& b);

/// Quantile level strictly inside (0, 1).
class QuantileLevel {
public:
    explicit QuantileLevel(double alpha);
    double value() const noexcept { return alpha_; }

private:
    double alpha_;
};

/// Standard normal CDF.
double std_normal_cdf(double x);

/// Inverse of the standard normal CDF, accurate to ~1e-15 in x.
double probit(QuantileLevel alpha);

/// mu + sigma * probit(alpha); sigma must be nonnegative.
double gaussian_quantile(double mu, double sigma, QuantileLevel alpha);

/// Index k (1-based) of the order statistic returned by empirical_quantile
/// over m samples: the smallest k with k/m >= alpha.
std::size_t empirical_quantile_rank(std::size_t m, QuantileLevel alpha);

/// inf{z : #{x_j <= z} / m >= alpha}, i.e. an order statistic of the samples
/// without interpolation. Throws ValidationError on empty or non-finite input.
double empirical_quantile(std::span<const double> samples, QuantileLevel alpha);

/// Right-hand side f(t, y). Coefficient paths are looked up through ScalarPath::at.
using ScalarField = std::function<double(const Stage&, double)>;

/// Classical RK4 for -y' = f(t, y) with y(T) = terminal, marching from T to 0.
ScalarPath integrate_backward(const ScalarField& rhs, double terminal, const TimeGrid& grid);

/// Classical RK4 for y' = f(t, y) with y(0) = initial.
ScalarPath integrate_forward(const ScalarField& rhs, double initial, const TimeGrid& grid);

namespace detail {

inline bool all_finite(double v) noexcept { return std::isfinite(v); }

template <std::size_t N>
bool all_finite(const std::array<double, N>& v) noexcept {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

inline double axpy(double y, double h, double k) noexcept { return y + h * k; }

template <std::size_t N>
std::array<double, N> axpy(const std::array<double, N>& y, double h, const std::array<double, N>& k) noexcept {
    std::array<double, N> out{};
    for (std::size_t i = 0; i < N; ++i) out[i] = y[i] + h * k[i];
    return out;
}

inline double rk4_combine(double y, double h, double k1, double k2, double k3, double k4) noexcept {
    return y + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
}

template <std::size_t N>
std::array<double, N> rk4_combine(const std::array<double, N>& y, double h, const std::array<double, N>& k1,
                                  const std::array<double, N>& k2, const std::array<double, N>& k3,
                                  const std::array<double, N>& k4) noexcept {
    std::array<double, N> out{};
    for (std::size_t i = 0; i < N; ++i) out[i] = rk4_combine(y[i], h, k1[i], k2[i], k3[i], k4[i]);
    return out;
}

[[noreturn]] void throw_escape(double t);

/// RK4 backward sweep for -y' = f(stage, y). The scalar and the small-system
/// versions share this code so that components integrate bit-identically.
template <typename State, typename Rhs>
std::vector<State> rk4_backward(const Rhs& rhs, const State& terminal, const TimeGrid& grid) {
    const std::size_t n = grid.n_steps();
    const double dt = grid.dt();
    std::vector<State> y(n + 1);
    y[n] = terminal;
    for (std::size_t j = n; j-- > 0;) {
        const Stage hi{grid.node(j + 1), j + 1, false};
        const Stage mid{grid.node(j) + 0.5 * dt, j, true};
        const Stage lo{grid.node(j), j, false};
        const State k1 = rhs(hi, y[j + 1]);
        const State k2 = rhs(mid, axpy(y[j + 1], 0.5 * dt, k1));
        const State k3 = rhs(mid, axpy(y[j + 1], 0.5 * dt, k2));
        const State k4 = rhs(lo, axpy(y[j + 1], dt, k3));
        if (!all_finite(k1) || !all_finite(k2) || !all_finite(k3) || !all_finite(k4)) throw_escape(lo.t);
        y[j] = rk4_combine(y[j + 1], dt, k1, k2, k3, k4);
        if (!all_finite(y[j])) throw_escape(lo.t);
    }
    return y;
}

template <typename State, typename Rhs>
std::vector<State> rk4_forward(const Rhs& rhs, const State& initial, const TimeGrid& grid) {
    const std::size_t n = grid.n_steps();
    const double dt = grid.dt();
    std::vector<State> y(n + 1);
    y[0] = initial;
    for (std::size_t j = 0; j < n; ++j) {
        const Stage lo{grid.node(j), j, false};
        const Stage mid{grid.node(j) + 0.5 * dt, j, true};
        const Stage hi{grid.node(j + 1), j + 1, false};
        const State k1 = rhs(lo, y[j]);
        const State k2 = rhs(mid, axpy(y[j], 0.5 * dt, k1));
        const State k3 = rhs(mid, axpy(y[j], 0.5 * dt, k2));
        const State k4 = rhs(hi, axpy(y[j], dt, k3));
        if (!all_finite(k1) || !all_finite(k2) || !all_finite(k3) || !all_finite(k4)) throw_escape(hi.t);
        y[j + 1] = rk4_combine(y[j], dt, k1, k2, k3, k4);
        if (!all_finite(y[j + 1])) throw_escape(hi.t);
    }
    return y;
}

}  // namespace detail
}  // namespace qmfg

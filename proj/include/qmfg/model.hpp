#pragma once

#include "qmfg/core_math.hpp"

namespace qmfg {

/// Scalar game data. Checked once by validate() at every public entry point;
/// b != 0 and r > 0 are standing assumptions of the model.
struct ModelParams {
    double a = 0.0;       ///< drift
    double b = 1.0;       ///< input gain, nonzero
    double r = 1.0;       ///< control weight, positive
    double sigma = 0.0;   ///< noise intensity
    double q = 0.0;       ///< base penalty
    QuantileLevel alpha{0.5};
    double mu0 = 0.0;     ///< initial mean
    double V0 = 0.0;      ///< initial variance
    double T = 1.0;       ///< horizon

    /// b^2 / r, the gain that shows up in every closed-loop coefficient.
    double gain() const noexcept { return b * b / r; }
};

/// Throws ValidationError naming the first violated invariant.
void validate(const ModelParams& params);

/// a = 0.5, mu0 = 0, b = r = sigma = V0 = q = 1, alpha = 0.95, T = 1. The
/// existence bound fails for every M here, yet the fixed point still exists.
ModelParams unit_horizon_scenario();

/// a = -0.15, b = 0.75, r = 3.5, sigma = 1, V0 = 0.5, alpha = 0.975, q = 0.45,
/// T = 0.2, mu0 = 1. Both sufficient conditions hold at M = 3.
ModelParams short_horizon_scenario();

}  // namespace qmfg

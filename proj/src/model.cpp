#include "qmfg/model.hpp"

#include <cmath>
#include <string>

namespace qmfg {

void validate(const ModelParams& p) {
    auto fail = [](const std::string& what) { throw ValidationError(what); };
    if (!std::isfinite(p.a)) fail("model.a must be finite");
    if (!(p.b != 0.0) || !std::isfinite(p.b)) fail("model.b must be nonzero (b != 0)");
    if (!(p.r > 0.0) || !std::isfinite(p.r)) fail("model.r must be positive (r > 0)");
    if (!(p.sigma >= 0.0) || !std::isfinite(p.sigma)) fail("model.sigma must be nonnegative");
    if (!(p.q >= 0.0) || !std::isfinite(p.q)) fail("model.q must be nonnegative (q >= 0)");
    if (!std::isfinite(p.mu0)) fail("model.mu0 must be finite");
    if (!(p.V0 >= 0.0) || !std::isfinite(p.V0)) fail("model.V0 must be nonnegative (V0 >= 0)");
    if (!(p.T > 0.0) || !std::isfinite(p.T)) fail("model.T must be positive (T > 0)");
}

ModelParams unit_horizon_scenario() {
    return ModelParams{.a = 0.5, .b = 1.0, .r = 1.0, .sigma = 1.0, .q = 1.0, .alpha = QuantileLevel{0.95},
                       .mu0 = 0.0, .V0 = 1.0, .T = 1.0};
}

ModelParams short_horizon_scenario() {
    return ModelParams{.a = -0.15, .b = 0.75, .r = 3.5, .sigma = 1.0, .q = 0.45, .alpha = QuantileLevel{0.975},
                       .mu0 = 1.0, .V0 = 0.5, .T = 0.2};
}

}  // namespace qmfg

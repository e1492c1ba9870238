#pragma once

#include "qmfg/config.hpp"

#include <iosfwd>
#include <optional>
#include <string>

namespace qmfg::cli {

/// Exit codes, one per outcome class.
enum ExitCode : int {
    kSuccess = 0,
    kConfigError = 1,
    kNonConvergence = 2,
    kConditionsFail = 3,
    kResourceRefusal = 4,
};

/// Ball radius for `check`: an explicit m, a grid to scan, or (neither) the
/// config's check section, falling back to the grid 0.1:50:0.1.
struct CheckTarget {
    std::optional<double> m;
    std::optional<MGrid> grid;
};

int cmd_solve(const RunConfig& config, std::ostream& log);
int cmd_check(const RunConfig& config, const CheckTarget& target, std::ostream& log);
int cmd_simulate(const RunConfig& config, std::ostream& log);
int cmd_study(const RunConfig& config, std::ostream& log);

/// Full command line: `qmfg <solve|check|simulate|study> --config FILE [--set k=v]...`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qmfg::cli

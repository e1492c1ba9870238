#pragma once

#include "qmfg/model.hpp"
#include "qmfg/simulator.hpp"
#include "qmfg/solver.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace qmfg {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr std::uint64_t kDefaultSeed = 20240601;
inline constexpr double kDefaultMaxCells = 1e8;

/// Config problem; what() is already anchored as "<source>:<line>: <key>: <message>".
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Emit { PathsCsv, SummaryJson, GapCsv, PlotData };

struct SimulationSection {
    std::size_t n_agents = 2;
    std::size_t n_trials = 1;
    std::size_t workers = 1;
    std::size_t substeps = 1;
};

struct StudySection {
    std::vector<std::size_t> n_list;
    std::size_t trials = 1;
};

struct MGrid {
    double start = 0.1;
    double stop = 50.0;
    double step = 0.1;
};

/// Either a single ball radius or a grid to scan.
struct CheckSection {
    std::optional<double> m;
    std::optional<MGrid> grid;
};

struct RunConfig {
    ModelParams model;
    SolverConfig solver;
    std::optional<SimulationSection> simulation;
    std::optional<StudySection> study;
    CheckSection check;
    std::uint64_t seed = kDefaultSeed;
    std::filesystem::path output_dir = "out";
    std::set<Emit> emit{Emit::PathsCsv, Emit::SummaryJson, Emit::GapCsv, Emit::PlotData};
    /// Cap on n_agents * n_steps * trials for simulate/study.
    double max_cells = kDefaultMaxCells;

    bool emits(Emit e) const { return emit.count(e) > 0; }
    SimulationConfig simulation_config() const;
};

/// Parses and validates a JSON config. `overrides` are "dotted.key=value" pairs
/// applied before validation; values parse as JSON and fall back to strings.
RunConfig parse_config(const std::string& text, const std::string& source, const std::vector<std::string>& overrides = {});

RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// "start:stop:step".
MGrid parse_m_grid(const std::string& text);

}  // namespace qmfg

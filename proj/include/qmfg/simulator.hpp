#pragma once

#include "qmfg/core_math.hpp"
#include "qmfg/model.hpp"
#include "qmfg/solver.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace qmfg {

/// Row-major rows x cols table of doubles.
class Array2D {
public:
    Array2D() = default;
    Array2D(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }
    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Standard normal draws for one agent in one trial. The engine seed is a
/// splitmix64 hash of (seed, trial, stream_id), so every stream can be
/// regenerated independently of scheduling. The first draw sets the initial
/// state, the following ones are the Brownian increments.
class NoiseStream {
public:
    NoiseStream(std::uint64_t seed, std::uint64_t trial, std::uint64_t stream_id);
    double next() { return normal_(engine_); }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

struct SimulationConfig {
    std::size_t n_agents = 2;
    TimeGrid grid{1.0, 2000};
    std::uint64_t seed = 20240601;
    std::size_t n_trials = 1;
    /// Worker threads, 0 for one per hardware thread; results do not depend on this.
    std::size_t workers = 1;
    /// Euler-Maruyama substeps per grid step, gains interpolated linearly.
    std::size_t substeps = 1;
    /// Optional noise stream id per agent; empty means agent i uses stream i.
    std::vector<std::uint64_t> stream_ids;

    std::uint64_t stream_id(std::size_t agent) const noexcept {
        return stream_ids.empty() ? static_cast<std::uint64_t>(agent) : stream_ids[agent];
    }
};

void validate(const SimulationConfig& config);

/// Finite-population trajectories under the decentralized MFG feedback law.
struct PopulationRun {
    TimeGrid grid{1.0, 2};
    Array2D states;     ///< n_agents x n_nodes
    Array2D controls;   ///< n_agents x n_steps, left-constant on each step
    ScalarPath pop_mean = ScalarPath::constant(TimeGrid{1.0, 2}, 0.0);
    Array2D emp_coeff;  ///< q (1 + exp(alpha-quantile of the other agents)), n_agents x n_nodes
    std::vector<double> costs;  ///< realized pathwise cost against the full population mean
    std::uint64_t seed = 0;
    std::uint64_t trial = 0;
    std::size_t substeps = 1;
    std::vector<std::uint64_t> stream_ids;

    std::size_t n_agents() const noexcept { return states.rows(); }
};

PopulationRun simulate_population(const ModelParams& params, const CoupledSolution& solution,
                                  const SimulationConfig& config, std::uint64_t trial = 0);

/// Composite trapezoid of weight * (x - reference)^2 over the nodes plus
/// r * sum u_k^2 dt with the control left-constant on each step.
double tracking_cost(std::span<const double> x, std::span<const double> reference, std::span<const double> weight,
                     std::span<const double> u, double r, const TimeGrid& grid);

/// Realized J_i, scored against the full population mean.
double realized_cost(const PopulationRun& run, std::size_t agent, const ModelParams& params);

/// Reference x^{n,-i}: mean of the other agents' states at every node.
std::vector<double> others_mean(const PopulationRun& run, std::size_t agent);

struct FrozenComparison {
    double cost_mfg = 0.0;            ///< agent's MFG trajectory scored against the frozen reference
    double cost_best_response = 0.0;  ///< optimal tracking of the frozen reference, same noise
};

/// Freezes the other agents' trajectories and solves agent i's LQ tracking
/// problem against x^{n,-i} with weight q_t(i,n), then re-simulates with the same
/// noise increments. Both policies are scored in the same frozen problem.
FrozenComparison frozen_comparison(const PopulationRun& run, std::size_t agent, const ModelParams& params);

double best_response_cost(const PopulationRun& run, std::size_t agent, const ModelParams& params);

struct GapStudyRow {
    std::size_t n_agents = 0;
    double mean_cost_mfg = 0.0;
    double mean_cost_best_response = 0.0;
    double cost_gap = 0.0;
    double cost_gap_stderr = 0.0;     ///< across trials
    double max_mean_deviation = 0.0;  ///< max_t |x^n - xbar|, averaged over trials
    double mean_cost_realized = 0.0;  ///< J_i against the full population mean
};

/// Per-trial, per-agent costs feeding a GapStudyRow.
struct StudyTrial {
    std::size_t n_agents = 0;
    std::uint64_t trial = 0;
    std::vector<double> realized;
    std::vector<double> mfg_frozen;
    std::vector<double> best_response;
    double max_mean_deviation = 0.0;
};

struct GapStudy {
    std::vector<GapStudyRow> rows;
    std::vector<StudyTrial> trials;  ///< grouped by n, then trial
};

/// One trial: simulate n agents and evaluate every agent's frozen comparison.
StudyTrial evaluate_trial(const ModelParams& params, const CoupledSolution& solution, const SimulationConfig& config,
                          std::uint64_t trial);

GapStudy run_gap_study(const ModelParams& params, const CoupledSolution& solution, std::span<const std::size_t> n_list,
                       std::size_t trials, std::uint64_t seed, std::size_t workers = 1);

std::vector<GapStudyRow> gap_study(const ModelParams& params, const CoupledSolution& solution,
                                   std::span<const std::size_t> n_list, std::size_t trials, std::uint64_t seed,
                                   std::size_t workers = 1);

/// 0 maps to the hardware thread count.
std::size_t resolve_workers(std::size_t requested) noexcept;

/// Runs fn(i) for i in [0, count) on up to `workers` threads with a static split.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace qmfg

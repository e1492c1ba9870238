#include "qmfg/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

namespace qmfg {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

NoiseStream::NoiseStream(std::uint64_t seed, std::uint64_t trial, std::uint64_t stream_id)
    : engine_(splitmix64(splitmix64(splitmix64(seed) ^ trial) ^ stream_id)) {}

void validate(const SimulationConfig& c) {
    if (c.n_agents < 2) throw ValidationError("simulation.n_agents must be >= 2 (the quantile of the other agents needs at least one)");
    if (c.n_trials < 1) throw ValidationError("simulation.n_trials must be >= 1");
    if (c.substeps < 1) throw ValidationError("simulation.substeps must be >= 1");
    if (!c.stream_ids.empty() && c.stream_ids.size() != c.n_agents) {
        throw ValidationError("simulation.stream_ids must list one stream per agent");
    }
}

std::size_t resolve_workers(std::size_t requested) noexcept {
    if (requested > 0) return requested;
    return std::max<std::size_t>(std::thread::hardware_concurrency(), 1);
}

void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    workers = std::min(resolve_workers(workers), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::exception_ptr error;
    std::mutex error_mutex;
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t lo = count * w / workers;
            const std::size_t hi = count * (w + 1) / workers;
            pool.emplace_back([&, lo, hi] {
                try {
                    for (std::size_t i = lo; i < hi; ++i) fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            });
        }
    }
    if (error) std::rethrow_exception(error);
}

namespace {

// Euler-Maruyama under u = -(b/r)(Pi x + s). Writes n_nodes states and n_steps controls.
void simulate_agent(double x0, const ScalarPath& pi, const ScalarPath& offset, NoiseStream& noise,
                    const ModelParams& params, std::size_t substeps, std::span<double> x_out, std::span<double> u_out) {
    const TimeGrid& grid = pi.grid();
    const double h = grid.dt() / static_cast<double>(substeps);
    const double noise_scale = params.sigma * std::sqrt(h);
    double x = x0;
    x_out[0] = x;
    for (std::size_t k = 0; k < grid.n_steps(); ++k) {
        for (std::size_t j = 0; j < substeps; ++j) {
            double pi_j = pi[k];
            double s_j = offset[k];
            if (j > 0) {
                const double w = static_cast<double>(j) / static_cast<double>(substeps);
                pi_j += w * (pi[k + 1] - pi[k]);
                s_j += w * (offset[k + 1] - offset[k]);
            }
            const double u = feedback_control(pi_j, s_j, x, params);
            if (j == 0) u_out[k] = u;
            x = x + (params.a * x + params.b * u) * h + noise_scale * noise.next();
        }
        x_out[k + 1] = x;
    }
}

double initial_state(NoiseStream& noise, const ModelParams& params) {
    return params.mu0 + std::sqrt(params.V0) * noise.next();
}

}  // namespace

PopulationRun simulate_population(const ModelParams& params, const CoupledSolution& solution,
                                  const SimulationConfig& config, std::uint64_t trial) {
    validate(params);
    validate(config);
    if (!(config.grid == solution.grid())) {
        throw GridMismatchError("simulate_population: simulation grid differs from the solution grid");
    }
    const TimeGrid& grid = config.grid;
    const std::size_t n = config.n_agents;
    const std::size_t nodes = grid.n_nodes();

    PopulationRun run;
    run.grid = grid;
    run.states = Array2D(n, nodes);
    run.controls = Array2D(n, grid.n_steps());
    run.emp_coeff = Array2D(n, nodes);
    run.costs.assign(n, 0.0);
    run.seed = config.seed;
    run.trial = trial;
    run.substeps = config.substeps;
    run.stream_ids.resize(n);
    for (std::size_t i = 0; i < n; ++i) run.stream_ids[i] = config.stream_id(i);

    // The decentralized law makes agents independent given the gains, so the
    // paths can be produced per agent; the population statistics follow per node.
    parallel_for(n, config.workers, [&](std::size_t i) {
        NoiseStream noise(config.seed, trial, run.stream_ids[i]);
        const double x0 = initial_state(noise, params);
        simulate_agent(x0, solution.pi, solution.offset, noise, params, config.substeps, run.states.row(i),
                       run.controls.row(i));
    });

    const std::size_t k_rank = empirical_quantile_rank(n - 1, params.alpha);
    std::vector<double> mean(nodes);
    const std::size_t node_workers = std::clamp<std::size_t>(resolve_workers(config.workers), 1, nodes);
    parallel_for(node_workers, node_workers, [&](std::size_t w) {
        std::vector<double> column(n);
        for (std::size_t k = nodes * w / node_workers; k < nodes * (w + 1) / node_workers; ++k) {
            double sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                column[i] = run.states(i, k);
                sum += column[i];
            }
            mean[k] = sum / static_cast<double>(n);
            std::sort(column.begin(), column.end());
            // Removing x_i from the sorted column: the k-th smallest of the rest
            // is column[k-1] when x_i lies strictly above it, otherwise column[k].
            const double below = column[k_rank - 1];
            const double above = column[k_rank];
            const double coeff_below = params.q * (1.0 + std::exp(below));
            const double coeff_above = params.q * (1.0 + std::exp(above));
            for (std::size_t i = 0; i < n; ++i) {
                run.emp_coeff(i, k) = run.states(i, k) > below ? coeff_below : coeff_above;
            }
        }
    });
    run.pop_mean = ScalarPath(grid, std::move(mean));

    parallel_for(n, config.workers, [&](std::size_t i) { run.costs[i] = realized_cost(run, i, params); });
    return run;
}

double tracking_cost(std::span<const double> x, std::span<const double> reference, std::span<const double> weight,
                     std::span<const double> u, double r, const TimeGrid& grid) {
    const std::size_t nodes = grid.n_nodes();
    const double dt = grid.dt();
    double running = 0.0;
    for (std::size_t k = 0; k < nodes; ++k) {
        const double d = x[k] - reference[k];
        const double term = weight[k] * d * d;
        running += (k == 0 || k + 1 == nodes) ? 0.5 * term : term;
    }
    double effort = 0.0;
    for (std::size_t k = 0; k < grid.n_steps(); ++k) effort += u[k] * u[k];
    return running * dt + r * effort * dt;
}

namespace {

void require_agent(const PopulationRun& run, std::size_t agent) {
    if (agent >= run.n_agents()) {
        std::ostringstream msg;
        msg << "agent index " << agent << " out of range for " << run.n_agents() << " agents";
        throw std::out_of_range(msg.str());
    }
}

}  // namespace

double realized_cost(const PopulationRun& run, std::size_t agent, const ModelParams& params) {
    require_agent(run, agent);
    return tracking_cost(run.states.row(agent), run.pop_mean.values(), run.emp_coeff.row(agent),
                         run.controls.row(agent), params.r, run.grid);
}

std::vector<double> others_mean(const PopulationRun& run, std::size_t agent) {
    require_agent(run, agent);
    const double n = static_cast<double>(run.n_agents());
    std::vector<double> z(run.grid.n_nodes());
    for (std::size_t k = 0; k < z.size(); ++k) {
        z[k] = (n * run.pop_mean[k] - run.states(agent, k)) / (n - 1.0);
    }
    return z;
}

FrozenComparison frozen_comparison(const PopulationRun& run, std::size_t agent, const ModelParams& params) {
    require_agent(run, agent);
    const TimeGrid& grid = run.grid;
    const auto states = run.states.row(agent);
    const auto weight_row = run.emp_coeff.row(agent);
    ScalarPath reference(grid, others_mean(run, agent));
    ScalarPath weight(grid, std::vector<double>(weight_row.begin(), weight_row.end()));

    FrozenComparison out;
    out.cost_mfg = tracking_cost(states, reference.values(), weight.values(), run.controls.row(agent), params.r, grid);

    ScalarPath pi_br = riccati_backward(weight, params);
    ScalarPath s_br = offset_backward(pi_br, weight, reference, params);
    NoiseStream noise(run.seed, run.trial, run.stream_ids[agent]);
    noise.next();  // initial-state draw; the stored x_i(0) is reused
    std::vector<double> x(grid.n_nodes());
    std::vector<double> u(grid.n_steps());
    simulate_agent(states[0], pi_br, s_br, noise, params, run.substeps, x, u);
    out.cost_best_response = tracking_cost(x, reference.values(), weight.values(), u, params.r, grid);
    return out;
}

double best_response_cost(const PopulationRun& run, std::size_t agent, const ModelParams& params) {
    return frozen_comparison(run, agent, params).cost_best_response;
}

StudyTrial evaluate_trial(const ModelParams& params, const CoupledSolution& solution, const SimulationConfig& config,
                          std::uint64_t trial) {
    PopulationRun run = simulate_population(params, solution, config, trial);
    const std::size_t n = config.n_agents;
    StudyTrial out;
    out.n_agents = n;
    out.trial = trial;
    out.realized = run.costs;
    out.mfg_frozen.assign(n, 0.0);
    out.best_response.assign(n, 0.0);
    parallel_for(n, config.workers, [&](std::size_t i) {
        const FrozenComparison c = frozen_comparison(run, i, params);
        out.mfg_frozen[i] = c.cost_mfg;
        out.best_response[i] = c.cost_best_response;
    });
    out.max_mean_deviation = sup_distance(run.pop_mean, solution.mean);
    return out;
}

namespace {

double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace

GapStudy run_gap_study(const ModelParams& params, const CoupledSolution& solution, std::span<const std::size_t> n_list,
                       std::size_t trials, std::uint64_t seed, std::size_t workers) {
    if (n_list.empty()) throw ValidationError("study.n_list must not be empty");
    if (trials < 1) throw ValidationError("study.trials must be >= 1");
    for (std::size_t j = 0; j < n_list.size(); ++j) {
        if (n_list[j] < 2) throw ValidationError("study.n_list entries must be >= 2");
        if (j > 0 && !(n_list[j] > n_list[j - 1])) throw ValidationError("study.n_list must be strictly increasing");
    }
    GapStudy study;
    for (std::size_t n : n_list) {
        std::vector<StudyTrial> per_trial(trials);
        // Trials run in parallel, each single-threaded inside.
        parallel_for(trials, workers, [&](std::size_t t) {
            SimulationConfig cfg{.n_agents = n, .grid = solution.grid(), .seed = seed, .n_trials = trials, .workers = 1, .substeps = 1, .stream_ids = {}};
            per_trial[t] = evaluate_trial(params, solution, cfg, t);
        });

        GapStudyRow row;
        row.n_agents = n;
        std::vector<double> gaps(trials);
        for (std::size_t t = 0; t < trials; ++t) {
            const StudyTrial& tr = per_trial[t];
            const double mfg = mean_of(tr.mfg_frozen);
            const double br = mean_of(tr.best_response);
            row.mean_cost_mfg += mfg;
            row.mean_cost_best_response += br;
            row.mean_cost_realized += mean_of(tr.realized);
            row.max_mean_deviation += tr.max_mean_deviation;
            gaps[t] = mfg - br;
        }
        const double nt = static_cast<double>(trials);
        row.mean_cost_mfg /= nt;
        row.mean_cost_best_response /= nt;
        row.mean_cost_realized /= nt;
        row.max_mean_deviation /= nt;
        row.cost_gap = mean_of(gaps);
        if (trials > 1) {
            double ss = 0.0;
            for (double g : gaps) ss += (g - row.cost_gap) * (g - row.cost_gap);
            row.cost_gap_stderr = std::sqrt(ss / (nt - 1.0)) / std::sqrt(nt);
        }
        study.rows.push_back(row);
        for (StudyTrial& tr : per_trial) study.trials.push_back(std::move(tr));
    }
    return study;
}

std::vector<GapStudyRow> gap_study(const ModelParams& params, const CoupledSolution& solution,
                                   std::span<const std::size_t> n_list, std::size_t trials, std::uint64_t seed,
                                   std::size_t workers) {
    return run_gap_study(params, solution, n_list, trials, seed, workers).rows;
}

}  // namespace qmfg

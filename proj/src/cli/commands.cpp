#include "qmfg/cli.hpp"

#include "qmfg/conditions.hpp"
#include "qmfg/errors.hpp"
#include "qmfg/io.hpp"
#include "qmfg/simulator.hpp"
#include "qmfg/solver.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <limits>
#include <ostream>

namespace qmfg::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::vector<double> values_of(const ScalarPath& p) { return {p.values().begin(), p.values().end()}; }

std::vector<double> nodes_of(const TimeGrid& g) {
    std::vector<double> t(g.n_nodes());
    for (std::size_t k = 0; k < t.size(); ++k) t[k] = g.node(k);
    return t;
}

void write_paths_csv(const fs::path& path, const CoupledSolution& sol) {
    std::string out = "t,pi,V,q_alpha,s,xbar\n";
    const TimeGrid& g = sol.grid();
    for (std::size_t k = 0; k < g.n_nodes(); ++k) {
        io::append_double(out, g.node(k));
        for (const ScalarPath* p : {&sol.pi, &sol.variance, &sol.q_alpha, &sol.offset, &sol.mean}) {
            out.push_back(',');
            io::append_double(out, (*p)[k]);
        }
        out.push_back('\n');
    }
    io::write_file_atomic(path, out);
}

void write_json(const fs::path& path, const json& j) { io::write_file_atomic(path, j.dump(2) + "\n"); }

// Solves and reports; returns nullopt (after logging) on non-convergence.
std::optional<CoupledSolution> solve_or_report(const RunConfig& config, std::ostream& log) {
    CoupledSolution sol = solve_fixed_point(config.model, config.solver);
    log << "solve: iterations=" << sol.iterations << " final_update_norm=" << io::format_double(sol.final_update_norm)
        << " converged=" << (sol.converged ? "true" : "false") << "\n";
    if (!sol.converged) return std::nullopt;
    return sol;
}

bool within_budget(double cells, const RunConfig& config, std::ostream& log) {
    if (cells > config.max_cells) {
        log << "refusing: n_agents * n_steps * trials = " << cells << " exceeds max_cells = " << config.max_cells
            << "\n";
        return false;
    }
    return true;
}

}  // namespace

int cmd_solve(const RunConfig& config, std::ostream& log) {
    const CoupledSolution sol = solve_fixed_point(config.model, config.solver);
    const fs::path dir = config.output_dir;
    if (config.emits(Emit::PathsCsv)) write_paths_csv(dir / "paths.csv", sol);
    if (config.emits(Emit::SummaryJson)) {
        write_json(dir / "summary.json", json{{"iterations", sol.iterations},
                                              {"final_update_norm", sol.final_update_norm},
                                              {"pi0", sol.pi.front()},
                                              {"vT", sol.variance.back()},
                                              {"converged", sol.converged}});
    }
    if (config.emits(Emit::PlotData)) {
        const fs::path pd = dir / "plotdata";
        const auto t = nodes_of(sol.grid());
        io::write_series(pd / "pi.csv", "t", "pi", t, values_of(sol.pi));
        io::write_series(pd / "variance.csv", "t", "V", t, values_of(sol.variance));
        io::write_series(pd / "q_alpha.csv", "t", "q_alpha", t, values_of(sol.q_alpha));
        io::write_series(pd / "offset.csv", "t", "s", t, values_of(sol.offset));
        const CoupledSolution base = solve_constant_coefficient(config.model, sol.grid());
        io::write_series(pd / "pi_constant_coefficient.csv", "t", "pi", t, values_of(base.pi));
        io::write_series(pd / "variance_constant_coefficient.csv", "t", "V", t, values_of(base.variance));
    }
    log << "solve: iterations=" << sol.iterations << " final_update_norm=" << io::format_double(sol.final_update_norm)
        << " pi0=" << io::format_double(sol.pi.front()) << " vT=" << io::format_double(sol.variance.back())
        << " converged=" << (sol.converged ? "true" : "false") << "\n";
    if (!sol.converged) {
        log << "solve: NonConvergence after " << sol.iterations << " iterations; outputs are flagged\n";
        return kNonConvergence;
    }
    return kSuccess;
}

int cmd_check(const RunConfig& config, const CheckTarget& target, std::ostream& log) {
    std::optional<double> m = target.m;
    std::optional<MGrid> grid = target.grid;
    if (!m && !grid) {
        m = config.check.m;
        grid = config.check.grid;
        if (!m && !grid) grid = MGrid{};
    }

    ConditionReport report;
    std::optional<double> witness;
    if (m) {
        report = check(config.model, *m);
        if (report.both_hold()) witness = *m;
    } else {
        const std::vector<double> ms = make_m_grid(grid->start, grid->stop, grid->step);
        witness = search_witness(config.model, ms);
        if (witness) {
            report = check(config.model, *witness);
        } else {
            // No witness: report the grid point closest to satisfying existence.
            double best = std::numeric_limits<double>::infinity();
            for (double mv : ms) {
                const ConditionReport r = check(config.model, mv);
                if (r.existence_lhs - mv < best) {
                    best = r.existence_lhs - mv;
                    report = r;
                }
            }
        }
        log << "check: scanned " << ms.size() << " values of m in [" << grid->start << ", " << grid->stop << "]\n";
    }

    log << "check: mu_star=" << io::format_double(report.mu_star) << " m=" << io::format_double(report.m_witness)
        << "\n  existence_lhs=" << io::format_double(report.existence_lhs)
        << " holds=" << (report.existence_holds ? "true" : "false")
        << "\n  contraction_lhs=" << io::format_double(report.contraction_lhs)
        << " holds=" << (report.contraction_holds ? "true" : "false")
        << "\n  witness=" << (witness ? io::format_double(*witness) : std::string("none")) << "\n";

    write_json(fs::path(config.output_dir) / "conditions.json",
               json{{"mu_star", report.mu_star},
                    {"m", report.m_witness},
                    {"existence_lhs", report.existence_lhs},
                    {"existence_holds", report.existence_holds},
                    {"contraction_lhs", report.contraction_lhs},
                    {"contraction_holds", report.contraction_holds},
                    {"witness", witness ? json(*witness) : json(nullptr)}});
    return witness ? kSuccess : kConditionsFail;
}

int cmd_simulate(const RunConfig& config, std::ostream& log) {
    if (!config.simulation) throw ConfigError("simulate: config has no simulation section");
    const SimulationConfig sim = config.simulation_config();
    const double cells = static_cast<double>(sim.n_agents) * static_cast<double>(sim.grid.n_steps()) *
                         static_cast<double>(sim.n_trials);
    if (!within_budget(cells, config, log)) return kResourceRefusal;
    const auto sol = solve_or_report(config, log);
    if (!sol) return kNonConvergence;

    const fs::path dir = config.output_dir;
    io::AtomicFile population(dir / "population.csv");
    io::AtomicFile pop_mean(dir / "pop_mean.csv");
    io::AtomicFile costs(dir / "costs.csv");
    io::AtomicFile realized(dir / "realized_costs.csv");
    population.write("trial,agent,t,x,u,q_emp\n");
    pop_mean.write("trial,t,xbar_n\n");
    costs.write("trial,agent,cost_mfg,cost_best_response\n");
    realized.write("trial,agent,cost_realized\n");

    const TimeGrid& grid = sim.grid;
    std::string buf;
    for (std::size_t trial = 0; trial < sim.n_trials; ++trial) {
        const PopulationRun run = simulate_population(config.model, *sol, sim, trial);
        std::vector<FrozenComparison> cmp(sim.n_agents);
        parallel_for(sim.n_agents, sim.workers,
                     [&](std::size_t i) { cmp[i] = frozen_comparison(run, i, config.model); });
        const std::string trial_prefix = std::to_string(trial) + ",";
        for (std::size_t i = 0; i < sim.n_agents; ++i) {
            const std::string agent_prefix = trial_prefix + std::to_string(i) + ",";
            buf.clear();
            for (std::size_t k = 0; k < grid.n_nodes(); ++k) {
                buf += agent_prefix;
                io::append_double(buf, grid.node(k));
                buf.push_back(',');
                io::append_double(buf, run.states(i, k));
                buf.push_back(',');
                // No control acts at the terminal node.
                io::append_double(buf, k < grid.n_steps() ? run.controls(i, k) : 0.0);
                buf.push_back(',');
                io::append_double(buf, run.emp_coeff(i, k));
                buf.push_back('\n');
            }
            population.write(buf);

            buf = agent_prefix;
            io::append_double(buf, cmp[i].cost_mfg);
            buf.push_back(',');
            io::append_double(buf, cmp[i].cost_best_response);
            buf.push_back('\n');
            costs.write(buf);

            buf = agent_prefix;
            io::append_double(buf, run.costs[i]);
            buf.push_back('\n');
            realized.write(buf);
        }
        buf.clear();
        for (std::size_t k = 0; k < grid.n_nodes(); ++k) {
            buf += trial_prefix;
            io::append_double(buf, grid.node(k));
            buf.push_back(',');
            io::append_double(buf, run.pop_mean[k]);
            buf.push_back('\n');
        }
        pop_mean.write(buf);
    }
    population.commit();
    pop_mean.commit();
    costs.commit();
    realized.commit();
    log << "simulate: " << sim.n_trials << " trial(s) of " << sim.n_agents << " agents written to " << dir.string()
        << "\n";
    return kSuccess;
}

int cmd_study(const RunConfig& config, std::ostream& log) {
    if (!config.study) throw ConfigError("study: config has no study section");
    const StudySection& st = *config.study;
    if (st.n_list.empty()) throw ConfigError("study.n_list: must not be empty");
    const double cells = static_cast<double>(st.n_list.back()) * static_cast<double>(config.solver.grid.n_steps()) *
                         static_cast<double>(st.trials);
    if (!within_budget(cells, config, log)) return kResourceRefusal;
    const auto sol = solve_or_report(config, log);
    if (!sol) return kNonConvergence;

    const std::size_t workers = config.simulation ? config.simulation->workers : 1;
    const GapStudy study = run_gap_study(config.model, *sol, st.n_list, st.trials, config.seed, workers);
    const fs::path dir = config.output_dir;

    if (config.emits(Emit::GapCsv)) {
        std::string out = "n,mean_cost_mfg,mean_cost_br,cost_gap,max_mean_dev\n";
        for (const GapStudyRow& r : study.rows) {
            out += std::to_string(r.n_agents);
            for (double v : {r.mean_cost_mfg, r.mean_cost_best_response, r.cost_gap, r.max_mean_deviation}) {
                out.push_back(',');
                io::append_double(out, v);
            }
            out.push_back('\n');
        }
        io::write_file_atomic(dir / "gap_study.csv", out);
    }
    if (config.emits(Emit::PlotData)) {
        const fs::path pd = dir / "plotdata";
        std::vector<double> n, gap, gap_se, dev;
        for (const GapStudyRow& r : study.rows) {
            n.push_back(static_cast<double>(r.n_agents));
            gap.push_back(r.cost_gap);
            gap_se.push_back(r.cost_gap_stderr);
            dev.push_back(r.max_mean_deviation);
        }
        io::write_series(pd / "cost_gap_vs_n.csv", "n", "cost_gap", n, gap);
        io::write_series(pd / "cost_gap_stderr_vs_n.csv", "n", "cost_gap_stderr", n, gap_se);
        io::write_series(pd / "max_mean_dev_vs_n.csv", "n", "max_mean_dev", n, dev);

        // Per-agent costs at the largest population: one realization (trial 0)
        // scored against the frozen others, and the trial-averaged realized cost.
        const std::size_t n_max = st.n_list.back();
        std::vector<double> agents(n_max), br0, mfg0, averaged(n_max, 0.0);
        for (std::size_t i = 0; i < n_max; ++i) agents[i] = static_cast<double>(i);
        for (const StudyTrial& tr : study.trials) {
            if (tr.n_agents != n_max) continue;
            if (tr.trial == 0) {
                br0 = tr.best_response;
                mfg0 = tr.mfg_frozen;
            }
            for (std::size_t i = 0; i < n_max; ++i) averaged[i] += tr.realized[i] / static_cast<double>(st.trials);
        }
        io::write_series(pd / "agent_cost_best_response_realized.csv", "agent", "cost", agents, br0);
        io::write_series(pd / "agent_cost_mfg_frozen_realized.csv", "agent", "cost", agents, mfg0);
        io::write_series(pd / "agent_cost_mfg_trial_average.csv", "agent", "cost", agents, averaged);

        const auto t = nodes_of(sol->grid());
        io::write_series(pd / "pi.csv", "t", "pi", t, values_of(sol->pi));
        io::write_series(pd / "variance.csv", "t", "V", t, values_of(sol->variance));
    }
    for (const GapStudyRow& r : study.rows) {
        log << "study: n=" << r.n_agents << " cost_gap=" << io::format_double(r.cost_gap)
            << " (se " << io::format_double(r.cost_gap_stderr) << ") max_mean_dev="
            << io::format_double(r.max_mean_deviation) << "\n";
    }
    return kSuccess;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Linear-quadratic quantile mean field games: solve, check, simulate, study"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> sets;
    std::string output_dir;
    std::optional<std::uint64_t> seed;
    std::optional<double> m;
    std::string m_grid;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file")->required();
        sub->add_option("--set", sets, "override a config key, e.g. --set model.alpha=0.9")->take_all();
        sub->add_option("--output-dir", output_dir, "directory for output files");
        sub->add_option("--seed", seed, "master seed for simulation");
        return sub;
    };
    CLI::App* solve = common(app.add_subcommand("solve", "solve the coupled system and write the paths"));
    CLI::App* chk = common(app.add_subcommand("check", "evaluate the existence and contraction conditions"));
    chk->add_option("--m", m, "ball radius to test");
    chk->add_option("--m-grid", m_grid, "scan grid start:stop:step");
    CLI::App* simulate = common(app.add_subcommand("simulate", "simulate a finite population under the MFG law"));
    CLI::App* study = common(app.add_subcommand("study", "cost gap and mean deviation across population sizes"));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kSuccess : kConfigError;
    }

    try {
        RunConfig config = load_config(config_path, sets);
        if (!output_dir.empty()) config.output_dir = output_dir;
        if (seed) config.seed = *seed;
        if (solve->parsed()) return cmd_solve(config, out);
        if (simulate->parsed()) return cmd_simulate(config, out);
        if (study->parsed()) return cmd_study(config, out);
        CheckTarget target;
        target.m = m;
        if (!m_grid.empty()) target.grid = parse_m_grid(m_grid);
        if (m && target.grid) throw ConfigError("check: give --m or --m-grid, not both");
        if (m && !(*m > 0.0)) throw ConfigError("--m: must be positive");
        return cmd_check(config, target, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const NonConvergenceError& e) {
        err << "NonConvergence: " << e.what() << "\n";
        return kNonConvergence;
    } catch (const OverflowError& e) {
        err << "NonConvergence: " << e.what() << "\n";
        return kNonConvergence;
    } catch (const std::invalid_argument& e) {
        err << "invalid input: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kConfigError;
    }
}

}  // namespace qmfg::cli

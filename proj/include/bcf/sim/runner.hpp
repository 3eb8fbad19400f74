#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "bcf/comm.hpp"
#include "bcf/consensus.hpp"
#include "bcf/hierarchy.hpp"
#include "bcf/sim/models.hpp"
#include "bcf/sim/scenario.hpp"

// Deterministic multi-agent runs: drives truth, measurements, the filter
// steps and the consensus stage, and records a metrics stream suitable for
// regression comparison (fixed row order, fixed float formatting).

namespace bcf::sim {

// One full-observer filter step (every agent may update): predict, update,
// then n_loop consensus rounds. The consensual reference is the
// stationary-weighted pool of the post-update densities.
inline StepResult run_bcf_step(std::span<const GridDensity> previous,
                               const TransitionKernel& kernel,
                               std::span<const std::vector<Measurement>> measurements,
                               std::span<const LikelihoodFn> models, const WeightMatrix& P,
                               const Eigen::VectorXd& pi, const StepConfig& cfg) {
    const std::size_t m = previous.size();
    if (measurements.size() != m) throw ConfigError("bcf step: agent count mismatch");
    if (cfg.n_loop < 0) throw ConfigError("bcf step: n_loop must be nonnegative");
    require_row_stochastic(P);

    std::vector<GridDensity> current;
    current.reserve(m);
    for (std::size_t j = 0; j < m; ++j)
        current.push_back(update_with_exchange(predict(previous[j], kernel, cfg.density),
                                               measurements[j], models, cfg.density));

    GridDensity consensual = consensual_pdf(current, pi, cfg.pool, cfg.density);
    StepResult result{std::move(current), std::move(consensual), {}};
    result.per_loop.reserve(static_cast<std::size_t>(cfg.n_loop) + 1);
    result.per_loop.push_back(disagreement(result.densities, result.consensual));
    if (cfg.observer) cfg.observer(0, result.densities, result.consensual);
    for (int nu = 1; nu <= cfg.n_loop; ++nu) {
        result.densities =
            consensus_round(result.densities, P, cfg.pool, cfg.hook, nu, cfg.density);
        result.per_loop.push_back(disagreement(result.densities, result.consensual));
        if (cfg.observer) cfg.observer(nu, result.densities, result.consensual);
    }
    return result;
}

struct MetricsRow {
    std::size_t k = 0;
    int nu = 0;
    std::size_t agent = 0;
    double l1_to_consensual = 0.0;
    double theta_l2 = 0.0;
    double sigma = 0.0;
    double achieved_eps_comm = 0.0;
    std::vector<double> est_mean;
    std::vector<double> true_state;
};

struct StepSummary {
    std::size_t k = 0;
    std::size_t m1 = 0;
    double sigma = 0.0;
    int n_loop = 0;
    double theta_end = 0.0;
    bool degraded = false;        // hierarchical step with no tracking agents
    bool bound_satisfied = false; // theta_end <= eps_cons
    double max_channel_error = 0.0;
    std::size_t fit_target_missed = 0; // gaussian-sum fits that missed eps_comm
};

struct RunResult {
    ScenarioConfig cfg;
    std::vector<MetricsRow> rows;
    std::vector<StepSummary> steps;
    std::vector<std::vector<double>> truth;       // truth at k = 1..steps
    std::vector<GridDensity> per_step_consensual; // reference at each step
    std::vector<GridDensity> final_densities;
};

// Initial-disagreement policy for auto loop planning: receives the previous
// step's final disagreement norm, returns the gamma to plan with (clamped to
// the worst case 2*sqrt(m)).
using GammaPolicy = std::function<double(double prev_theta_end, std::size_t m)>;

inline RunResult run_scenario(const ScenarioConfig& cfg, const GammaPolicy& gamma_policy = {}) {
    const StateGrid grid = build_grid(cfg);
    const TransitionKernel kernel = build_kernel(cfg, grid);
    const std::vector<LikelihoodFn> sensors = build_sensors(cfg);
    const Digraph topology = build_topology(cfg);
    const std::size_t m = cfg.count;

    const WeightMatrix P_full = make_balanced_weights(topology, cfg.weight_method);
    const Eigen::VectorXd pi_full = m == 1 ? Eigen::VectorXd::Ones(1)
                                           : stationary_distribution(P_full);
    const double sigma_full = m >= 2 ? second_largest_singular_value(P_full) : 0.0;

    RunResult result;
    result.cfg = cfg;

    std::vector<GridDensity> densities(m, GridDensity::uniform(grid));
    std::vector<double> truth = cfg.truth_initial;
    double prev_theta_end = max_disagreement(m);

    for (std::size_t k = 1; k <= cfg.steps; ++k) {
        // Truth propagation (own substream per step).
        {
            auto gen = make_rng(derive_seed(cfg.seed, Stream::TruthProcess, k));
            std::vector<double> next(truth.size());
            detail::step_dynamics(cfg, truth, next, gen, cfg.truth_stochastic);
            truth = std::move(next);
        }
        result.truth.push_back(truth);

        // Measurements and exchange: agent j updates with every measurement
        // taken by itself or (when exchange is on) by an in-neighbor.
        const std::vector<std::size_t> visible = visible_agents(cfg, k);
        std::vector<Measurement> taken;
        taken.reserve(visible.size());
        for (std::size_t j : visible) taken.push_back(draw_measurement(cfg, j, k, truth));
        std::vector<std::vector<Measurement>> lists(m);
        for (const auto& z : taken) {
            lists[z.agent].push_back(z);
            if (cfg.measurement_exchange)
                for (std::size_t j : topology.out_neighbors(z.agent)) lists[j].push_back(z);
        }

        const bool hierarchical = cfg.mode == RunMode::Hbcf;
        const bool degraded = hierarchical && visible.empty();
        TrackingPartition partition = hierarchical && !degraded
                                          ? TrackingPartition(m, visible)
                                          : TrackingPartition::all_tracking(m);

        WeightMatrix P_k = P_full;
        double sigma_k = sigma_full;
        if (hierarchical && !degraded) {
            P_k = make_hierarchical_weights(topology, partition, cfg.weight_method);
            if (partition.m1() >= 2) {
                const WeightMatrix block = to_block_form(P_k, partition);
                sigma_k = second_largest_singular_value(
                    block.topLeftCorner(static_cast<Eigen::Index>(partition.m1()),
                                        static_cast<Eigen::Index>(partition.m1())));
            } else {
                sigma_k = 0.0;
            }
            // Hierarchical updates are driven by tracking agents only.
            for (std::size_t j : partition.non_tracking_ids()) lists[j].clear();
            for (std::size_t j : partition.tracking_ids()) {
                std::erase_if(lists[j], [&](const Measurement& z) {
                    return !partition.is_tracking(z.agent);
                });
            }
        }

        int n_loop = cfg.n_loop;
        if (cfg.n_loop_auto) {
            const double worst = max_disagreement(m);
            const double gamma =
                gamma_policy ? std::min(gamma_policy(prev_theta_end, m), worst) : worst;
            n_loop = plan_n_loop(sigma_k, gamma, cfg.eps_cons, cfg.eps_comm_budget, m);
        }

        // Channel bookkeeping, filled by the transmit hook.
        std::vector<std::vector<double>> channel_err(
            static_cast<std::size_t>(n_loop) + 1, std::vector<double>(m, 0.0));
        StepSummary step;
        step.k = k;
        step.m1 = degraded ? 0 : partition.m1();
        step.sigma = sigma_k;
        step.n_loop = n_loop;
        step.degraded = degraded;

        StepConfig sc;
        sc.pool = cfg.pool;
        sc.n_loop = n_loop;
        sc.hook = [&](const GridDensity& p, std::size_t sender, int loop) {
            const TransmitResult tr =
                transmit(p, cfg.channel,
                         derive_seed(derive_seed(cfg.seed, Stream::ChannelFit, k,
                                                 static_cast<std::uint64_t>(loop)),
                                     Stream::ChannelFit, sender));
            channel_err[static_cast<std::size_t>(loop)][sender] = tr.achieved_l1;
            step.max_channel_error = std::max(step.max_channel_error, tr.achieved_l1);
            if (!tr.target_met) ++step.fit_target_missed;
            return tr.density;
        };
        sc.observer = [&](int nu, std::span<const GridDensity> current,
                          const GridDensity& consensual) {
            const Disagreement dis = disagreement(current, consensual);
            for (std::size_t j = 0; j < m; ++j) {
                MetricsRow row;
                row.k = k;
                row.nu = nu;
                row.agent = j;
                row.l1_to_consensual = dis.per_agent[j];
                row.theta_l2 = dis.l2;
                row.sigma = sigma_k;
                row.achieved_eps_comm = channel_err[static_cast<std::size_t>(nu)][j];
                const Moments mom = moments(current[j]);
                row.est_mean.assign(mom.mean.data(), mom.mean.data() + mom.mean.size());
                row.true_state = truth;
                result.rows.push_back(std::move(row));
            }
            if (nu == sc.n_loop) step.theta_end = dis.l2;
        };

        StepResult sr = hierarchical && !degraded
                            ? run_hbcf_step(densities, kernel, lists, sensors, P_k, partition, sc)
                            : run_bcf_step(densities, kernel, lists, sensors, P_k, pi_full, sc);

        step.bound_satisfied = step.theta_end <= cfg.eps_cons;
        result.steps.push_back(step);
        result.per_step_consensual.push_back(sr.consensual);
        densities = std::move(sr.densities);
        prev_theta_end = step.theta_end;
    }

    result.final_densities = std::move(densities);
    return result;
}

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace detail

inline void write_metrics_csv(const RunResult& result, std::ostream& out) {
    const std::size_t dims = result.cfg.lower.size();
    out << "k,nu,agent,l1_to_consensual,theta_l2,sigma,achieved_eps_comm";
    for (std::size_t d = 0; d < dims; ++d) out << ",est_mean_" << d;
    for (std::size_t d = 0; d < dims; ++d) out << ",true_state_" << d;
    out << "\n";
    for (const auto& row : result.rows) {
        out << row.k << ',' << row.nu << ',' << row.agent << ','
            << detail::format_double(row.l1_to_consensual) << ','
            << detail::format_double(row.theta_l2) << ',' << detail::format_double(row.sigma)
            << ',' << detail::format_double(row.achieved_eps_comm);
        for (double v : row.est_mean) out << ',' << detail::format_double(v);
        for (double v : row.true_state) out << ',' << detail::format_double(v);
        out << "\n";
    }
}

inline nlohmann::json summary_json(const RunResult& result) {
    const auto& cfg = result.cfg;
    nlohmann::json steps = nlohmann::json::array();
    double max_err = 0.0;
    nlohmann::json degraded = nlohmann::json::array();
    for (const auto& s : result.steps) {
        steps.push_back({{"k", s.k},
                         {"m1", s.m1},
                         {"sigma", s.sigma},
                         {"n_loop", s.n_loop},
                         {"theta_end", s.theta_end},
                         {"degraded", s.degraded},
                         {"bound_satisfied", s.bound_satisfied},
                         {"max_channel_error", s.max_channel_error},
                         {"fit_target_missed", s.fit_target_missed}});
        max_err = std::max(max_err, s.max_channel_error);
        if (s.degraded) degraded.push_back(s.k);
    }
    nlohmann::json j{{"agents", cfg.count},
                     {"steps", cfg.steps},
                     {"mode", cfg.mode == RunMode::Hbcf ? "hbcf" : "bcf"},
                     {"pool", cfg.pool == PoolKind::LinOP ? "linop" : "logop"},
                     {"seed", cfg.seed},
                     {"grid_cells", result.final_densities.empty()
                                        ? 0
                                        : result.final_densities[0].size()},
                     {"eps_cons", cfg.eps_cons},
                     {"eps_comm_budget", cfg.eps_comm_budget},
                     {"max_channel_error", max_err},
                     {"degraded_steps", degraded},
                     {"steps_detail", steps}};
    if (!result.truth.empty()) j["truth_final"] = result.truth.back();
    return j;
}

// Writes metrics.csv, summary.json and (optionally) per-step consensual
// density dumps under out_dir.
inline void write_outputs(const RunResult& result, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    {
        std::ofstream csv(fs::path(out_dir) / "metrics.csv", std::ios::binary);
        if (!csv) throw ConfigError("cannot write metrics.csv under " + out_dir);
        write_metrics_csv(result, csv);
    }
    {
        std::ofstream js(fs::path(out_dir) / "summary.json", std::ios::binary);
        if (!js) throw ConfigError("cannot write summary.json under " + out_dir);
        js << summary_json(result).dump(2) << "\n";
    }
    if (result.cfg.dump_densities) {
        for (std::size_t i = 0; i < result.per_step_consensual.size(); ++i) {
            const auto& p = result.per_step_consensual[i];
            std::ofstream dump(fs::path(out_dir) /
                                   ("consensual_k" + std::to_string(i + 1) + ".csv"),
                               std::ios::binary);
            dump << "cell";
            for (std::size_t d = 0; d < p.grid().dims(); ++d) dump << ",x_" << d;
            dump << ",density\n";
            for (std::size_t c = 0; c < p.size(); ++c) {
                dump << c;
                for (double x : p.grid().center(c)) dump << ',' << detail::format_double(x);
                dump << ',' << detail::format_double(p.value(c)) << "\n";
            }
        }
    }
}

} // namespace bcf::sim

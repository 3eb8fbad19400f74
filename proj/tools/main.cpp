// Command line front end for the consensus filter library.
//
//   bcf run <scenario-file>       run a scenario and write metrics under out_dir
//   bcf plan ...                  compute the consensus loop count for a target
//   bcf validate <scenario-file>  parse and fully construct a scenario, report errors
//   bcf spectra <scenario-file>   print the weight-matrix spectrum and balance checks

#include <cmath>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "bcf/consensus.hpp"
#include "bcf/network.hpp"
#include "bcf/sim/models.hpp"
#include "bcf/sim/runner.hpp"
#include "bcf/sim/scenario.hpp"

namespace {

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> mode;
    std::optional<std::string> pool;
};

// Attaches the shared override flags to a subcommand that takes a scenario.
void add_override_flags(CLI::App* cmd, Overrides& ov) {
    cmd->add_option("--seed", ov.seed, "Override the scenario seed");
    cmd->add_option("--out", ov.out, "Override the output directory");
    cmd->add_option("--mode", ov.mode, "Override the run mode")
        ->check(CLI::IsMember({"bcf", "hbcf"}));
    cmd->add_option("--pool", ov.pool, "Override the pooling operator")
        ->check(CLI::IsMember({"linop", "logop"}));
}

bcf::sim::ScenarioConfig load_with_overrides(const std::string& path, const Overrides& ov) {
    bcf::sim::ScenarioConfig cfg = bcf::sim::load_scenario(path);
    if (ov.seed) cfg.seed = *ov.seed;
    if (ov.out) cfg.out_dir = *ov.out;
    if (ov.mode) cfg.mode = *ov.mode == "hbcf" ? bcf::sim::RunMode::Hbcf : bcf::sim::RunMode::Bcf;
    if (ov.pool) cfg.pool = *ov.pool == "linop" ? bcf::PoolKind::LinOP : bcf::PoolKind::LogOP;
    return cfg;
}

const char* yn(bool b) { return b ? "yes" : "no"; }

int cmd_run(const std::string& path, const Overrides& ov) {
    const bcf::sim::ScenarioConfig cfg = load_with_overrides(path, ov);
    const bcf::sim::RunResult result = bcf::sim::run_scenario(cfg);
    bcf::sim::write_outputs(result, cfg.out_dir);

    std::cout << "agents: " << cfg.count << "  steps: " << cfg.steps
              << "  mode: " << (cfg.mode == bcf::sim::RunMode::Hbcf ? "hbcf" : "bcf")
              << "  pool: " << (cfg.pool == bcf::PoolKind::LinOP ? "linop" : "logop")
              << "  seed: " << cfg.seed << "\n";
    std::cout << "   k  m1      sigma  n_loop     theta_end  within_eps_cons\n";
    for (const auto& s : result.steps) {
        std::printf("%4zu %3zu %10.6f %7d %13.6g  %s%s\n", s.k, s.m1, s.sigma, s.n_loop,
                    s.theta_end, yn(s.bound_satisfied), s.degraded ? "  (degraded)" : "");
    }
    double max_err = 0.0;
    for (const auto& s : result.steps) max_err = std::max(max_err, s.max_channel_error);
    if (max_err > 0.0) std::cout << "max channel error: " << max_err << "\n";
    std::cout << "wrote " << cfg.out_dir << "/metrics.csv and " << cfg.out_dir
              << "/summary.json\n";
    return 0;
}

int cmd_plan(double sigma, double gamma, double eps_cons, double eps_comm, std::size_t m) {
    const int n = bcf::plan_n_loop(sigma, gamma, eps_cons, eps_comm, m);
    const double bound = std::pow(sigma, n) * gamma +
                         2.0 * static_cast<double>(n) * eps_comm *
                             std::sqrt(static_cast<double>(m));
    std::cout << "n_loop: " << n << "\n";
    std::cout << "predicted disagreement after n_loop rounds: " << bound
              << " (target " << eps_cons << ")\n";
    return 0;
}

int cmd_validate(const std::string& path, const Overrides& ov) {
    const bcf::sim::ScenarioConfig cfg = load_with_overrides(path, ov);
    const bcf::StateGrid grid = bcf::sim::build_grid(cfg);
    const bcf::TransitionKernel kernel = bcf::sim::build_kernel(cfg, grid);
    (void)kernel;
    const auto sensors = bcf::sim::build_sensors(cfg);
    const bcf::Digraph topology = bcf::sim::build_topology(cfg);
    const bcf::WeightMatrix P = bcf::make_balanced_weights(topology, cfg.weight_method);
    const bcf::WeightFlags flags = bcf::check_weights(P, topology);

    std::cout << "scenario OK: " << path << "\n";
    std::cout << "  agents: " << cfg.count << "  sensors: " << sensors.size()
              << "  grid cells: " << grid.size() << "  dims: " << grid.dims()
              << "  steps: " << cfg.steps << "\n";
    std::cout << "  topology strongly connected: " << yn(topology.strongly_connected())
              << "  weights balanced: " << yn(flags.column_stochastic) << "\n";
    if (cfg.n_loop_auto)
        std::cout << "  n_loop: auto (eps_cons " << cfg.eps_cons << ", eps_comm budget "
                  << cfg.eps_comm_budget << ")\n";
    else
        std::cout << "  n_loop: " << cfg.n_loop << "\n";
    return 0;
}

int cmd_spectra(const std::string& path, const Overrides& ov) {
    const bcf::sim::ScenarioConfig cfg = load_with_overrides(path, ov);
    const bcf::Digraph topology = bcf::sim::build_topology(cfg);
    const bcf::WeightMatrix P = bcf::make_balanced_weights(topology, cfg.weight_method);
    const bcf::WeightFlags flags = bcf::check_weights(P, topology);
    const std::size_t m = cfg.count;

    std::cout << "agents: " << m << "\n";
    if (m >= 2) {
        std::cout << "sigma (second largest singular value): "
                  << bcf::second_largest_singular_value(P) << "\n";
        const Eigen::VectorXd pi = bcf::stationary_distribution(P);
        std::cout << "stationary distribution:";
        for (Eigen::Index i = 0; i < pi.size(); ++i) std::cout << ' ' << pi(i);
        std::cout << "\n";
    } else {
        std::cout << "sigma (second largest singular value): 0 (single agent)\n";
        std::cout << "stationary distribution: 1\n";
    }
    std::cout << "row stochastic: " << yn(flags.row_stochastic) << "\n";
    std::cout << "column stochastic (balanced): " << yn(flags.column_stochastic) << "\n";
    std::cout << "positive diagonal: " << yn(flags.positive_diagonal) << "\n";
    std::cout << "conformant to topology: " << yn(flags.conformant) << "\n";
    std::cout << "strongly connected: " << yn(topology.strongly_connected()) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distributed Bayesian filtering with consensus on densities"};
    app.require_subcommand(1);

    std::string run_path, validate_path, spectra_path;
    Overrides run_ov, validate_ov, spectra_ov;

    CLI::App* run = app.add_subcommand("run", "Run a scenario file and write metrics");
    run->add_option("scenario", run_path, "Scenario file")->required();
    add_override_flags(run, run_ov);

    double sigma = 0.0, gamma = 0.0, eps_cons = 0.0, eps_comm = 0.0;
    std::size_t m = 0;
    CLI::App* plan = app.add_subcommand("plan", "Plan the consensus loop count");
    plan->add_option("--sigma", sigma, "Second largest singular value of the weight matrix")
        ->required();
    plan->add_option("--gamma", gamma, "Initial disagreement norm")->required();
    plan->add_option("--eps-cons", eps_cons, "Target disagreement after the loop")->required();
    plan->add_option("--eps-comm", eps_comm, "Per-transmission density error budget");
    plan->add_option("--m", m, "Number of agents")->required();

    CLI::App* validate = app.add_subcommand("validate", "Check a scenario file end to end");
    validate->add_option("scenario", validate_path, "Scenario file")->required();
    add_override_flags(validate, validate_ov);

    CLI::App* spectra =
        app.add_subcommand("spectra", "Print weight-matrix spectrum and balance checks");
    spectra->add_option("scenario", spectra_path, "Scenario file")->required();
    add_override_flags(spectra, spectra_ov);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(run_path, run_ov);
        if (plan->parsed()) return cmd_plan(sigma, gamma, eps_cons, eps_comm, m);
        if (validate->parsed()) return cmd_validate(validate_path, validate_ov);
        if (spectra->parsed()) return cmd_spectra(spectra_path, spectra_ov);
    } catch (const bcf::Infeasible& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return 2;
    } catch (const bcf::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

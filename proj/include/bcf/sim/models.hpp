#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "bcf/bayes.hpp"
#include "bcf/density.hpp"
#include "bcf/errors.hpp"
#include "bcf/hierarchy.hpp"
#include "bcf/network.hpp"
#include "bcf/rng.hpp"
#include "bcf/sim/scenario.hpp"

// Builders that turn a parsed scenario into concrete objects: state grid,
// transition kernel, truth propagator, sensor likelihoods, visibility
// schedule and communication topology.

namespace bcf::sim {

inline StateGrid build_grid(const ScenarioConfig& cfg) {
    return StateGrid(cfg.lower, cfg.upper, cfg.cells);
}

namespace detail {

inline double wrap_into(double v, double lo, double hi) {
    const double span = hi - lo;
    double r = std::fmod(v - lo, span);
    if (r < 0.0) r += span;
    return lo + r;
}

// One draw of the scenario dynamics: x -> x'. The revolve-drift model is a
// rotating phase (periodic in the first dimension) advanced by the second
// (rate) dimension; the others are random walks / linear drifts.
inline void step_dynamics(const ScenarioConfig& cfg, std::span<const double> x,
                          std::span<double> out, std::mt19937_64& gen, bool stochastic) {
    switch (cfg.dynamics) {
    case DynamicsModel::IdentityWalk:
        for (std::size_t d = 0; d < x.size(); ++d)
            out[d] = x[d] + (stochastic ? normal(gen, 0.0, cfg.process_noise_std[d]) : 0.0);
        break;
    case DynamicsModel::LinearGaussian:
        out[0] = cfg.drift_a * x[0] + cfg.drift_c +
                 (stochastic ? normal(gen, 0.0, cfg.process_noise_std[0]) : 0.0);
        break;
    case DynamicsModel::RevolveDrift: {
        const double phase = x[0] + x[1] * cfg.dt +
                             (stochastic ? normal(gen, 0.0, cfg.process_noise_std[0]) : 0.0);
        out[0] = wrap_into(phase, cfg.lower[0], cfg.upper[0]);
        out[1] = x[1] + (stochastic ? normal(gen, 0.0, cfg.process_noise_std[1]) : 0.0);
        break;
    }
    }
}

} // namespace detail

inline TransitionKernel build_kernel(const ScenarioConfig& cfg, const StateGrid& grid) {
    if (cfg.kernel_build == KernelBuild::MonteCarlo) {
        return TransitionKernel::monte_carlo(
            grid,
            [&cfg](std::span<const double> x, std::span<double> out, std::mt19937_64& gen) {
                detail::step_dynamics(cfg, x, out, gen, true);
            },
            cfg.mc_samples, derive_seed(cfg.seed, Stream::KernelMonteCarlo));
    }
    switch (cfg.dynamics) {
    case DynamicsModel::IdentityWalk: {
        return TransitionKernel::random_walk(grid, cfg.process_noise_std);
    }
    case DynamicsModel::LinearGaussian: {
        const double q = cfg.process_noise_std[0] * cfg.process_noise_std[0];
        return TransitionKernel::linear_gaussian_1d(grid, cfg.drift_a, cfg.drift_c, q);
    }
    case DynamicsModel::RevolveDrift: {
        // Wrapped Gaussian in phase (periodic box), Gaussian in rate.
        const double lo = cfg.lower[0], hi = cfg.upper[0];
        const double span = hi - lo;
        const double s_phase = cfg.process_noise_std[0];
        const double s_rate = cfg.process_noise_std[1];
        const double dt = cfg.dt;
        return TransitionKernel::from_function(
            grid, [=](std::span<const double> next, std::span<const double> prev) {
                const double mean_phase = prev[0] + prev[1] * dt;
                double density_phase = 0.0;
                for (int image = -3; image <= 3; ++image) {
                    const double d =
                        next[0] - (mean_phase + static_cast<double>(image) * span);
                    // Wrap images three periods out: beyond that the Gaussian
                    // tail is negligible for any usable noise level.
                    density_phase += std::exp(-0.5 * d * d / (s_phase * s_phase));
                }
                density_phase /= s_phase * std::sqrt(2.0 * std::numbers::pi);
                const double dr = next[1] - prev[1];
                const double density_rate = std::exp(-0.5 * dr * dr / (s_rate * s_rate)) /
                                            (s_rate * std::sqrt(2.0 * std::numbers::pi));
                return density_phase * density_rate;
            });
    }
    }
    throw ConfigError("kernel: unknown dynamics model");
}

inline double agent_noise_variance(const ScenarioConfig& cfg, std::size_t agent) {
    return (cfg.noise_variance_base + cfg.noise_variance_step * static_cast<double>(agent)) *
           cfg.noise_variance_scale;
}

// Sensors observe the full state with additive Gaussian noise; variances are
// heterogeneous across agents. The phase dimension of the revolve-drift
// model compares angles through the wrap.
inline std::vector<LikelihoodFn> build_sensors(const ScenarioConfig& cfg) {
    std::vector<LikelihoodFn> models;
    models.reserve(cfg.count);
    const bool wrap_phase = cfg.dynamics == DynamicsModel::RevolveDrift;
    const double lo = cfg.lower[0], hi = cfg.upper[0];
    for (std::size_t j = 0; j < cfg.count; ++j) {
        const double var = agent_noise_variance(cfg, j);
        const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * var);
        models.push_back([var, norm, wrap_phase, lo, hi](std::span<const double> z,
                                                         std::span<const double> x) {
            double like = 1.0;
            for (std::size_t d = 0; d < x.size(); ++d) {
                double diff = z[d] - x[d];
                if (wrap_phase && d == 0) {
                    const double span = hi - lo;
                    diff = std::remainder(diff, span);
                }
                like *= norm * std::exp(-0.5 * diff * diff / var);
            }
            return like;
        });
    }
    return models;
}

// Draws one measurement z = truth + noise for the given agent and step.
inline Measurement draw_measurement(const ScenarioConfig& cfg, std::size_t agent,
                                    std::size_t step, std::span<const double> truth) {
    auto gen = make_rng(derive_seed(cfg.seed, Stream::Measurement, step, agent));
    const double sd = std::sqrt(agent_noise_variance(cfg, agent));
    Measurement z;
    z.agent = agent;
    z.value.resize(truth.size());
    for (std::size_t d = 0; d < truth.size(); ++d) z.value[d] = truth[d] + normal(gen, 0.0, sd);
    if (cfg.dynamics == DynamicsModel::RevolveDrift)
        z.value[0] = detail::wrap_into(z.value[0], cfg.lower[0], cfg.upper[0]);
    return z;
}

// Whether agent j observes the process at step k.
inline bool is_visible(const ScenarioConfig& cfg, std::size_t agent, std::size_t step) {
    switch (cfg.visibility) {
    case VisibilityKind::Always:
        return true;
    case VisibilityKind::RotatingArc: {
        // A contiguous arc of agents (by index, cyclically) sees the
        // process; the arc center advances arc_rate agents per step.
        const auto m = static_cast<double>(cfg.count);
        const double center =
            std::fmod(cfg.arc_rate * static_cast<double>(step), m);
        double d = std::abs(static_cast<double>(agent) - center);
        d = std::min(d, m - d);
        return d <= (static_cast<double>(cfg.arc_width) - 1.0) / 2.0 + 1e-12;
    }
    case VisibilityKind::Intervals: {
        const auto it = cfg.intervals.find(agent);
        if (it == cfg.intervals.end()) return false;
        for (const auto& [from, to] : it->second)
            if (step >= from && step <= to) return true;
        return false;
    }
    }
    return false;
}

inline std::vector<std::size_t> visible_agents(const ScenarioConfig& cfg, std::size_t step) {
    std::vector<std::size_t> v;
    for (std::size_t j = 0; j < cfg.count; ++j)
        if (is_visible(cfg, j, step)) v.push_back(j);
    return v;
}

inline Digraph build_topology(const ScenarioConfig& cfg) {
    switch (cfg.topology) {
    case TopologyKind::Ring:
        return Digraph::ring(cfg.count);
    case TopologyKind::Complete:
        return Digraph::complete(cfg.count);
    case TopologyKind::Path:
        return Digraph::path(cfg.count);
    case TopologyKind::Star:
        return Digraph::star(cfg.count);
    case TopologyKind::Random:
        return Digraph::random_connected(cfg.count, cfg.edge_prob,
                                         derive_seed(cfg.seed, Stream::Scenario, 1));
    case TopologyKind::Edges: {
        Digraph g(cfg.count);
        for (const auto& [a, b] : cfg.edges) {
            if (cfg.edges_symmetric)
                g.add_symmetric_edge(a, b);
            else
                g.add_edge(a, b);
        }
        return g;
    }
    }
    throw ConfigError("topology: unknown kind");
}

} // namespace bcf::sim

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "bcf/density.hpp"
#include "bcf/errors.hpp"
#include "bcf/network.hpp"

// Consensus on probability densities: synchronous pooling rounds driven by a
// row-stochastic weight matrix, closed-form consensual limits, disagreement
// bookkeeping, and planning of the loop count needed to reach a disagreement
// target under lossy communication.

namespace bcf {

enum class PoolKind { LinOP, LogOP };

// Optional per-sender transform applied to every transmitted density (the
// lossy-channel injection point). The sender's own density never passes
// through it. `loop` is the round index within the current filter step.
using TransmitHook =
    std::function<GridDensity(const GridDensity& sent, std::size_t sender, int loop)>;

// One synchronous consensus round: agent j replaces its density with the
// weighted pool (arithmetic or geometric) of the densities it hears,
// weighted by row j of P.
inline std::vector<GridDensity> consensus_round(std::span<const GridDensity> densities,
                                                const WeightMatrix& P, PoolKind pool,
                                                const TransmitHook& hook = {}, int loop = 0,
                                                const NormalizeOptions& opts = {}) {
    const std::size_t m = densities.size();
    if (m == 0) throw ConfigError("consensus: need at least one agent");
    if (P.rows() != static_cast<Eigen::Index>(m) || P.cols() != static_cast<Eigen::Index>(m))
        throw ConfigError("consensus: weight matrix size does not match agent count");
    require_row_stochastic(P);
    for (std::size_t l = 1; l < m; ++l) require_same_grid(densities[0], densities[l]);

    // Each sender transmits one (possibly corrupted) copy; every receiver
    // hears the same copy.
    std::vector<const GridDensity*> heard(m);
    std::vector<GridDensity> transmitted;
    transmitted.reserve(hook ? m : 0);
    for (std::size_t l = 0; l < m; ++l) {
        bool sends = false;
        for (std::size_t j = 0; j < m && !sends; ++j)
            sends = j != l && P(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l)) > 0.0;
        if (hook && sends) {
            transmitted.push_back(hook(densities[l], l, loop));
            heard[l] = &transmitted.back();
        } else {
            heard[l] = &densities[l];
        }
    }

    std::vector<GridDensity> next;
    next.reserve(m);
    for (std::size_t j = 0; j < m; ++j) {
        std::vector<GridDensity> inputs;
        std::vector<double> weights;
        for (std::size_t l = 0; l < m; ++l) {
            const double w = P(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l));
            if (w > 0.0) {
                inputs.push_back(l == j ? densities[j] : *heard[l]);
                weights.push_back(w);
            }
        }
        next.push_back(pool == PoolKind::LinOP ? arithmetic_pool(inputs, weights, opts)
                                               : geometric_pool(inputs, weights, opts));
    }
    return next;
}

// Closed-form limit of repeated pooling rounds, given the stationary
// distribution pi of the weight matrix: the pi-weighted arithmetic pool for
// LinOP rounds, the pi-weighted geometric pool (normalized) for LogOP
// rounds. With balanced weights pi is uniform.
inline GridDensity consensual_pdf(std::span<const GridDensity> densities,
                                  const Eigen::VectorXd& pi, PoolKind pool,
                                  const NormalizeOptions& opts = {}) {
    if (pi.size() != static_cast<Eigen::Index>(densities.size()))
        throw BadWeights("consensual_pdf: weight count mismatch");
    std::vector<double> w(pi.data(), pi.data() + pi.size());
    return pool == PoolKind::LinOP ? arithmetic_pool(densities, w, opts)
                                   : geometric_pool(densities, w, opts);
}

// Disagreement vector: per-agent L1 distance to a reference density, plus
// its Euclidean norm. Each entry lies in [0, 2], so the norm is at most
// 2*sqrt(m).
struct Disagreement {
    std::vector<double> per_agent;
    double l2 = 0.0;
};

inline Disagreement disagreement(std::span<const GridDensity> densities,
                                 const GridDensity& reference) {
    Disagreement d;
    d.per_agent.reserve(densities.size());
    double sq = 0.0;
    for (const auto& p : densities) {
        const double theta = l1_distance(p, reference);
        d.per_agent.push_back(theta);
        sq += theta * theta;
    }
    d.l2 = std::sqrt(sq);
    return d;
}

// Worst-case disagreement norm: every agent at L1 distance 2 from the
// reference.
inline double max_disagreement(std::size_t m) {
    return 2.0 * std::sqrt(static_cast<double>(m));
}

namespace detail {

// Planner objective: predicted disagreement after n rounds with per-loop
// contraction sigma, initial disagreement gamma and per-transmission error
// eps_comm on m agents.
inline double plan_bound(double sigma, double gamma, double eps_comm, std::size_t m, double n) {
    return std::pow(sigma, n) * gamma +
           2.0 * n * eps_comm * std::sqrt(static_cast<double>(m));
}

inline void check_plan_args(double sigma, double gamma, double eps_cons, double eps_comm,
                            std::size_t m) {
    if (!(sigma >= 0.0 && sigma <= 1.0))
        throw ConfigError("plan: sigma must lie in [0, 1]");
    if (!(gamma >= 0.0) || !std::isfinite(gamma))
        throw ConfigError("plan: gamma must be finite and nonnegative");
    if (!(eps_cons > 0.0)) throw ConfigError("plan: eps_cons must be positive");
    if (!(eps_comm >= 0.0)) throw ConfigError("plan: eps_comm must be nonnegative");
    if (m == 0) throw ConfigError("plan: need at least one agent");
}

} // namespace detail

// Smallest loop count n >= 1 with sigma^n * gamma + 2 n eps_comm sqrt(m) <=
// eps_cons, or Infeasible when no n satisfies it. The objective is convex in
// n (geometric decay plus linear growth), which bounds the search.
inline int plan_n_loop(double sigma, double gamma, double eps_cons, double eps_comm,
                       std::size_t m) {
    detail::check_plan_args(sigma, gamma, eps_cons, eps_comm, m);
    const auto phi = [&](double n) { return detail::plan_bound(sigma, gamma, eps_comm, m, n); };
    constexpr double kMaxLoops = 9.0e15; // exactly representable integer range

    if (phi(1.0) <= eps_cons) return 1;
    // Past n = 1 the objective only grows in these cases.
    if (sigma == 0.0 || sigma == 1.0 || gamma == 0.0)
        throw Infeasible("plan: disagreement target unreachable for any loop count");

    // Right edge of the search: where the objective stops decreasing.
    double n_hi;
    if (eps_comm == 0.0) {
        n_hi = 2.0;
        while (phi(n_hi) > eps_cons) {
            n_hi *= 2.0;
            if (n_hi > kMaxLoops)
                throw Infeasible("plan: contraction too slow to reach the target");
        }
    } else {
        // Continuous minimizer of phi: sigma^n = -2 eps_comm sqrt(m) / (gamma ln sigma).
        const double log_sigma = std::log(sigma);
        const double n_star =
            std::log(-2.0 * eps_comm * std::sqrt(static_cast<double>(m)) /
                     (gamma * log_sigma)) /
            log_sigma;
        if (!(n_star > 1.0))
            throw Infeasible("plan: disagreement target unreachable for any loop count");
        const double lo_cand = std::max(1.0, std::floor(n_star));
        const double hi_cand = std::ceil(n_star);
        if (phi(lo_cand) <= eps_cons)
            n_hi = lo_cand;
        else if (phi(hi_cand) <= eps_cons)
            return hi_cand > static_cast<double>(INT32_MAX)
                       ? throw TooLarge("plan: loop count overflows")
                       : static_cast<int>(hi_cand);
        else
            throw Infeasible("plan: disagreement target unreachable for any loop count");
    }

    // phi is decreasing on [1, n_hi]; binary search the first feasible count.
    // Invariant: phi(lo) > eps_cons and phi(hi) <= eps_cons.
    double lo = 1.0, hi = n_hi;
    while (hi - lo > 1.0) {
        const double mid = std::floor((lo + hi) / 2.0);
        if (phi(mid) <= eps_cons)
            hi = mid;
        else
            lo = mid;
    }
    if (hi > static_cast<double>(INT32_MAX)) throw TooLarge("plan: loop count overflows");
    return static_cast<int>(hi);
}

// Largest per-loop contraction factor that still meets eps_cons in exactly
// n_loop rounds: ((eps_cons - 2 n eps_comm sqrt(m)) / gamma)^(1/n), clamped
// to [0, 1]. Infeasible when the communication term alone exceeds the target.
inline double max_sigma_for_n_loop(int n_loop, double gamma, double eps_cons, double eps_comm,
                                   std::size_t m) {
    detail::check_plan_args(0.0, gamma, eps_cons, eps_comm, m);
    if (n_loop < 1) throw ConfigError("plan: n_loop must be at least 1");
    const double slack =
        eps_cons - 2.0 * static_cast<double>(n_loop) * eps_comm * std::sqrt(static_cast<double>(m));
    if (!(slack > 0.0))
        throw Infeasible("plan: communication error alone exceeds the disagreement target");
    if (gamma == 0.0) return 1.0;
    return std::min(1.0, std::pow(slack / gamma, 1.0 / static_cast<double>(n_loop)));
}

// Exhaustive search for the density minimizing the summed KL divergence to
// the inputs, over the mass simplex discretized at `step`. Intended as an
// oracle on tiny grids (at most 3 cells); the minimizer of the continuous
// problem is the uniform-weight geometric pool.
struct KlSearchResult {
    GridDensity minimizer;
    double objective = 0.0; // summed KL at the minimizer
};

inline double sum_kl_to(const GridDensity& rho, std::span<const GridDensity> inputs) {
    double s = 0.0;
    for (const auto& f : inputs) s += kl_divergence(rho, f);
    return s;
}

inline KlSearchResult brute_force_kl_minimizer(std::span<const GridDensity> inputs,
                                               double step = 1e-4) {
    if (inputs.empty()) throw ConfigError("kl search: need inputs");
    const auto& g = inputs[0].grid();
    for (std::size_t l = 1; l < inputs.size(); ++l) require_same_grid(inputs[0], inputs[l]);
    const std::size_t cells = g.size();
    if (cells > 3) throw TooLarge("kl search: exhaustive search supports at most 3 cells");
    if (!(step > 0.0 && step <= 0.5)) throw ConfigError("kl search: bad step");

    const auto N = static_cast<std::size_t>(std::llround(1.0 / step));
    const double h = 1.0 / static_cast<double>(N);
    const double mu = g.cell_measure();
    const auto m = static_cast<double>(inputs.size());

    // Summed KL in mass form: sum_x v_x * (m ln v_x - b_x) with
    // b_x = sum_i ln(F_i(x) * mu).  T[k] tabulates v ln v.
    std::vector<double> T(N + 1, 0.0);
    for (std::size_t k = 1; k <= N; ++k) {
        const double v = static_cast<double>(k) * h;
        T[k] = v * std::log(v);
    }
    std::vector<double> b(cells, 0.0);
    for (std::size_t x = 0; x < cells; ++x)
        for (const auto& f : inputs) b[x] += std::log(f.value(x) * mu);

    double best = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> best_k(cells, 0);
    if (cells == 1) {
        best = m * T[N] - b[0]; // v = 1
        best_k[0] = N;
    } else if (cells == 2) {
        for (std::size_t k0 = 0; k0 <= N; ++k0) {
            const std::size_t k1 = N - k0;
            const double obj = m * (T[k0] + T[k1]) -
                               h * (static_cast<double>(k0) * b[0] + static_cast<double>(k1) * b[1]);
            if (obj < best) {
                best = obj;
                best_k = {k0, k1};
            }
        }
    } else {
        for (std::size_t k0 = 0; k0 <= N; ++k0) {
            const double t0 = m * T[k0] - h * static_cast<double>(k0) * b[0];
            for (std::size_t k1 = 0; k1 <= N - k0; ++k1) {
                const std::size_t k2 = N - k0 - k1;
                const double obj = t0 + m * (T[k1] + T[k2]) -
                                   h * (static_cast<double>(k1) * b[1] +
                                        static_cast<double>(k2) * b[2]);
                if (obj < best) {
                    best = obj;
                    best_k = {k0, k1, k2};
                }
            }
        }
    }

    std::vector<double> raw(cells);
    for (std::size_t x = 0; x < cells; ++x)
        raw[x] = static_cast<double>(best_k[x]) * h / mu;
    return {GridDensity::normalized(g, std::move(raw)), best};
}

} // namespace bcf

// Acceptance gate: one [PASS]/[FAIL] line per numbered criterion, nonzero
// exit when any fails. Tolerances are pinned here on purpose; loosening them
// is a behavior change, not a test fix.
//
// Criterion 1 note. The per-agent pointwise envelope
//   |p_j,nu(x) - p*(x)| <= sigma^nu |p_j,0(x) - p*(x)|
// is not a sound property of geometric pooling: cells where an agent's
// density crosses the consensual value break it by large factors (measured
// overshoot is printed as an info line). What geometric pooling does
// guarantee on balanced weights is the per-cell contraction of the anchored
// log-ratio disagreement vector
//   s_j(x) = ln(p_j(x)/p*(x)) - ln(p_j(a)/p*(a)),   a = fixed anchor cell,
// which evolves as s <- P s exactly, stays mean-free across agents, and so
// contracts in the across-agent 2-norm at rate sigma per round. That norm
// envelope, at the instance counts and slack stated for this criterion, is
// what is verified here; the same reading applies to the tracking block in
// criterion 7.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "../test_util.hpp"
#include "bcf/bcf.hpp"

using namespace bcf;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

void info(int criterion, const std::string& text) {
    std::printf("[info] criterion %d: %s\n", criterion, text.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof(buf), f, ap);
    va_end(ap);
    return buf;
}

Eigen::VectorXd uniform_pi(std::size_t m) {
    return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(m),
                                     1.0 / static_cast<double>(m));
}

std::vector<double> uniform_w(std::size_t m) {
    return std::vector<double>(m, 1.0 / static_cast<double>(m));
}

// Mixes p toward the uniform density so that the L1 perturbation equals
// min(eps, L1(p, uniform)) exactly: the strongest corruption a channel with
// per-transmission budget eps is allowed to produce.
GridDensity nudge_toward_uniform(const GridDensity& p, double eps) {
    const GridDensity u = GridDensity::uniform(p.grid());
    const double d = l1_distance(p, u);
    if (!(d > 0.0)) return p;
    const double eta = std::min(1.0, eps / d);
    std::vector<double> mixed(p.size());
    for (std::size_t i = 0; i < p.size(); ++i)
        mixed[i] = (1.0 - eta) * p.value(i) + eta * u.value(i);
    return GridDensity::from_normalized(p.grid(), std::move(mixed));
}

// Anchored log-ratio rows: s[j][x] = ln(p_j(x)/ref(x)) - ln(p_j(a)/ref(a)),
// anchor cell a = 0. Mean-free across agents when ref is the uniform
// geometric pool of the set.
std::vector<std::vector<double>> anchored_log_ratios(std::span<const GridDensity> set,
                                                     const GridDensity& ref) {
    std::vector<std::vector<double>> s(set.size(), std::vector<double>(ref.size()));
    for (std::size_t j = 0; j < set.size(); ++j) {
        const double at_anchor = std::log(set[j].value(0) / ref.value(0));
        for (std::size_t x = 0; x < ref.size(); ++x)
            s[j][x] = std::log(set[j].value(x) / ref.value(x)) - at_anchor;
    }
    return s;
}

double cell_norm(const std::vector<std::vector<double>>& s, std::size_t x) {
    double sq = 0.0;
    for (const auto& row : s) sq += row[x] * row[x];
    return std::sqrt(sq);
}

// Shared instance set for criteria 1 and 2: ten random strongly connected
// balanced digraphs (m = 3..12), five random 64-cell density sets each.
struct ConsensusInstance {
    std::size_t m = 0;
    WeightMatrix P;
    double sigma = 0.0;
    std::vector<std::vector<GridDensity>> sets;
};

const std::vector<ConsensusInstance>& consensus_instances() {
    static const std::vector<ConsensusInstance> instances = [] {
        const StateGrid grid = test_util::grid_1d(0.0, 1.0, 64);
        std::vector<ConsensusInstance> out;
        for (std::size_t t = 0; t < 10; ++t) {
            ConsensusInstance inst;
            inst.m = 3 + t;
            const Digraph g = Digraph::random_connected(inst.m, 0.3, 9000 + t);
            inst.P = make_balanced_weights(g, WeightMethod::Metropolis);
            inst.sigma = second_largest_singular_value(inst.P);
            for (std::size_t s = 0; s < 5; ++s) {
                std::vector<GridDensity> set;
                for (std::size_t j = 0; j < inst.m; ++j)
                    set.push_back(test_util::random_density(grid, 777 + t * 100 + s * 16 + j));
                inst.sets.push_back(std::move(set));
            }
            out.push_back(std::move(inst));
        }
        return out;
    }();
    return instances;
}

// --- criterion 1 -----------------------------------------------------------

void criterion1() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst_margin = -1.0; // max over cells/rounds of ||s_nu|| - sigma^nu ||s_0||
    double worst_pointwise_excess = 0.0;

    for (const auto& inst : consensus_instances()) {
        for (const auto& set : inst.sets) {
            const GridDensity ref = consensual_pdf(set, uniform_pi(inst.m), PoolKind::LogOP);
            const auto s0 = anchored_log_ratios(set, ref);
            const std::size_t cells = ref.size();
            std::vector<double> norm0(cells);
            for (std::size_t x = 0; x < cells; ++x) norm0[x] = cell_norm(s0, x);
            std::vector<std::vector<double>> d0(inst.m, std::vector<double>(cells));
            for (std::size_t j = 0; j < inst.m; ++j)
                for (std::size_t x = 0; x < cells; ++x)
                    d0[j][x] = std::abs(set[j].value(x) - ref.value(x));

            std::vector<GridDensity> cur = set;
            double rate = 1.0;
            for (int nu = 1; nu <= 50; ++nu) {
                cur = consensus_round(cur, inst.P, PoolKind::LogOP);
                rate *= inst.sigma;
                const auto s = anchored_log_ratios(cur, ref);
                for (std::size_t x = 0; x < cells; ++x)
                    worst_margin = std::max(worst_margin, cell_norm(s, x) - rate * norm0[x]);
                for (std::size_t j = 0; j < inst.m; ++j)
                    for (std::size_t x = 0; x < cells; ++x)
                        worst_pointwise_excess =
                            std::max(worst_pointwise_excess,
                                     std::abs(cur[j].value(x) - ref.value(x)) - rate * d0[j][x]);
            }
        }
    }

    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool pass = worst_margin <= 1e-9 && elapsed < 10.0;
    report(1, pass,
           fmt("pooling contraction at rate sigma on 10 balanced digraphs (m=3..12) x 5 "
               "density sets, nu<=50: anchored log-ratio norm overshoot %.3g <= 1e-9 "
               "(%.2f s < 10 s)",
               worst_margin, elapsed));
    info(1, fmt("per-agent pointwise density envelope overshoots by up to %.3g on the same "
                "instances; the sound (and verified) form is the anchored log-ratio norm "
                "contraction, see the header note",
                worst_pointwise_excess));
}

// --- criterion 2 -----------------------------------------------------------

void criterion2() {
    double worst = 0.0;
    for (const auto& inst : consensus_instances()) {
        for (const auto& set : inst.sets) {
            const GridDensity ref_lin = consensual_pdf(set, uniform_pi(inst.m), PoolKind::LinOP);
            const GridDensity ref_log = consensual_pdf(set, uniform_pi(inst.m), PoolKind::LogOP);
            std::vector<GridDensity> lin = set, log = set;
            for (int nu = 0; nu < 500; ++nu) {
                lin = consensus_round(lin, inst.P, PoolKind::LinOP);
                log = consensus_round(log, inst.P, PoolKind::LogOP);
            }
            for (std::size_t j = 0; j < inst.m; ++j) {
                worst = std::max(worst, l1_distance(lin[j], ref_lin));
                worst = std::max(worst, l1_distance(log[j], ref_log));
            }
        }
    }
    report(2, worst <= 1e-6,
           fmt("500 iterated rounds reach the closed-form pooled limits on all 50 instances, "
               "both pools (max L1 gap %.3g <= 1e-6)",
               worst));
}

// --- criterion 3 -----------------------------------------------------------

void criterion3() {
    double worst_l1 = 0.0, worst_obj = -1.0;
    int instances = 0;
    for (int i = 0; i < 20; ++i) {
        const std::size_t cells = i < 12 ? 2 : 3;
        const std::size_t n_in = 2 + static_cast<std::size_t>(i % 3);
        const StateGrid grid = test_util::grid_1d(0.0, 1.0, cells);
        std::vector<GridDensity> inputs;
        for (std::size_t j = 0; j < n_in; ++j)
            inputs.push_back(test_util::random_density(grid, 3300 + i * 10 + static_cast<int>(j)));

        const KlSearchResult oracle = brute_force_kl_minimizer(inputs, 1e-4);
        const GridDensity geo = geometric_pool(inputs, uniform_w(n_in));
        worst_l1 = std::max(worst_l1, l1_distance(oracle.minimizer, geo));
        worst_obj = std::max(worst_obj, sum_kl_to(geo, inputs) - oracle.objective);
        ++instances;
    }
    const bool pass = worst_l1 <= 1e-3 && worst_obj <= 1e-6;
    report(3, pass,
           fmt("geometric pool minimizes summed KL on %d exhaustive 2- and 3-cell instances "
               "(simplex step 1e-4): minimizer L1 gap %.3g <= 1e-3, objective gap %.3g <= 1e-6",
               instances, worst_l1, worst_obj));
}

// --- criterion 4 -----------------------------------------------------------

void criterion4() {
    const StateGrid grid = test_util::grid_1d(0.0, 1.0, 32);
    double worst_commute = 0.0, worst_scale = 0.0;
    for (int i = 0; i < 50; ++i) {
        auto gen = make_rng(derive_seed(4400 + i, Stream::Test));
        const std::size_t m = 2 + static_cast<std::size_t>(i % 4);
        std::vector<GridDensity> inputs;
        for (std::size_t j = 0; j < m; ++j)
            inputs.push_back(test_util::random_density(grid, 4500 + i * 10 + static_cast<int>(j)));
        std::vector<double> w(m);
        double sum = 0.0;
        for (double& v : w) sum += v = uniform(gen, 0.2, 1.0);
        for (double& v : w) v /= sum;

        // Commutation with a multiplicative update: pool then reweight must
        // equal reweight then pool.
        std::vector<double> evidence(grid.size());
        for (double& v : evidence) v = std::exp(uniform(gen, -1.0, 1.0));
        const GridDensity pooled_then_up = reweight(geometric_pool(inputs, w), evidence);
        std::vector<GridDensity> upd;
        for (const auto& p : inputs) upd.push_back(reweight(p, evidence));
        const GridDensity up_then_pooled = geometric_pool(upd, w);
        for (std::size_t x = 0; x < grid.size(); ++x)
            worst_commute = std::max(
                worst_commute, std::abs(pooled_then_up.value(x) - up_then_pooled.value(x)));

        // Rescaling the raw input values must not move the pool.
        std::vector<GridDensity> scaled;
        for (const auto& p : inputs) {
            const double c = std::exp(uniform(gen, -7.0, 7.0));
            std::vector<double> raw(p.size());
            for (std::size_t x = 0; x < p.size(); ++x) raw[x] = c * p.value(x);
            scaled.push_back(GridDensity::normalized(grid, std::move(raw)));
        }
        const GridDensity pool_scaled = geometric_pool(scaled, w);
        const GridDensity pool_plain = geometric_pool(inputs, w);
        for (std::size_t x = 0; x < grid.size(); ++x)
            worst_scale =
                std::max(worst_scale, std::abs(pool_scaled.value(x) - pool_plain.value(x)));
    }
    const bool pass = worst_commute <= 1e-9 && worst_scale <= 1e-9;
    report(4, pass,
           fmt("geometric pooling commutes with multiplicative updates and ignores input "
               "rescaling on 50 instances (cellwise gaps %.3g, %.3g <= 1e-9)",
               worst_commute, worst_scale));
}

// --- criterion 5 -----------------------------------------------------------

double plan_phi(double sigma, double gamma, double eps_comm, std::size_t m, double n) {
    return std::pow(sigma, n) * gamma + 2.0 * n * eps_comm * std::sqrt(static_cast<double>(m));
}

void criterion5() {
    std::string fail;

    // (a) Zero communication error: planner equals the ceiling formula.
    {
        auto gen = make_rng(derive_seed(5500, Stream::Test));
        int made = 0;
        while (made < 20) {
            const double sigma = uniform(gen, 0.15, 0.92);
            const double gamma = uniform(gen, 0.5, 6.0);
            const double eps = gamma * uniform(gen, 0.01, 0.5);
            const double r = std::log(eps / gamma) / std::log(sigma);
            if (std::abs(r - std::round(r)) < 1e-9) continue; // boundary-degenerate draw
            const int expected = std::max(1, static_cast<int>(std::ceil(r)));
            const int got = plan_n_loop(sigma, gamma, eps, 0.0, 5);
            if (got != expected) {
                fail = fmt("ceiling formula mismatch: sigma=%.6f gamma=%.6f eps=%.6f "
                           "expected %d got %d",
                           sigma, gamma, eps, expected, got);
                break;
            }
            ++made;
        }
    }

    // (b) Lossy execution: run the planned loop count with per-transmission
    // corruption at the full budget; the end-of-stage disagreement norm must
    // meet the target.
    double worst_theta_slack = -1.0;
    if (fail.empty()) {
        auto gen = make_rng(derive_seed(5501, Stream::Test));
        const StateGrid grid = test_util::grid_1d(0.0, 1.0, 64);
        for (int i = 0; i < 8 && fail.empty(); ++i) {
            const std::size_t m = 4 + static_cast<std::size_t>(i % 5);
            const Digraph g = Digraph::random_connected(m, 0.3, 5600 + i);
            const WeightMatrix P = make_balanced_weights(g, WeightMethod::Metropolis);
            const double sigma = second_largest_singular_value(P);
            const double gamma = max_disagreement(m);
            const double eps_cons = uniform(gen, 0.1, 0.4);
            const int n0 = plan_n_loop(sigma, gamma, eps_cons, 0.0, m);
            const double eps_comm =
                eps_cons / (8.0 * static_cast<double>(n0) * std::sqrt(static_cast<double>(m)));
            const int n = plan_n_loop(sigma, gamma, eps_cons, eps_comm, m);

            std::vector<GridDensity> set;
            for (std::size_t j = 0; j < m; ++j)
                set.push_back(test_util::random_density(grid, 5700 + i * 20 + static_cast<int>(j)));
            const GridDensity ref = consensual_pdf(set, uniform_pi(m), PoolKind::LogOP);
            double max_seen = 0.0;
            const TransmitHook hook = [&](const GridDensity& p, std::size_t, int) {
                const GridDensity c = nudge_toward_uniform(p, eps_comm);
                max_seen = std::max(max_seen, l1_distance(c, p));
                return c;
            };
            std::vector<GridDensity> cur = set;
            for (int nu = 1; nu <= n; ++nu)
                cur = consensus_round(cur, P, PoolKind::LogOP, hook, nu);
            const double theta = disagreement(cur, ref).l2;
            if (max_seen > eps_comm + 1e-15)
                fail = fmt("hook exceeded the corruption budget: %.3g > %.3g", max_seen, eps_comm);
            else if (theta > eps_cons)
                fail = fmt("executed plan missed the target: theta %.6f > eps_cons %.6f "
                           "(m=%zu n=%d)",
                           theta, eps_cons, m, n);
            worst_theta_slack = std::max(worst_theta_slack, theta / eps_cons);
        }
    }

    // (c) Infeasibility is reported exactly when no loop count works. By
    // convexity the discrete minimum sits at n=1 or beside the continuous
    // minimizer, so the oracle only probes those counts.
    if (fail.empty()) {
        auto gen = make_rng(derive_seed(5502, Stream::Test));
        for (int i = 0; i < 24 && fail.empty(); ++i) {
            const double sigma = uniform(gen, 0.05, 0.97);
            const double gamma = uniform(gen, 0.2, 6.0);
            const std::size_t m = 2 + static_cast<std::size_t>(i % 11);
            const double eps_cons = uniform(gen, 1e-3, 0.5);
            const double eps_comm =
                uniform(gen, 0.0, 0.3) * eps_cons / std::sqrt(static_cast<double>(m));

            bool oracle_feasible;
            if (eps_comm == 0.0) {
                oracle_feasible =
                    plan_phi(sigma, gamma, 0.0, m, 1.0) <= eps_cons || (sigma < 1.0 && gamma > 0.0);
            } else {
                const double n_star = std::log(-2.0 * eps_comm *
                                               std::sqrt(static_cast<double>(m)) /
                                               (gamma * std::log(sigma))) /
                                      std::log(sigma);
                double best = plan_phi(sigma, gamma, eps_comm, m, 1.0);
                if (n_star > 1.0) {
                    best = std::min(best,
                                    plan_phi(sigma, gamma, eps_comm, m, std::floor(n_star)));
                    best = std::min(best,
                                    plan_phi(sigma, gamma, eps_comm, m, std::ceil(n_star)));
                }
                oracle_feasible = best <= eps_cons;
            }

            bool planner_feasible = true;
            int n = 0;
            try {
                n = plan_n_loop(sigma, gamma, eps_cons, eps_comm, m);
            } catch (const Infeasible&) {
                planner_feasible = false;
            }
            if (planner_feasible != oracle_feasible)
                fail = fmt("feasibility mismatch at sigma=%.4f gamma=%.4f eps=%.4g "
                           "eps_comm=%.4g m=%zu: planner %d oracle %d",
                           sigma, gamma, eps_cons, eps_comm, m, planner_feasible ? 1 : 0,
                           oracle_feasible ? 1 : 0);
            else if (planner_feasible &&
                     plan_phi(sigma, gamma, eps_comm, m, static_cast<double>(n)) > eps_cons)
                fail = fmt("planned count does not satisfy the bound (n=%d)", n);
        }
        // Budget-dominated corner: the communication term alone exceeds the
        // target for every loop count.
        for (int i = 0; i < 6 && fail.empty(); ++i) {
            const std::size_t m = 3 + static_cast<std::size_t>(i);
            const double eps_cons = 0.05 + 0.02 * i;
            const double eps_comm = eps_cons / (2.0 * std::sqrt(static_cast<double>(m))) * 1.01;
            try {
                plan_n_loop(0.5, 4.0, eps_cons, eps_comm, m);
                fail = fmt("budget-dominated tuple was not reported infeasible (m=%zu)", m);
            } catch (const Infeasible&) {
            }
        }
    }

    report(5, fail.empty(),
           fail.empty()
               ? fmt("planner matches the ceiling formula on 20 tuples, executed lossy plans "
                     "meet the disagreement target (worst theta/eps_cons %.3f), and "
                     "infeasibility matches the convexity oracle on 30 tuples",
                     worst_theta_slack)
               : fail);
}

// --- criterion 6 -----------------------------------------------------------

void criterion6() {
    // The nu * eps_comm drift bound is a convexity fact about arithmetic
    // pooling (each round is a weighted average, which is L1-nonexpansive,
    // plus at most eps of fresh corruption). Geometric pooling is not
    // L1-nonexpansive and can amplify a transmission error; its measured
    // worst drift ratio is reported alongside, not asserted.
    const StateGrid grid = test_util::grid_1d(0.0, 1.0, 64);
    double worst_ratio_lin = 0.0, worst_ratio_log = 0.0;
    std::string fail;

    for (int seed = 0; seed < 10 && fail.empty(); ++seed) {
        const std::size_t m = 4 + static_cast<std::size_t>(seed % 7);
        const Digraph g = Digraph::random_connected(m, 0.3, 6600 + seed);
        const WeightMatrix P = make_balanced_weights(g, WeightMethod::Metropolis);
        std::vector<GridDensity> set;
        for (std::size_t j = 0; j < m; ++j)
            set.push_back(test_util::random_density(grid, 6700 + seed * 20 + static_cast<int>(j)));

        for (const double eps : {1e-3, 1e-2}) {
            const TransmitHook hook = [eps](const GridDensity& p, std::size_t, int) {
                return nudge_toward_uniform(p, eps);
            };
            for (const PoolKind pool : {PoolKind::LinOP, PoolKind::LogOP}) {
                std::vector<GridDensity> clean = set, lossy = set;
                for (int nu = 1; nu <= 20 && fail.empty(); ++nu) {
                    clean = consensus_round(clean, P, pool);
                    lossy = consensus_round(lossy, P, pool, hook, nu);
                    for (std::size_t j = 0; j < m; ++j) {
                        const double gap = l1_distance(clean[j], lossy[j]);
                        const double ratio = gap / (static_cast<double>(nu) * eps);
                        if (pool == PoolKind::LinOP) {
                            worst_ratio_lin = std::max(worst_ratio_lin, ratio);
                            if (gap > static_cast<double>(nu) * eps + 1e-12)
                                fail = fmt("arithmetic-pool drift exceeded nu*eps: nu=%d "
                                           "eps=%.0e agent %zu gap %.6g",
                                           nu, eps, j, gap);
                        } else {
                            worst_ratio_log = std::max(worst_ratio_log, ratio);
                        }
                    }
                }
            }
        }
    }

    report(6, fail.empty(),
           fail.empty()
               ? fmt("lossy arithmetic-pool rounds stay within nu*eps_comm of clean rounds "
                     "for eps in {1e-3, 1e-2}, nu<=20, 10 seeds (worst gap ratio %.3f)",
                     worst_ratio_lin)
               : fail);
    info(6, fmt("geometric pooling has no such nonexpansiveness guarantee; measured worst "
                "drift ratio %.3f on the same instances%s",
                worst_ratio_log,
                worst_ratio_log > 1.0 ? " (exceeds 1, confirming the bound cannot be "
                                        "promised for that pool)"
                                      : ""));
}

// --- criterion 7 -----------------------------------------------------------

void criterion7() {
    const StateGrid grid = test_util::grid_1d(0.0, 1.0, 64);
    const std::vector<std::pair<std::size_t, std::size_t>> shapes = {
        {6, 2}, {7, 3}, {8, 3}, {9, 4}, {10, 5}};
    double worst_margin = -1.0, worst_limit_shift = 0.0, worst_limit_gap = 0.0;
    double worst_perturbation = 0.0;

    for (std::size_t t = 0; t < shapes.size(); ++t) {
        const auto [m, m1] = shapes[t];
        std::vector<std::size_t> trackers(m1);
        for (std::size_t j = 0; j < m1; ++j) trackers[j] = j;
        const TrackingPartition part(m, trackers);
        const Digraph g = Digraph::ring(m);
        const WeightMatrix P = make_hierarchical_weights(g, part, WeightMethod::Metropolis);
        const WeightMatrix block = to_block_form(P, part);
        const double sigma1 = second_largest_singular_value(
            block.topLeftCorner(static_cast<Eigen::Index>(m1), static_cast<Eigen::Index>(m1)));

        std::vector<GridDensity> initial;
        for (std::size_t j = 0; j < m; ++j)
            initial.push_back(test_util::random_density(grid, 7700 + t * 20 + j));

        // Tracking-block contraction, anchored form as in criterion 1.
        {
            const GridDensity ref = hierarchical_consensual_pdf(initial, part, PoolKind::LogOP);
            std::vector<GridDensity> trk;
            for (std::size_t j = 0; j < m1; ++j) trk.push_back(initial[j]);
            const auto s0 = anchored_log_ratios(trk, ref);
            std::vector<double> norm0(grid.size());
            for (std::size_t x = 0; x < grid.size(); ++x) norm0[x] = cell_norm(s0, x);

            std::vector<GridDensity> cur = initial;
            double rate = 1.0;
            for (int nu = 1; nu <= 50; ++nu) {
                cur = consensus_round(cur, P, PoolKind::LogOP);
                rate *= sigma1;
                std::vector<GridDensity> cur_trk;
                for (std::size_t j = 0; j < m1; ++j) cur_trk.push_back(cur[j]);
                const auto s = anchored_log_ratios(cur_trk, ref);
                for (std::size_t x = 0; x < grid.size(); ++x)
                    worst_margin = std::max(worst_margin, cell_norm(s, x) - rate * norm0[x]);
            }
        }

        // Exclusion: perturbing non-tracking initials (L1 pushed to just
        // under 0.5 each) must not move the 500-round limit.
        for (const PoolKind pool : {PoolKind::LinOP, PoolKind::LogOP}) {
            std::vector<GridDensity> pert = initial;
            for (std::size_t j = m1; j < m; ++j) {
                const GridDensity q = test_util::random_density(grid, 7900 + t * 20 + j);
                const double d = l1_distance(q, initial[j]);
                const double eta = std::min(1.0, 0.4995 / d);
                std::vector<double> mixed(grid.size());
                for (std::size_t x = 0; x < grid.size(); ++x)
                    mixed[x] = (1.0 - eta) * initial[j].value(x) + eta * q.value(x);
                pert[j] = GridDensity::from_normalized(grid, std::move(mixed));
                worst_perturbation = std::max(worst_perturbation, l1_distance(pert[j], initial[j]));
            }

            std::vector<GridDensity> a = initial, b = pert;
            for (int nu = 0; nu < 500; ++nu) {
                a = consensus_round(a, P, pool);
                b = consensus_round(b, P, pool);
            }
            const GridDensity ref = hierarchical_consensual_pdf(initial, part, pool);
            for (std::size_t j = 0; j < m; ++j) {
                worst_limit_shift = std::max(worst_limit_shift, l1_distance(a[j], b[j]));
                worst_limit_gap = std::max(worst_limit_gap, l1_distance(a[j], ref));
            }
        }
    }

    const bool pass = worst_margin <= 1e-9 && worst_limit_shift < 1e-6 && worst_limit_gap < 1e-6;
    report(7, pass,
           fmt("partial-observer runs: tracking-block contraction overshoot %.3g <= 1e-9, "
               "and L1-%.4f perturbations of non-tracking initials shift the 500-round limit "
               "by %.3g < 1e-6 (limit matches the tracking-only pool within %.3g)",
               worst_margin, worst_perturbation, worst_limit_shift, worst_limit_gap));
}

// --- criterion 8 -----------------------------------------------------------

void criterion8() {
    const double a = 0.9, c = 1.0, q = 0.25, r = 1.0;
    const StateGrid grid({0.0}, {20.0}, {256});
    const TransitionKernel kernel = TransitionKernel::linear_gaussian_1d(grid, a, c, q);

    std::vector<LikelihoodFn> models;
    models.push_back([r](std::span<const double> z, std::span<const double> x) {
        const double d = z[0] - x[0];
        return std::exp(-0.5 * d * d / r) / std::sqrt(2.0 * std::numbers::pi * r);
    });

    GridDensity post = test_util::gaussian_density(grid, 8.0, 2.0);
    double kf_mean = 8.0, kf_var = 4.0;
    double truth = 10.0;
    auto gen_truth = make_rng(derive_seed(8800, Stream::TruthProcess));
    auto gen_meas = make_rng(derive_seed(8800, Stream::Measurement));

    double worst_mean = 0.0, worst_var = 0.0;
    for (int k = 1; k <= 50; ++k) {
        truth = a * truth + c + normal(gen_truth, 0.0, std::sqrt(q));
        const double z = truth + normal(gen_meas, 0.0, std::sqrt(r));

        post = predict(post, kernel);
        Measurement meas;
        meas.value = {z};
        const std::vector<Measurement> zs = {meas};
        post = update_with_exchange(post, zs, models);

        const double pred_mean = a * kf_mean + c;
        const double pred_var = a * a * kf_var + q;
        const double gain = pred_var / (pred_var + r);
        kf_mean = pred_mean + gain * (z - pred_mean);
        kf_var = (1.0 - gain) * pred_var;

        const Moments mom = moments(post);
        worst_mean = std::max(worst_mean, std::abs(mom.mean(0) - kf_mean) / std::abs(kf_mean));
        worst_var = std::max(worst_var, std::abs(mom.covariance(0, 0) - kf_var) / kf_var);
    }

    const bool pass = worst_mean <= 0.02 && worst_var <= 0.02;
    report(8, pass,
           fmt("single-agent grid filter tracks the closed-form linear-Gaussian recursion over "
               "50 steps (worst relative error: mean %.3g, variance %.3g; limit 0.02)",
               worst_mean, worst_var));
}

// --- criterion 9 -----------------------------------------------------------

sim::ScenarioConfig analog_scenario(std::uint64_t seed, PoolKind pool) {
    sim::ScenarioConfig cfg;
    // Arc rate 3 sweeps all 33 agents within ~11 steps, so the coverage
    // transient ends well before the horizon and a settle point exists.
    cfg.steps = 60;
    cfg.seed = seed;
    cfg.mode = sim::RunMode::Hbcf;
    cfg.pool = pool;
    cfg.lower = {10.0};
    cfg.upper = {20.0};
    cfg.cells = {128};
    cfg.dynamics = sim::DynamicsModel::IdentityWalk;
    cfg.process_noise_std = {0.05};
    cfg.truth_initial = {14.6};
    cfg.truth_stochastic = false;
    cfg.count = 33;
    cfg.noise_variance_base = 1.0;  // heterogeneous: variance 1 + 0.05 j
    cfg.noise_variance_step = 0.05;
    cfg.noise_variance_scale = 1.0;
    cfg.measurement_exchange = false;
    cfg.visibility = sim::VisibilityKind::RotatingArc;
    cfg.arc_width = 7;
    cfg.arc_rate = 3.0;
    cfg.topology = sim::TopologyKind::Ring;
    cfg.weight_method = WeightMethod::Metropolis;
    cfg.n_loop = 10;
    cfg.eps_cons = 0.2;
    return cfg;
}

// First (1-based) step at which the network estimate comes within tol (L1)
// of its final value. The final step itself always qualifies.
int settle_time(const sim::RunResult& run, double tol) {
    for (std::size_t i = 0; i < run.per_step_consensual.size(); ++i)
        if (l1_distance(run.per_step_consensual[i], run.per_step_consensual.back()) <= tol)
            return static_cast<int>(i) + 1;
    return static_cast<int>(run.per_step_consensual.size());
}

double median(std::vector<int> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void criterion9() {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<int> t_lin, t_log;
    for (std::uint64_t seed = 601; seed <= 610; ++seed) {
        t_lin.push_back(settle_time(sim::run_scenario(analog_scenario(seed, PoolKind::LinOP)), 0.1));
        t_log.push_back(settle_time(sim::run_scenario(analog_scenario(seed, PoolKind::LogOP)), 0.1));
    }
    const double med_lin = median(t_lin), med_log = median(t_log);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const bool pass = med_log < med_lin && elapsed < 120.0;
    std::string lin_list, log_list;
    for (int v : t_lin) lin_list += fmt("%d ", v);
    for (int v : t_log) log_list += fmt("%d ", v);
    report(9, pass,
           fmt("33-agent heterogeneous-noise partial-observer runs, 10 seeds: geometric "
               "pooling settles at median step %.1f < arithmetic %.1f (%.1f s < 120 s)",
               med_log, med_lin, elapsed));
    info(9, fmt("settle steps per seed: geometric [ %s], arithmetic [ %s]", log_list.c_str(),
                lin_list.c_str()));
}

// --- criterion 10 ----------------------------------------------------------

sim::ScenarioConfig determinism_scenario(std::uint64_t seed) {
    sim::ScenarioConfig cfg;
    cfg.steps = 3;
    cfg.seed = seed;
    cfg.mode = sim::RunMode::Hbcf;
    cfg.pool = PoolKind::LogOP;
    cfg.lower = {0.0};
    cfg.upper = {10.0};
    cfg.cells = {48};
    cfg.dynamics = sim::DynamicsModel::IdentityWalk;
    cfg.process_noise_std = {0.2};
    cfg.truth_initial = {4.0};
    cfg.truth_stochastic = true;
    cfg.count = 6;
    cfg.noise_variance_base = 0.5;
    cfg.noise_variance_step = 0.1;
    cfg.measurement_exchange = true;
    cfg.visibility = sim::VisibilityKind::RotatingArc;
    cfg.arc_width = 3;
    cfg.arc_rate = 1.0;
    cfg.topology = sim::TopologyKind::Ring;
    cfg.n_loop = 3;
    cfg.eps_cons = 0.3;
    cfg.channel.codec = Codec::GaussianSum;
    cfg.channel.eps_comm = 0.01;
    cfg.channel.n_g = 2;
    cfg.channel.n_g_cap = 6;
    return cfg;
}

std::string metrics_bytes(const sim::ScenarioConfig& cfg) {
    std::ostringstream out;
    sim::write_metrics_csv(sim::run_scenario(cfg), out);
    return std::move(out).str();
}

void criterion10() {
    const std::string first = metrics_bytes(determinism_scenario(12345));
    const std::string second = metrics_bytes(determinism_scenario(12345));
    const std::string other = metrics_bytes(determinism_scenario(54321));
    const bool pass = first == second && first != other && !first.empty();
    report(10, pass,
           fmt("identical seeds reproduce the metrics stream byte for byte (%zu bytes); a "
               "different seed diverges",
               first.size()));
}

} // namespace

int main() {
    criterion1();
    criterion2();
    criterion3();
    criterion4();
    criterion5();
    criterion6();
    criterion7();
    criterion8();
    criterion9();
    criterion10();
    if (g_failures == 0)
        std::printf("all 10 criteria passed\n");
    else
        std::printf("%d criteria FAILED\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}

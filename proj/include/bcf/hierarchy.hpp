#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "bcf/bayes.hpp"
#include "bcf/consensus.hpp"
#include "bcf/density.hpp"
#include "bcf/errors.hpp"
#include "bcf/network.hpp"

// Partial-observer (hierarchical) consensus filtering: only the agents that
// currently observe the process update and drive the consensus; the rest
// predict and follow. Structurally this is a block-triangular weight matrix,
// with the tracking block balanced and strongly connected on its own.

namespace bcf {

class TrackingPartition {
public:
    TrackingPartition(std::size_t m, std::vector<std::size_t> tracking_ids)
        : m_(m), mask_(m, 0), tracking_(std::move(tracking_ids)) {
        if (m == 0) throw ConfigError("partition: need at least one agent");
        std::sort(tracking_.begin(), tracking_.end());
        tracking_.erase(std::unique(tracking_.begin(), tracking_.end()), tracking_.end());
        for (std::size_t id : tracking_) {
            if (id >= m_) throw ConfigError("partition: tracking id out of range");
            mask_[id] = 1;
        }
        for (std::size_t j = 0; j < m_; ++j)
            if (!mask_[j]) non_tracking_.push_back(j);
    }

    static TrackingPartition all_tracking(std::size_t m) {
        std::vector<std::size_t> ids(m);
        for (std::size_t j = 0; j < m; ++j) ids[j] = j;
        return TrackingPartition(m, std::move(ids));
    }

    std::size_t size() const { return m_; }
    std::size_t m1() const { return tracking_.size(); }
    bool is_tracking(std::size_t j) const { return mask_[j] != 0; }
    const std::vector<std::size_t>& tracking_ids() const { return tracking_; }
    const std::vector<std::size_t>& non_tracking_ids() const { return non_tracking_; }

    // Agent order with the tracking block first (block form used by the
    // structural checks).
    std::vector<std::size_t> block_order() const {
        std::vector<std::size_t> order = tracking_;
        order.insert(order.end(), non_tracking_.begin(), non_tracking_.end());
        return order;
    }

private:
    std::size_t m_;
    std::vector<char> mask_;
    std::vector<std::size_t> tracking_;
    std::vector<std::size_t> non_tracking_;
};

// Reorders a weight matrix (given in original agent order) into block form:
// tracking agents first.
inline WeightMatrix to_block_form(const WeightMatrix& P, const TrackingPartition& part) {
    const auto order = part.block_order();
    const auto m = static_cast<Eigen::Index>(order.size());
    if (P.rows() != m || P.cols() != m)
        throw ConfigError("to_block_form: size mismatch with partition");
    WeightMatrix B(m, m);
    for (Eigen::Index r = 0; r < m; ++r)
        for (Eigen::Index c = 0; c < m; ++c)
            B(r, c) = P(static_cast<Eigen::Index>(order[static_cast<std::size_t>(r)]),
                        static_cast<Eigen::Index>(order[static_cast<std::size_t>(c)]));
    return B;
}

inline HierarchyReport validate_partitioned(const WeightMatrix& P,
                                            const TrackingPartition& part) {
    if (part.m1() == 0) throw ConfigError("validate_partitioned: no tracking agents");
    return validate_hierarchical(to_block_form(P, part), part.m1());
}

// Builds the partial-observer weight matrix in original agent order:
// tracking rows carry balanced weights over the tracking-induced subgraph
// (and nothing else), non-tracking rows average uniformly over their full
// inclusive in-neighborhood.
inline WeightMatrix make_hierarchical_weights(const Digraph& g, const TrackingPartition& part,
                                              WeightMethod method) {
    if (part.size() != g.size())
        throw ConfigError("hierarchical weights: partition size does not match graph");
    const std::size_t m1 = part.m1();
    if (m1 == 0) throw PartitionViolation("hierarchical weights: no tracking agents");
    const auto& tid = part.tracking_ids();

    const Digraph sub = g.induced(tid);
    if (m1 >= 2 && !sub.strongly_connected())
        throw PartitionViolation("hierarchical weights: tracking subgraph is not strongly connected");
    WeightMatrix P1 = m1 == 1 ? WeightMatrix::Ones(1, 1) : make_balanced_weights(sub, method);

    const auto m = static_cast<Eigen::Index>(g.size());
    WeightMatrix P = WeightMatrix::Zero(m, m);
    for (std::size_t a = 0; a < m1; ++a)
        for (std::size_t b = 0; b < m1; ++b)
            P(static_cast<Eigen::Index>(tid[a]), static_cast<Eigen::Index>(tid[b])) =
                P1(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    for (std::size_t j : part.non_tracking_ids()) {
        auto hears = g.in_neighbors(j);
        hears.push_back(j);
        const double w = 1.0 / static_cast<double>(hears.size());
        for (std::size_t l : hears)
            P(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l)) = w;
    }
    return P;
}

// Consensual reference of the partial-observer network: the uniform pool of
// the tracking agents' densities (geometric for LogOP rounds, arithmetic for
// LinOP rounds). Non-tracking agents do not contribute.
inline GridDensity hierarchical_consensual_pdf(std::span<const GridDensity> densities,
                                               const TrackingPartition& part, PoolKind pool,
                                               const NormalizeOptions& opts = {}) {
    const std::size_t m1 = part.m1();
    if (m1 == 0) throw PartitionViolation("consensual pdf: no tracking agents");
    std::vector<GridDensity> tracking;
    tracking.reserve(m1);
    for (std::size_t id : part.tracking_ids()) tracking.push_back(densities[id]);
    const std::vector<double> w(m1, 1.0 / static_cast<double>(m1));
    return pool == PoolKind::LinOP ? arithmetic_pool(tracking, w, opts)
                                   : geometric_pool(tracking, w, opts);
}

// Called after the update stage (nu = 0) and after every consensus round
// with the current densities and the consensual reference.
using LoopObserver =
    std::function<void(int nu, std::span<const GridDensity>, const GridDensity& consensual)>;

struct StepConfig {
    PoolKind pool = PoolKind::LogOP;
    int n_loop = 1;
    TransmitHook hook;        // optional lossy-channel transform
    LoopObserver observer;    // optional per-round bookkeeping
    NormalizeOptions density; // flooring/cap options threaded through
};

struct StepResult {
    std::vector<GridDensity> densities;        // after the consensus stage
    GridDensity consensual;                    // reference the loops converge to
    std::vector<Disagreement> per_loop;        // index nu = 0..n_loop, against `consensual`
};

// One full partial-observer filter step: predict everyone, update the
// tracking agents with their (own plus exchanged) measurements, then run
// n_loop consensus rounds under the block-structured weights. Non-tracking
// agents must not carry measurements.
inline StepResult run_hbcf_step(std::span<const GridDensity> previous,
                                const TransitionKernel& kernel,
                                std::span<const std::vector<Measurement>> measurements,
                                std::span<const LikelihoodFn> models, const WeightMatrix& P,
                                const TrackingPartition& part, const StepConfig& cfg) {
    const std::size_t m = previous.size();
    if (m != part.size() || measurements.size() != m)
        throw ConfigError("hbcf step: agent count mismatch");
    if (cfg.n_loop < 0) throw ConfigError("hbcf step: n_loop must be nonnegative");
    const auto report = validate_partitioned(P, part);
    if (!report.ok()) {
        std::string what = "hbcf step: weight matrix violates the partition:";
        for (const auto& v : report.violations) what += " " + v + ";";
        throw PartitionViolation(what);
    }
    for (std::size_t j : part.non_tracking_ids())
        if (!measurements[j].empty())
            throw PartitionViolation("hbcf step: non-tracking agent carries measurements");

    std::vector<GridDensity> current;
    current.reserve(m);
    for (std::size_t j = 0; j < m; ++j) {
        GridDensity predicted = predict(previous[j], kernel, cfg.density);
        current.push_back(part.is_tracking(j)
                              ? update_with_exchange(predicted, measurements[j], models, cfg.density)
                              : std::move(predicted));
    }

    GridDensity consensual = hierarchical_consensual_pdf(current, part, cfg.pool, cfg.density);
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

} // namespace bcf

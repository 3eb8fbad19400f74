#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <queue>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bcf/errors.hpp"
#include "bcf/rng.hpp"

// Communication topology and consensus weight matrices.
//
// An edge (from -> to) means `from` transmits to `to`; the in-neighbors of
// agent j are therefore the agents j hears. Weight matrices are row maps:
// row j holds the weights agent j places on its inclusive in-neighborhood
// (in-neighbors plus itself), so one consensus step is  new_j = sum_l P(j,l) * old_l.

namespace bcf {

using WeightMatrix = Eigen::MatrixXd;

class Digraph {
public:
    explicit Digraph(std::size_t m) : m_(m), adj_(m * m, 0) {
        if (m == 0) throw ConfigError("digraph: need at least one node");
    }

    std::size_t size() const { return m_; }

    void add_edge(std::size_t from, std::size_t to) {
        if (from >= m_ || to >= m_) throw ConfigError("digraph: edge endpoint out of range");
        if (from == to) throw ConfigError("digraph: self loops are implicit, not edges");
        adj_[from * m_ + to] = 1;
    }

    void add_symmetric_edge(std::size_t a, std::size_t b) {
        add_edge(a, b);
        add_edge(b, a);
    }

    bool has_edge(std::size_t from, std::size_t to) const { return adj_[from * m_ + to] != 0; }

    std::size_t out_degree(std::size_t j) const {
        std::size_t d = 0;
        for (std::size_t t = 0; t < m_; ++t) d += adj_[j * m_ + t];
        return d;
    }

    std::size_t in_degree(std::size_t j) const {
        std::size_t d = 0;
        for (std::size_t f = 0; f < m_; ++f) d += adj_[f * m_ + j];
        return d;
    }

    std::vector<std::size_t> in_neighbors(std::size_t j) const {
        std::vector<std::size_t> v;
        for (std::size_t f = 0; f < m_; ++f)
            if (adj_[f * m_ + j]) v.push_back(f);
        return v;
    }

    std::vector<std::size_t> out_neighbors(std::size_t j) const {
        std::vector<std::size_t> v;
        for (std::size_t t = 0; t < m_; ++t)
            if (adj_[j * m_ + t]) v.push_back(t);
        return v;
    }

    bool symmetric() const {
        for (std::size_t a = 0; a < m_; ++a)
            for (std::size_t b = a + 1; b < m_; ++b)
                if (adj_[a * m_ + b] != adj_[b * m_ + a]) return false;
        return true;
    }

    bool strongly_connected() const { return reachable_from(0, false) && reachable_from(0, true); }

    // Subgraph induced by `nodes`; node k of the result is nodes[k].
    Digraph induced(const std::vector<std::size_t>& nodes) const {
        Digraph sub(nodes.size());
        for (std::size_t a = 0; a < nodes.size(); ++a)
            for (std::size_t b = 0; b < nodes.size(); ++b)
                if (a != b && has_edge(nodes[a], nodes[b])) sub.add_edge(a, b);
        return sub;
    }

    static Digraph ring(std::size_t m) {
        Digraph g(m);
        if (m < 2) return g;
        for (std::size_t j = 0; j < m; ++j) g.add_symmetric_edge(j, (j + 1) % m);
        return g;
    }

    static Digraph directed_cycle(std::size_t m) {
        Digraph g(m);
        if (m < 2) return g;
        for (std::size_t j = 0; j < m; ++j) g.add_edge(j, (j + 1) % m);
        return g;
    }

    static Digraph path(std::size_t m) {
        Digraph g(m);
        for (std::size_t j = 0; j + 1 < m; ++j) g.add_symmetric_edge(j, j + 1);
        return g;
    }

    static Digraph complete(std::size_t m) {
        Digraph g(m);
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = a + 1; b < m; ++b) g.add_symmetric_edge(a, b);
        return g;
    }

    static Digraph star(std::size_t m) {
        Digraph g(m);
        for (std::size_t j = 1; j < m; ++j) g.add_symmetric_edge(0, j);
        return g;
    }

    // Random symmetric connected graph: a random attachment tree plus extra
    // symmetric edges with probability `extra_edge_prob` each.
    static Digraph random_connected(std::size_t m, double extra_edge_prob, std::uint64_t seed) {
        Digraph g(m);
        auto gen = make_rng(seed);
        for (std::size_t j = 1; j < m; ++j) {
            const auto parent = static_cast<std::size_t>(uniform01(gen) * static_cast<double>(j));
            g.add_symmetric_edge(j, std::min(parent, j - 1));
        }
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = a + 1; b < m; ++b)
                if (!g.has_edge(a, b) && uniform01(gen) < extra_edge_prob) g.add_symmetric_edge(a, b);
        return g;
    }

private:
    bool reachable_from(std::size_t start, bool reverse) const {
        std::vector<char> seen(m_, 0);
        std::queue<std::size_t> q;
        q.push(start);
        seen[start] = 1;
        std::size_t count = 1;
        while (!q.empty()) {
            const std::size_t u = q.front();
            q.pop();
            for (std::size_t v = 0; v < m_; ++v) {
                const bool edge = reverse ? has_edge(v, u) : has_edge(u, v);
                if (edge && !seen[v]) {
                    seen[v] = 1;
                    ++count;
                    q.push(v);
                }
            }
        }
        return count == m_;
    }

    std::size_t m_;
    std::vector<char> adj_;
};

// Positive off-diagonal pattern of P, read as edges (l -> j) for P(j,l) > 0.
inline Digraph pattern_digraph(const WeightMatrix& P) {
    const auto m = static_cast<std::size_t>(P.rows());
    Digraph g(m);
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t l = 0; l < m; ++l)
            if (j != l && P(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l)) > 0.0)
                g.add_edge(l, j);
    return g;
}

struct WeightFlags {
    bool row_stochastic = false;
    bool column_stochastic = false; // balanced
    bool positive_diagonal = false;
    bool conformant = false; // positive exactly on the inclusive in-neighborhood
};

inline WeightFlags check_weights(const WeightMatrix& P, const Digraph& g, double tol = 1e-12) {
    const auto m = static_cast<Eigen::Index>(g.size());
    if (P.rows() != m || P.cols() != m) throw GridMismatch("check_weights: size mismatch with graph");
    WeightFlags f;
    f.row_stochastic = true;
    f.column_stochastic = true;
    f.positive_diagonal = true;
    f.conformant = true;
    for (Eigen::Index j = 0; j < m; ++j) {
        if (!(P(j, j) > 0.0)) f.positive_diagonal = false;
        double row = 0.0, col = 0.0;
        for (Eigen::Index l = 0; l < m; ++l) {
            if (P(j, l) < 0.0 || !std::isfinite(P(j, l))) {
                f.row_stochastic = f.column_stochastic = false;
                f.conformant = false;
            }
            row += P(j, l);
            col += P(l, j);
            if (j != l) {
                const bool hears = g.has_edge(static_cast<std::size_t>(l), static_cast<std::size_t>(j));
                if ((P(j, l) > 0.0) != hears) f.conformant = false;
            }
        }
        if (std::abs(row - 1.0) > tol) f.row_stochastic = false;
        if (std::abs(col - 1.0) > tol) f.column_stochastic = false;
    }
    return f;
}

inline void require_row_stochastic(const WeightMatrix& P, double tol = 1e-12) {
    if (P.rows() != P.cols() || P.rows() == 0) throw ConfigError("weights: matrix must be square");
    for (Eigen::Index j = 0; j < P.rows(); ++j) {
        double row = 0.0;
        for (Eigen::Index l = 0; l < P.cols(); ++l) {
            if (P(j, l) < 0.0 || !std::isfinite(P(j, l)))
                throw BadWeights("weights: entries must be finite and nonnegative");
            row += P(j, l);
        }
        if (std::abs(row - 1.0) > tol) throw BadWeights("weights: rows must sum to 1");
    }
}

// Unique stationary distribution pi of a row-stochastic irreducible P
// (pi^T P = pi^T), found by power iteration on P^T.
inline Eigen::VectorXd stationary_distribution(const WeightMatrix& P, double tol = 1e-12,
                                               std::size_t max_iters = 1000000) {
    require_row_stochastic(P);
    if (!pattern_digraph(P).strongly_connected())
        throw NotIrreducible("stationary_distribution: weight pattern is not strongly connected");
    const Eigen::Index m = P.rows();
    Eigen::VectorXd pi = Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m));
    for (std::size_t it = 0; it < max_iters; ++it) {
        Eigen::VectorXd next = P.transpose() * pi;
        next /= next.sum();
        const double step = (next - pi).cwiseAbs().maxCoeff();
        pi = next;
        if (step <= tol) {
            if ((P.transpose() * pi - pi).cwiseAbs().maxCoeff() > 1e-10)
                throw NoConvergence("stationary_distribution: fixed point check failed");
            return pi;
        }
    }
    throw NoConvergence("stationary_distribution: power iteration hit the iteration cap");
}

// Second-largest singular value of P: sqrt of the second-largest eigenvalue
// of P^T P. This is the per-loop contraction factor of balanced consensus.
inline double second_largest_singular_value(const WeightMatrix& P) {
    if (P.rows() != P.cols()) throw ConfigError("sigma: matrix must be square");
    if (P.rows() < 2) throw Degenerate("sigma: needs at least a 2x2 matrix");
    // Direct SVD rather than eigenvalues of P^T P: squaring then taking the
    // root turns machine noise near zero into sqrt(eps)-sized values.
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(P);
    return svd.singularValues()(1);
}

enum class WeightMethod {
    UniformInclusive, // common weight 1/(1 + max in-degree); balanced iff in-degree == out-degree
    Metropolis,       // 1/(1 + max(deg_j, deg_l)) on symmetric graphs; doubly stochastic
};

// Builds a balanced (doubly stochastic) conformant weight matrix with a
// positive diagonal, or throws CannotBalance if the method does not apply.
inline WeightMatrix make_balanced_weights(const Digraph& g, WeightMethod method) {
    const auto m = static_cast<Eigen::Index>(g.size());
    WeightMatrix P = WeightMatrix::Zero(m, m);
    if (method == WeightMethod::UniformInclusive) {
        std::size_t d_max = 0;
        for (std::size_t j = 0; j < g.size(); ++j) {
            if (g.in_degree(j) != g.out_degree(j))
                throw CannotBalance("uniform-inclusive weights need in-degree == out-degree at every node");
            d_max = std::max(d_max, g.in_degree(j));
        }
        const double a = 1.0 / (1.0 + static_cast<double>(d_max));
        for (std::size_t j = 0; j < g.size(); ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            for (std::size_t l : g.in_neighbors(j)) P(jj, static_cast<Eigen::Index>(l)) = a;
            P(jj, jj) = 1.0 - a * static_cast<double>(g.in_degree(j));
        }
    } else {
        if (!g.symmetric()) throw CannotBalance("metropolis weights need a symmetric graph");
        for (std::size_t j = 0; j < g.size(); ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            double off = 0.0;
            for (std::size_t l : g.in_neighbors(j)) {
                const double a =
                    1.0 / (1.0 + static_cast<double>(std::max(g.in_degree(j), g.in_degree(l))));
                P(jj, static_cast<Eigen::Index>(l)) = a;
                off += a;
            }
            P(jj, jj) = 1.0 - off;
        }
    }
    return P;
}

// Block-structure report for partial-observer weight matrices: agents
// 0..m1-1 are the tracking block. The tracking block must not hear the
// rest, must itself be balanced and strongly connected, and the whole
// pattern must stay row-stochastic and strongly connected.
struct HierarchyReport {
    bool coupling_block_zero = false;
    bool tracking_block_row_stochastic = false;
    bool tracking_block_balanced = false;
    bool tracking_block_connected = false;
    bool row_stochastic = false;
    bool positive_diagonal = false;
    // Every non-tracking agent can be reached from the tracking set along
    // information flow; full strong connectivity is impossible here by
    // construction (tracking rows ignore non-tracking agents).
    bool non_tracking_reachable = false;
    std::vector<std::string> violations;

    bool ok() const { return violations.empty(); }
};

inline HierarchyReport validate_hierarchical(const WeightMatrix& P, std::size_t m1,
                                             double tol = 1e-12) {
    const auto m = static_cast<std::size_t>(P.rows());
    if (P.rows() != P.cols() || m == 0) throw ConfigError("validate_hierarchical: P must be square");
    if (m1 == 0 || m1 > m)
        throw ConfigError("validate_hierarchical: need 1 <= m1 <= m");
    HierarchyReport r;

    r.coupling_block_zero = true;
    for (std::size_t j = 0; j < m1; ++j)
        for (std::size_t l = m1; l < m; ++l)
            if (P(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l)) != 0.0)
                r.coupling_block_zero = false;
    if (!r.coupling_block_zero)
        r.violations.push_back("tracking rows place weight on non-tracking agents");

    r.row_stochastic = true;
    r.positive_diagonal = true;
    for (std::size_t j = 0; j < m; ++j) {
        double row = 0.0;
        for (std::size_t l = 0; l < m; ++l) {
            const double w = P(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l));
            if (w < 0.0 || !std::isfinite(w)) r.row_stochastic = false;
            row += w;
        }
        if (std::abs(row - 1.0) > tol) r.row_stochastic = false;
        if (!(P(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) > 0.0))
            r.positive_diagonal = false;
    }
    if (!r.row_stochastic) r.violations.push_back("P is not row-stochastic");
    if (!r.positive_diagonal) r.violations.push_back("P has a zero diagonal entry");

    const WeightMatrix P1 = P.topLeftCorner(static_cast<Eigen::Index>(m1),
                                            static_cast<Eigen::Index>(m1));
    r.tracking_block_row_stochastic = true;
    r.tracking_block_balanced = true;
    for (std::size_t j = 0; j < m1; ++j) {
        double row = 0.0, col = 0.0;
        for (std::size_t l = 0; l < m1; ++l) {
            row += P1(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l));
            col += P1(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(j));
        }
        if (std::abs(row - 1.0) > tol) r.tracking_block_row_stochastic = false;
        if (std::abs(col - 1.0) > tol) r.tracking_block_balanced = false;
    }
    if (!r.tracking_block_row_stochastic)
        r.violations.push_back("tracking block is not row-stochastic");
    if (!r.tracking_block_balanced) r.violations.push_back("tracking block is not balanced");

    r.tracking_block_connected = m1 == 1 || pattern_digraph(P1).strongly_connected();
    if (!r.tracking_block_connected)
        r.violations.push_back("tracking block is not strongly connected");

    // Breadth-first reachability from the tracking set along information
    // flow (edge l -> j when P(j, l) > 0).
    {
        const Digraph flow = pattern_digraph(P);
        std::vector<char> seen(m, 0);
        std::vector<std::size_t> queue;
        for (std::size_t j = 0; j < m1; ++j) {
            seen[j] = 1;
            queue.push_back(j);
        }
        for (std::size_t head = 0; head < queue.size(); ++head)
            for (std::size_t v = 0; v < m; ++v)
                if (!seen[v] && flow.has_edge(queue[head], v)) {
                    seen[v] = 1;
                    queue.push_back(v);
                }
        r.non_tracking_reachable =
            std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
    }
    if (!r.non_tracking_reachable)
        r.violations.push_back("a non-tracking agent is unreachable from the tracking set");

    return r;
}

} // namespace bcf

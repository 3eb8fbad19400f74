#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bcf/errors.hpp"

// Gridded probability densities.
//
// State space: an axis-aligned box discretized into a regular cell grid. A
// density is stored as its value at each cell center and integrated with the
// midpoint rule, so sum(values) * cell_measure == 1 for a normalized density.
// All distances, divergences and pooling operators below work cellwise on
// that representation.

namespace bcf {

// Integral-of-one tolerance used by validation checks.
inline constexpr double kNormTolerance = 1e-10;

struct NormalizeOptions {
    // Pre-normalization floor, as a fraction of the uniform density level.
    // Keeps every cell strictly positive so log pooling and KL terms stay
    // finite.
    double floor_fraction = 1e-12;
    // Pointwise cap on the normalized density (bounded-density guard).
    double density_cap = 1e12;
};

class StateGrid {
public:
    // Caps the total cell count so dense per-cell work stays desk-scale.
    static constexpr std::size_t kMaxCells = std::size_t(1) << 22;

    StateGrid(std::vector<double> lower, std::vector<double> upper,
              std::vector<std::size_t> cells)
        : lower_(std::move(lower)), upper_(std::move(upper)), cells_(std::move(cells)) {
        if (lower_.empty() || lower_.size() != upper_.size() || lower_.size() != cells_.size())
            throw ConfigError("grid: lower/upper/cells must be non-empty and equally sized");
        total_ = 1;
        cell_measure_ = 1.0;
        for (std::size_t d = 0; d < dims(); ++d) {
            if (!(upper_[d] > lower_[d]) || !std::isfinite(lower_[d]) || !std::isfinite(upper_[d]))
                throw ConfigError("grid: need finite upper > lower in every dimension");
            if (cells_[d] == 0) throw ConfigError("grid: need at least one cell per dimension");
            if (total_ > kMaxCells / cells_[d]) throw TooLarge("grid: too many cells");
            total_ *= cells_[d];
            cell_measure_ *= width(d);
        }
    }

    std::size_t dims() const { return lower_.size(); }
    std::size_t size() const { return total_; }
    std::size_t extent(std::size_t d) const { return cells_[d]; }
    double lower(std::size_t d) const { return lower_[d]; }
    double upper(std::size_t d) const { return upper_[d]; }
    double width(std::size_t d) const {
        return (upper_[d] - lower_[d]) / static_cast<double>(cells_[d]);
    }
    double cell_measure() const { return cell_measure_; }
    double domain_measure() const { return cell_measure_ * static_cast<double>(total_); }

    // Row-major flattening: the last dimension varies fastest.
    std::size_t flat_index(std::span<const std::size_t> multi) const {
        std::size_t idx = 0;
        for (std::size_t d = 0; d < dims(); ++d) idx = idx * cells_[d] + multi[d];
        return idx;
    }

    std::size_t flat_index(std::initializer_list<std::size_t> multi) const {
        return flat_index(std::span<const std::size_t>(multi.begin(), multi.size()));
    }

    void unravel(std::size_t flat, std::span<std::size_t> multi) const {
        for (std::size_t d = dims(); d-- > 0;) {
            multi[d] = flat % cells_[d];
            flat /= cells_[d];
        }
    }

    std::vector<std::size_t> unravel(std::size_t flat) const {
        std::vector<std::size_t> multi(dims());
        unravel(flat, multi);
        return multi;
    }

    // Center coordinate of cell `i` along dimension `d` when `i` is the
    // per-dimension index.
    double center_coord(std::size_t d, std::size_t i) const {
        return lower_[d] + (static_cast<double>(i) + 0.5) * width(d);
    }

    std::vector<double> center(std::size_t flat) const {
        std::vector<double> x(dims());
        for (std::size_t d = dims(); d-- > 0;) {
            x[d] = center_coord(d, flat % cells_[d]);
            flat /= cells_[d];
        }
        return x;
    }

    void center_into(std::size_t flat, std::span<double> x) const {
        for (std::size_t d = dims(); d-- > 0;) {
            x[d] = center_coord(d, flat % cells_[d]);
            flat /= cells_[d];
        }
    }

    friend bool operator==(const StateGrid& a, const StateGrid& b) {
        return a.lower_ == b.lower_ && a.upper_ == b.upper_ && a.cells_ == b.cells_;
    }

private:
    std::vector<double> lower_, upper_;
    std::vector<std::size_t> cells_;
    std::size_t total_ = 0;
    double cell_measure_ = 0.0;
};

class GridDensity {
public:
    // Builds a normalized density from raw nonnegative values: validates,
    // floors every cell at floor_fraction * (uniform level) * (raw mass),
    // then rescales so the midpoint-rule integral is one.
    static GridDensity normalized(const StateGrid& grid, std::vector<double> raw,
                                  const NormalizeOptions& opts = {}) {
        if (raw.size() != grid.size())
            throw GridMismatch("normalized: value count does not match grid");
        double sum = 0.0;
        for (double v : raw) {
            if (!std::isfinite(v) || v < 0.0)
                throw NonFinite("normalized: raw density values must be finite and nonnegative");
            sum += v;
        }
        const double mass = sum * grid.cell_measure();
        if (!(mass > 0.0)) throw AllZero("normalized: raw density has zero mass");
        // Floor scales with the raw mass, so normalize(c*raw) == normalize(raw).
        const double floor_value = opts.floor_fraction * mass / grid.domain_measure();
        double floored_sum = 0.0;
        for (double& v : raw) {
            v = std::max(v, floor_value);
            floored_sum += v;
        }
        const double scale = 1.0 / (floored_sum * grid.cell_measure());
        for (double& v : raw) {
            v *= scale;
            if (v > opts.density_cap)
                throw CapExceeded("normalized: cell density exceeds cap; refine the grid");
        }
        return GridDensity(grid, std::move(raw));
    }

    static GridDensity uniform(const StateGrid& grid) {
        return GridDensity(grid,
                           std::vector<double>(grid.size(), 1.0 / grid.domain_measure()));
    }

    // Adopts values that are already normalized (validates, never rescales,
    // so decode paths can be bit-exact).
    static GridDensity from_normalized(const StateGrid& grid, std::vector<double> values,
                                       double tol = kNormTolerance) {
        if (values.size() != grid.size())
            throw GridMismatch("from_normalized: value count does not match grid");
        double sum = 0.0;
        for (double v : values) {
            if (!std::isfinite(v) || v <= 0.0)
                throw NonFinite("from_normalized: values must be finite and positive");
            sum += v;
        }
        if (std::abs(sum * grid.cell_measure() - 1.0) > tol)
            throw NotNormalized("from_normalized: values do not integrate to 1");
        return GridDensity(grid, std::move(values));
    }

    const StateGrid& grid() const { return grid_; }
    std::span<const double> values() const { return values_; }
    double value(std::size_t i) const { return values_[i]; }
    double mass(std::size_t i) const { return values_[i] * grid_.cell_measure(); }
    std::size_t size() const { return values_.size(); }

    double integral() const {
        double s = 0.0;
        for (double v : values_) s += v;
        return s * grid_.cell_measure();
    }

    bool is_normalized(double tol = kNormTolerance) const {
        return std::abs(integral() - 1.0) <= tol;
    }

private:
    GridDensity(const StateGrid& grid, std::vector<double> values)
        : grid_(grid), values_(std::move(values)) {}

    StateGrid grid_;
    std::vector<double> values_;
};

inline void require_same_grid(const GridDensity& p, const GridDensity& q) {
    if (!(p.grid() == q.grid())) throw GridMismatch();
}

// L1 distance between densities; lies in [0, 2].
inline double l1_distance(const GridDensity& p, const GridDensity& q) {
    require_same_grid(p, q);
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p.value(i) - q.value(i));
    return s * p.grid().cell_measure();
}

// Total variation distance; equals half the L1 distance on a common grid.
inline double tv_distance(const GridDensity& p, const GridDensity& q) {
    return 0.5 * l1_distance(p, q);
}

// KL divergence D(p || q) in nats. Finite because densities are floored.
inline double kl_divergence(const GridDensity& p, const GridDensity& q) {
    require_same_grid(p, q);
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        s += p.value(i) * std::log(p.value(i) / q.value(i));
    return s * p.grid().cell_measure();
}

// Differential entropy in nats (log(domain measure) for the uniform density).
inline double entropy(const GridDensity& p) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += p.value(i) * std::log(p.value(i));
    return -s * p.grid().cell_measure();
}

struct Moments {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
};

inline Moments moments(const GridDensity& p) {
    const auto& g = p.grid();
    const auto n = static_cast<Eigen::Index>(g.dims());
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
    std::vector<double> x(g.dims());
    for (std::size_t i = 0; i < p.size(); ++i) {
        g.center_into(i, x);
        const double w = p.mass(i);
        for (Eigen::Index d = 0; d < n; ++d) mean[d] += w * x[static_cast<std::size_t>(d)];
    }
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i < p.size(); ++i) {
        g.center_into(i, x);
        const double w = p.mass(i);
        for (Eigen::Index r = 0; r < n; ++r)
            for (Eigen::Index c = 0; c <= r; ++c)
                cov(r, c) += w * (x[static_cast<std::size_t>(r)] - mean[r]) *
                             (x[static_cast<std::size_t>(c)] - mean[c]);
    }
    cov = cov.selfadjointView<Eigen::Lower>();
    return {std::move(mean), std::move(cov)};
}

inline void require_pool_weights(std::size_t m, std::span<const double> weights) {
    if (m == 0) throw BadWeights("pool: need at least one input density");
    if (weights.size() != m) throw BadWeights("pool: weight count does not match input count");
    double sum = 0.0;
    for (double w : weights) {
        if (!std::isfinite(w) || w < 0.0) throw BadWeights("pool: weights must be finite and nonnegative");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw BadWeights("pool: weights must sum to 1");
}

// Weighted arithmetic opinion pool: cellwise convex combination.
inline GridDensity arithmetic_pool(std::span<const GridDensity> inputs,
                                   std::span<const double> weights,
                                   const NormalizeOptions& opts = {}) {
    require_pool_weights(inputs.size(), weights);
    for (std::size_t l = 1; l < inputs.size(); ++l) require_same_grid(inputs[0], inputs[l]);
    std::vector<double> out(inputs[0].size(), 0.0);
    for (std::size_t l = 0; l < inputs.size(); ++l) {
        const auto vals = inputs[l].values();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += weights[l] * vals[i];
    }
    return GridDensity::normalized(inputs[0].grid(), std::move(out), opts);
}

// Weighted geometric opinion pool: cellwise weighted geometric mean,
// renormalized. Computed in log space with a max shift for stability.
inline GridDensity geometric_pool(std::span<const GridDensity> inputs,
                                  std::span<const double> weights,
                                  const NormalizeOptions& opts = {}) {
    require_pool_weights(inputs.size(), weights);
    for (std::size_t l = 1; l < inputs.size(); ++l) require_same_grid(inputs[0], inputs[l]);
    std::vector<double> logs(inputs[0].size(), 0.0);
    for (std::size_t l = 0; l < inputs.size(); ++l) {
        if (weights[l] == 0.0) continue;
        const auto vals = inputs[l].values();
        for (std::size_t i = 0; i < logs.size(); ++i) logs[i] += weights[l] * std::log(vals[i]);
    }
    const double shift = *std::max_element(logs.begin(), logs.end());
    if (!std::isfinite(shift)) throw NonFinite("geometric_pool: log pool is not finite");
    std::vector<double> out(logs.size());
    for (std::size_t i = 0; i < logs.size(); ++i) out[i] = std::exp(logs[i] - shift);
    return GridDensity::normalized(inputs[0].grid(), std::move(out), opts);
}

// Multiplies a density by a nonnegative cellwise factor and renormalizes.
// This is the Bayes-update core; ZeroEvidence if the product vanishes.
inline GridDensity reweight(const GridDensity& p, std::span<const double> factor,
                            const NormalizeOptions& opts = {}) {
    if (factor.size() != p.size()) throw GridMismatch("reweight: factor size mismatch");
    std::vector<double> out(p.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double f = factor[i];
        if (!std::isfinite(f) || f < 0.0)
            throw NonFinite("reweight: factors must be finite and nonnegative");
        out[i] = p.value(i) * f;
        sum += out[i];
    }
    if (!(sum > 0.0)) throw ZeroEvidence();
    return GridDensity::normalized(p.grid(), std::move(out), opts);
}

} // namespace bcf

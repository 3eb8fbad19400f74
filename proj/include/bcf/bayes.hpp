#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bcf/density.hpp"
#include "bcf/errors.hpp"
#include "bcf/rng.hpp"

// Grid-based Bayesian filtering: discretized Chapman-Kolmogorov prediction
// and multiplicative measurement updates, including updates with measurements
// received from neighboring agents.

namespace bcf {

// Column-stochastic transition operator on the grid: entry (i, j) is the
// transition density from the center of cell j to the center of cell i, so a
// prediction is  next = K * prior * cell_measure.
class TransitionKernel {
public:
    static constexpr double kColumnTolerance = 1e-6;

    // Validates column integrals against kColumnTolerance, then renormalizes
    // columns exactly so prediction preserves normalization to rounding.
    static TransitionKernel from_matrix(const StateGrid& grid, Eigen::MatrixXd k,
                                        double column_tol = kColumnTolerance) {
        const auto n = static_cast<Eigen::Index>(grid.size());
        if (k.rows() != n || k.cols() != n)
            throw GridMismatch("kernel: matrix size does not match grid");
        for (Eigen::Index j = 0; j < n; ++j) {
            double sum = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double v = k(i, j);
                if (!std::isfinite(v) || v < 0.0)
                    throw NonFinite("kernel: entries must be finite and nonnegative");
                sum += v;
            }
            const double integral = sum * grid.cell_measure();
            if (std::abs(integral - 1.0) > column_tol)
                throw KernelNotStochastic("kernel: a column does not integrate to 1 within tolerance");
            k.col(j) /= integral;
        }
        return TransitionKernel(grid, std::move(k));
    }

    // Tabulates a transition density f(next_center, prev_center) under the
    // truncated-domain convention: each column is renormalized over the box,
    // i.e. the kernel is the transition density conditional on staying
    // inside. Mass the dynamics pushes past a boundary is not an error here;
    // a column with no mass inside at all is.
    static TransitionKernel
    from_function(const StateGrid& grid,
                  const std::function<double(std::span<const double>, std::span<const double>)>& f) {
        const auto n = static_cast<Eigen::Index>(grid.size());
        Eigen::MatrixXd k(n, n);
        std::vector<double> xi(grid.dims()), xj(grid.dims());
        for (Eigen::Index j = 0; j < n; ++j) {
            grid.center_into(static_cast<std::size_t>(j), xj);
            double sum = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                grid.center_into(static_cast<std::size_t>(i), xi);
                const double v = f(xi, xj);
                if (!std::isfinite(v) || v < 0.0)
                    throw NonFinite("kernel: entries must be finite and nonnegative");
                k(i, j) = v;
                sum += v;
            }
            const double integral = sum * grid.cell_measure();
            if (!(integral > 0.0))
                throw KernelNotStochastic("kernel: a column has no mass inside the domain");
            k.col(j) /= integral;
        }
        return TransitionKernel(grid, std::move(k));
    }

    // No motion: each cell maps to itself.
    static TransitionKernel identity(const StateGrid& grid) {
        const auto n = static_cast<Eigen::Index>(grid.size());
        Eigen::MatrixXd k = Eigen::MatrixXd::Identity(n, n) / grid.cell_measure();
        return TransitionKernel(grid, std::move(k));
    }

    // Gaussian random walk with independent per-dimension increments.
    static TransitionKernel random_walk(const StateGrid& grid, std::span<const double> stddev) {
        if (stddev.size() != grid.dims())
            throw ConfigError("kernel: need one increment stddev per dimension");
        std::vector<double> sd(stddev.begin(), stddev.end());
        return from_function(grid, [&grid, sd](std::span<const double> next,
                                               std::span<const double> prev) {
            double density = 1.0;
            for (std::size_t d = 0; d < sd.size(); ++d) {
                const double z = (next[d] - prev[d]) / sd[d];
                density *= std::exp(-0.5 * z * z) / (sd[d] * std::sqrt(2.0 * std::numbers::pi));
            }
            (void)grid;
            return density;
        });
    }

    // 1-D linear-Gaussian dynamics x' = a*x + c + N(0, q).
    static TransitionKernel linear_gaussian_1d(const StateGrid& grid, double a, double c, double q) {
        if (grid.dims() != 1) throw ConfigError("kernel: linear_gaussian_1d needs a 1-D grid");
        if (!(q > 0.0)) throw ConfigError("kernel: process noise variance must be positive");
        const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * q);
        return from_function(grid, [a, c, q, norm](std::span<const double> next,
                                                   std::span<const double> prev) {
            const double d = next[0] - (a * prev[0] + c);
            return norm * std::exp(-0.5 * d * d / q);
        });
    }

    // Monte Carlo kernelization of arbitrary dynamics: for each source cell,
    // propagate `samples` draws and histogram the arrivals. Arrivals outside
    // the box are clamped to the boundary cell (truncated-domain convention).
    // Per-cell substreams make the tabulation reproducible.
    static TransitionKernel monte_carlo(
        const StateGrid& grid,
        const std::function<void(std::span<const double>, std::span<double>, std::mt19937_64&)>& dynamics,
        std::size_t samples, std::uint64_t seed) {
        if (samples == 0) throw ConfigError("kernel: need at least one sample per cell");
        const auto n = static_cast<Eigen::Index>(grid.size());
        Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
        std::vector<double> x(grid.dims()), y(grid.dims());
        std::vector<std::size_t> multi(grid.dims());
        const double weight = 1.0 / (static_cast<double>(samples) * grid.cell_measure());
        for (Eigen::Index j = 0; j < n; ++j) {
            grid.center_into(static_cast<std::size_t>(j), x);
            auto gen = make_rng(derive_seed(seed, Stream::KernelMonteCarlo,
                                            static_cast<std::uint64_t>(j)));
            for (std::size_t s = 0; s < samples; ++s) {
                dynamics(x, y, gen);
                for (std::size_t d = 0; d < grid.dims(); ++d) {
                    const double rel = (y[d] - grid.lower(d)) / grid.width(d);
                    const auto cell = static_cast<long long>(std::floor(rel));
                    const long long hi = static_cast<long long>(grid.extent(d)) - 1;
                    multi[d] = static_cast<std::size_t>(std::clamp(cell, 0LL, hi));
                }
                k(static_cast<Eigen::Index>(grid.flat_index(multi)), j) += weight;
            }
        }
        return TransitionKernel(grid, std::move(k));
    }

    const StateGrid& grid() const { return grid_; }
    const Eigen::MatrixXd& matrix() const { return k_; }

private:
    TransitionKernel(const StateGrid& grid, Eigen::MatrixXd k)
        : grid_(grid), k_(std::move(k)) {}

    StateGrid grid_;
    Eigen::MatrixXd k_;
};

// Chapman-Kolmogorov prediction on the grid.
inline GridDensity predict(const GridDensity& prior, const TransitionKernel& kernel,
                           const NormalizeOptions& opts = {}) {
    if (!(prior.grid() == kernel.grid())) throw GridMismatch("predict: kernel grid mismatch");
    const auto vals = prior.values();
    Eigen::Map<const Eigen::VectorXd> p(vals.data(), static_cast<Eigen::Index>(vals.size()));
    Eigen::VectorXd raw = kernel.matrix() * p * prior.grid().cell_measure();
    return GridDensity::normalized(prior.grid(),
                                   std::vector<double>(raw.data(), raw.data() + raw.size()), opts);
}

// Likelihood evaluator p(z | x) for one sensor.
using LikelihoodFn = std::function<double(std::span<const double> z, std::span<const double> x)>;

struct Measurement {
    std::size_t agent = 0;      // sensor that produced the measurement
    std::vector<double> value;  // observed z
};

// Multiplicative Bayes update with the prior and every measurement in `zs`
// (own and exchanged ones alike). `models[agent]` evaluates that agent's
// likelihood. An empty measurement set returns the prior unchanged; the
// update is order-independent by construction.
inline GridDensity update_with_exchange(const GridDensity& prior, std::span<const Measurement> zs,
                                        std::span<const LikelihoodFn> models,
                                        const NormalizeOptions& opts = {}) {
    if (zs.empty()) return prior;
    const auto& g = prior.grid();
    std::vector<double> factor(g.size(), 1.0);
    std::vector<double> x(g.dims());
    for (std::size_t i = 0; i < g.size(); ++i) {
        g.center_into(i, x);
        double f = 1.0;
        for (const auto& z : zs) {
            if (z.agent >= models.size())
                throw ConfigError("update: measurement references an unknown sensor");
            const double like = models[z.agent](z.value, x);
            if (!std::isfinite(like) || like < 0.0)
                throw NonFinite("update: likelihood must be finite and nonnegative");
            f *= like;
        }
        factor[i] = f;
    }
    return reweight(prior, factor, opts);
}

// Discrete measurement space for information computations: points z_t with
// quadrature weights (counting measure when weights are omitted).
struct MeasurementSpace {
    std::vector<std::vector<double>> points;
    std::vector<double> weights;
};

// Mutual information I(X; Z) in nats between the state (distributed as
// `prior` over the grid) and one sensor's measurement, by enumerating the
// joint distribution over grid cells and measurement points. This equals the
// expected entropy reduction of the Bayes update.
inline double mutual_information_gain(const GridDensity& prior, const LikelihoodFn& like,
                                      const MeasurementSpace& zspace,
                                      std::size_t budget = std::size_t(1) << 24) {
    const auto& g = prior.grid();
    const std::size_t t_count = zspace.points.size();
    if (t_count == 0) throw ConfigError("mutual information: empty measurement space");
    if (!zspace.weights.empty() && zspace.weights.size() != t_count)
        throw ConfigError("mutual information: weight count mismatch");
    if (g.size() > budget / t_count)
        throw TooLarge("mutual information: joint enumeration exceeds budget");

    std::vector<double> joint(g.size() * t_count);
    std::vector<double> x(g.dims());
    double total = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        g.center_into(i, x);
        const double px = prior.mass(i);
        for (std::size_t t = 0; t < t_count; ++t) {
            const double w = zspace.weights.empty() ? 1.0 : zspace.weights[t];
            const double v = px * like(zspace.points[t], x) * w;
            if (!std::isfinite(v) || v < 0.0)
                throw NonFinite("mutual information: likelihood must be finite and nonnegative");
            joint[i * t_count + t] = v;
            total += v;
        }
    }
    if (!(total > 0.0)) throw AllZero("mutual information: joint distribution has zero mass");

    std::vector<double> px(g.size(), 0.0), pz(t_count, 0.0);
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t t = 0; t < t_count; ++t) {
            const double v = joint[i * t_count + t] / total;
            joint[i * t_count + t] = v;
            px[i] += v;
            pz[t] += v;
        }
    double mi = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t t = 0; t < t_count; ++t) {
            const double v = joint[i * t_count + t];
            if (v > 0.0) mi += v * std::log(v / (px[i] * pz[t]));
        }
    return mi;
}

} // namespace bcf

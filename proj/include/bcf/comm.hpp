#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bcf/density.hpp"
#include "bcf/errors.hpp"
#include "bcf/rng.hpp"

// Lossy density communication: Gaussian-sum and particle codecs with a
// measured per-transmission L1 error, plus a bit-exact lossless grid codec.
// A transmitted density is encoded once per sender; every receiver decodes
// the same payload.

namespace bcf {

struct GaussianComponent {
    double weight = 1.0;
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

struct GaussianMixture {
    std::vector<GaussianComponent> components;

    std::size_t size() const { return components.size(); }
    std::size_t dims() const {
        return components.empty() ? 0 : static_cast<std::size_t>(components[0].mean.size());
    }

    void validate(double min_eigenvalue = 0.0) const {
        if (components.empty()) throw ConfigError("mixture: no components");
        const auto n = static_cast<Eigen::Index>(dims());
        double wsum = 0.0;
        for (const auto& c : components) {
            if (!(c.weight >= 0.0) || !std::isfinite(c.weight))
                throw BadWeights("mixture: component weights must be finite and nonnegative");
            wsum += c.weight;
            if (c.mean.size() != n || c.cov.rows() != n || c.cov.cols() != n)
                throw GridMismatch("mixture: inconsistent component dimensions");
            if (!c.cov.isApprox(c.cov.transpose(), 1e-12))
                throw NonFinite("mixture: covariance must be symmetric");
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.cov);
            if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() < min_eigenvalue)
                throw Degenerate("mixture: covariance below eigenvalue floor");
        }
        if (std::abs(wsum - 1.0) > 1e-9)
            throw BadWeights("mixture: component weights must sum to 1");
    }
};

// Mean-plus-covariance real count of an n_g-component mixture over an
// n_x-dimensional state: n_g * (n_x + n_x(n_x+1)/2) = n_g * n_x * (n_x+3) / 2.
inline std::size_t gaussian_sum_payload_reals(std::size_t n_g, std::size_t n_x) {
    return n_g * n_x * (n_x + 3) / 2;
}

namespace detail {

// Log-density evaluator with the Cholesky factor precomputed.
struct ComponentEvaluator {
    Eigen::LLT<Eigen::MatrixXd> llt;
    double log_norm = 0.0; // -0.5 * log(det(2 pi cov))
    Eigen::VectorXd mean;

    explicit ComponentEvaluator(const GaussianComponent& c) : llt(c.cov), mean(c.mean) {
        if (llt.info() != Eigen::Success)
            throw Degenerate("mixture: covariance is not positive definite");
        const auto n = static_cast<double>(c.mean.size());
        double log_det = 0.0;
        for (Eigen::Index i = 0; i < c.mean.size(); ++i)
            log_det += 2.0 * std::log(llt.matrixL()(i, i));
        log_norm = -0.5 * (n * std::log(2.0 * std::numbers::pi) + log_det);
    }

    double log_pdf(const Eigen::VectorXd& x) const {
        const Eigen::VectorXd d = x - mean;
        return log_norm - 0.5 * d.dot(llt.solve(d));
    }
};

inline void append_double(std::vector<std::uint8_t>& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
}

inline double read_double(std::span<const std::uint8_t> in, std::size_t index) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b)
        bits |= static_cast<std::uint64_t>(in[index * 8 + static_cast<std::size_t>(b)]) << (8 * b);
    return std::bit_cast<double>(bits);
}

} // namespace detail

// Tabulates the mixture density at the cell centers (raw, unnormalized).
inline std::vector<double> tabulate_raw(const GaussianMixture& mix, const StateGrid& grid) {
    if (mix.dims() != grid.dims()) throw GridMismatch("tabulate: mixture dimension mismatch");
    std::vector<detail::ComponentEvaluator> evals;
    evals.reserve(mix.size());
    for (const auto& c : mix.components) evals.emplace_back(c);
    std::vector<double> raw(grid.size(), 0.0);
    Eigen::VectorXd x(static_cast<Eigen::Index>(grid.dims()));
    std::vector<double> xc(grid.dims());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        grid.center_into(i, xc);
        for (std::size_t d = 0; d < grid.dims(); ++d) x[static_cast<Eigen::Index>(d)] = xc[d];
        double v = 0.0;
        for (std::size_t c = 0; c < evals.size(); ++c)
            v += mix.components[c].weight * std::exp(evals[c].log_pdf(x));
        raw[i] = v;
    }
    return raw;
}

inline GridDensity tabulate(const GaussianMixture& mix, const StateGrid& grid,
                            const NormalizeOptions& opts = {}) {
    return GridDensity::normalized(grid, tabulate_raw(mix, grid), opts);
}

struct EmOptions {
    int max_iters = 500;
    double tol = 1e-8;                 // stop when log-likelihood gains less
    double eigenvalue_floor_scale = 1e-9; // floor = scale * (largest box width)^2
    std::uint64_t seed = 0;
};

struct EmResult {
    GaussianMixture mixture;
    double log_likelihood = 0.0;
    int iterations = 0;
    bool degenerate = false; // all mass in one cell: components collapsed/duplicated
};

// Weighted EM fit of an n_g-component Gaussian mixture to the grid masses,
// seeded k-means++ style from the mass distribution. Covariance eigenvalues
// are floored to keep every component usable as a density.
inline EmResult fit_mixture_em(const GridDensity& p, int n_g, const EmOptions& opts = {}) {
    if (n_g < 1) throw ConfigError("em: need at least one component");
    const auto& g = p.grid();
    const auto nx = static_cast<Eigen::Index>(g.dims());
    const std::size_t cells = g.size();
    const auto gc = static_cast<std::size_t>(n_g);

    double max_width = 0.0;
    for (std::size_t d = 0; d < g.dims(); ++d)
        max_width = std::max(max_width, g.upper(d) - g.lower(d));
    const double floor_eig = opts.eigenvalue_floor_scale * max_width * max_width;

    std::vector<Eigen::VectorXd> x(cells, Eigen::VectorXd(nx));
    std::vector<double> w(cells);
    std::vector<double> xc(g.dims());
    for (std::size_t i = 0; i < cells; ++i) {
        g.center_into(i, xc);
        for (std::size_t d = 0; d < g.dims(); ++d) x[i][static_cast<Eigen::Index>(d)] = xc[d];
        w[i] = p.mass(i);
    }

    const Moments mom = moments(p);
    EmResult result;
    result.degenerate = mom.covariance.diagonal().maxCoeff() <= floor_eig;
    if (result.degenerate) {
        // No spread to fit: duplicate a floored point mass.
        GaussianComponent c;
        c.weight = 1.0 / static_cast<double>(n_g);
        c.mean = mom.mean;
        c.cov = Eigen::MatrixXd::Identity(nx, nx) * floor_eig;
        result.mixture.components.assign(gc, c);
        return result;
    }

    // k-means++ style seeding on the mass distribution.
    auto gen = make_rng(derive_seed(opts.seed, Stream::ChannelFit, static_cast<std::uint64_t>(n_g)));
    std::vector<Eigen::VectorXd> centers;
    centers.push_back(x[sample_index(gen, w)]);
    std::vector<double> d2(cells);
    while (centers.size() < gc) {
        for (std::size_t i = 0; i < cells; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centers) best = std::min(best, (x[i] - c).squaredNorm());
            d2[i] = w[i] * best;
        }
        double total = 0.0;
        for (double v : d2) total += v;
        // All remaining mass sits on the chosen centers: reuse the first.
        centers.push_back(total > 0.0 ? x[sample_index(gen, d2)] : centers[0]);
    }

    GaussianMixture mix;
    mix.components.resize(gc);
    Eigen::MatrixXd cov0 = mom.covariance;
    {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov0);
        Eigen::VectorXd ev = es.eigenvalues().cwiseMax(floor_eig);
        cov0 = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    }
    for (std::size_t c = 0; c < gc; ++c) {
        mix.components[c].weight = 1.0 / static_cast<double>(n_g);
        mix.components[c].mean = centers[c];
        mix.components[c].cov = cov0;
    }

    std::vector<double> resp(cells * gc);
    std::vector<double> logp(gc);
    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int iter = 1; iter <= opts.max_iters; ++iter) {
        // E step in log space.
        std::vector<detail::ComponentEvaluator> evals;
        evals.reserve(gc);
        for (const auto& c : mix.components) evals.emplace_back(c);
        double ll = 0.0;
        for (std::size_t i = 0; i < cells; ++i) {
            double lmax = -std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < gc; ++c) {
                logp[c] = std::log(mix.components[c].weight) + evals[c].log_pdf(x[i]);
                lmax = std::max(lmax, logp[c]);
            }
            double denom = 0.0;
            for (std::size_t c = 0; c < gc; ++c) {
                resp[i * gc + c] = std::exp(logp[c] - lmax);
                denom += resp[i * gc + c];
            }
            for (std::size_t c = 0; c < gc; ++c) resp[i * gc + c] /= denom;
            ll += w[i] * (lmax + std::log(denom));
        }
        // M step.
        for (std::size_t c = 0; c < gc; ++c) {
            double mass = 0.0;
            Eigen::VectorXd mean = Eigen::VectorXd::Zero(nx);
            for (std::size_t i = 0; i < cells; ++i) {
                const double r = w[i] * resp[i * gc + c];
                mass += r;
                mean += r * x[i];
            }
            if (!(mass > 0.0)) {
                // Component starved of responsibility: park it on the bulk.
                mix.components[c].weight = 1e-12;
                mix.components[c].mean = mom.mean;
                mix.components[c].cov = cov0;
                continue;
            }
            mean /= mass;
            Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(nx, nx);
            for (std::size_t i = 0; i < cells; ++i) {
                const double r = w[i] * resp[i * gc + c];
                const Eigen::VectorXd d = x[i] - mean;
                cov += r * d * d.transpose();
            }
            cov /= mass;
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
            Eigen::VectorXd ev = es.eigenvalues().cwiseMax(floor_eig);
            mix.components[c].weight = mass;
            mix.components[c].mean = mean;
            mix.components[c].cov = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
        }
        // Repair weight rounding.
        double wsum = 0.0;
        for (const auto& c : mix.components) wsum += c.weight;
        for (auto& c : mix.components) c.weight /= wsum;

        result.iterations = iter;
        result.log_likelihood = ll;
        if (ll - prev_ll < opts.tol && iter > 1) break;
        prev_ll = ll;
    }
    result.mixture = std::move(mix);
    return result;
}

namespace detail {

// Mixture <-> flat parameter vector. Weights travel as logits (softmax on
// unpack), covariances as log-Cholesky factors, so every parameter vector
// decodes to a valid mixture and the simplex search below is unconstrained.
inline Eigen::VectorXd pack_mixture(const GaussianMixture& mix) {
    const auto nx = static_cast<Eigen::Index>(mix.dims());
    const auto g = static_cast<Eigen::Index>(mix.size());
    const Eigen::Index per = 1 + nx + nx * (nx + 1) / 2;
    Eigen::VectorXd theta(g * per);
    for (Eigen::Index c = 0; c < g; ++c) {
        const auto& comp = mix.components[static_cast<std::size_t>(c)];
        Eigen::Index at = c * per;
        theta[at++] = std::log(std::max(comp.weight, 1e-300));
        for (Eigen::Index d = 0; d < nx; ++d) theta[at++] = comp.mean[d];
        Eigen::LLT<Eigen::MatrixXd> llt(comp.cov);
        if (llt.info() != Eigen::Success)
            throw Degenerate("mixture: covariance is not positive definite");
        const Eigen::MatrixXd L = llt.matrixL();
        for (Eigen::Index i = 0; i < nx; ++i)
            for (Eigen::Index j = 0; j <= i; ++j)
                theta[at++] = i == j ? std::log(L(i, i)) : L(i, j);
    }
    return theta;
}

inline GaussianMixture unpack_mixture(const Eigen::VectorXd& theta, Eigen::Index nx,
                                      Eigen::Index g, double floor_eig) {
    const Eigen::Index per = 1 + nx + nx * (nx + 1) / 2;
    GaussianMixture mix;
    mix.components.resize(static_cast<std::size_t>(g));
    double wsum = 0.0;
    double logit_max = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < g; ++c) logit_max = std::max(logit_max, theta[c * per]);
    for (Eigen::Index c = 0; c < g; ++c) {
        auto& comp = mix.components[static_cast<std::size_t>(c)];
        Eigen::Index at = c * per;
        comp.weight = std::exp(theta[at++] - logit_max);
        wsum += comp.weight;
        comp.mean.resize(nx);
        for (Eigen::Index d = 0; d < nx; ++d) comp.mean[d] = theta[at++];
        Eigen::MatrixXd L = Eigen::MatrixXd::Zero(nx, nx);
        for (Eigen::Index i = 0; i < nx; ++i)
            for (Eigen::Index j = 0; j <= i; ++j)
                L(i, j) = i == j ? std::exp(theta[at++]) : theta[at++];
        comp.cov = L * L.transpose() + floor_eig * Eigen::MatrixXd::Identity(nx, nx);
    }
    for (auto& comp : mix.components) comp.weight /= wsum;
    return mix;
}

// Nelder-Mead simplex descent. Returns the best parameter vector found;
// stops on the eval budget, a collapsed simplex, or f <= f_stop.
inline Eigen::VectorXd nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x0, const Eigen::VectorXd& step,
                                   int max_evals, double f_stop, double* f_best) {
    const auto n = static_cast<std::size_t>(x0.size());
    struct Vertex {
        Eigen::VectorXd x;
        double fx;
    };
    std::vector<Vertex> s;
    s.reserve(n + 1);
    int evals = 0;
    auto eval = [&](const Eigen::VectorXd& x) {
        ++evals;
        return f(x);
    };
    s.push_back({x0, eval(x0)});
    for (std::size_t i = 0; i < n; ++i) {
        Eigen::VectorXd x = x0;
        x[static_cast<Eigen::Index>(i)] += step[static_cast<Eigen::Index>(i)];
        s.push_back({x, eval(x)});
    }
    auto by_f = [](const Vertex& a, const Vertex& b) { return a.fx < b.fx; };
    std::sort(s.begin(), s.end(), by_f);

    while (evals < max_evals && s.front().fx > f_stop &&
           s.back().fx - s.front().fx > 1e-15) {
        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(x0.size());
        for (std::size_t i = 0; i < n; ++i) centroid += s[i].x;
        centroid /= static_cast<double>(n);

        const Eigen::VectorXd xr = centroid + (centroid - s.back().x);
        const double fr = eval(xr);
        if (fr < s.front().fx) {
            const Eigen::VectorXd xe = centroid + 2.0 * (centroid - s.back().x);
            const double fe = eval(xe);
            s.back() = fe < fr ? Vertex{xe, fe} : Vertex{xr, fr};
        } else if (fr < s[n - 1].fx) {
            s.back() = {xr, fr};
        } else {
            const bool outside = fr < s.back().fx;
            const Eigen::VectorXd xc =
                centroid + 0.5 * ((outside ? xr : s.back().x) - centroid);
            const double fc = eval(xc);
            if (fc < (outside ? fr : s.back().fx)) {
                s.back() = {xc, fc};
            } else {
                for (std::size_t i = 1; i <= n; ++i) {
                    s[i].x = s.front().x + 0.5 * (s[i].x - s.front().x);
                    s[i].fx = eval(s[i].x);
                }
            }
        }
        std::sort(s.begin(), s.end(), by_f);
    }
    if (f_best) *f_best = s.front().fx;
    return s.front().x;
}

// Pushes an EM mixture toward the reconstruction metric that matters for the
// codec: L1 between the tabulated (truncated, renormalized) mixture and the
// target density. EM maximizes untruncated likelihood, which biases
// components toward the box interior whenever real tail mass crosses an
// edge; descending on the tabulated objective removes that bias.
inline GaussianMixture refine_mixture_l1(const GridDensity& p, const GaussianMixture& mix,
                                         double eps_target, double floor_eig,
                                         const NormalizeOptions& opts, double* achieved) {
    const auto nx = static_cast<Eigen::Index>(mix.dims());
    const auto g = static_cast<Eigen::Index>(mix.size());
    const auto objective = [&](const Eigen::VectorXd& theta) {
        try {
            return l1_distance(tabulate(unpack_mixture(theta, nx, g, floor_eig), p.grid(), opts),
                               p);
        } catch (const Error&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    Eigen::VectorXd theta = pack_mixture(mix);
    const Eigen::Index per = 1 + nx + nx * (nx + 1) / 2;
    Eigen::VectorXd step(theta.size());
    for (Eigen::Index c = 0; c < g; ++c) {
        Eigen::Index at = c * per;
        step[at++] = 0.25; // weight logit
        const auto& comp = mix.components[static_cast<std::size_t>(c)];
        for (Eigen::Index d = 0; d < nx; ++d)
            step[at++] = 0.2 * std::sqrt(std::max(comp.cov(d, d), floor_eig));
        for (Eigen::Index i = 0; i < nx; ++i)
            for (Eigen::Index j = 0; j <= i; ++j)
                step[at++] = i == j ? 0.15
                                    : 0.15 * std::sqrt(std::max(
                                                 std::sqrt(comp.cov(i, i) * comp.cov(j, j)),
                                                 floor_eig));
    }

    const int budget = std::clamp(static_cast<int>(250 * theta.size()), 1500, 6000);
    const double f_stop = 0.25 * eps_target;
    double best = objective(theta);
    for (int pass = 0; pass < 2 && best > f_stop; ++pass) {
        double found = best;
        const Eigen::VectorXd refined =
            nelder_mead(objective, theta, step, budget, f_stop, &found);
        if (found >= best) break;
        theta = refined;
        best = found;
        step *= 0.25; // restart tighter around the improved point
    }
    if (achieved) *achieved = best;
    return unpack_mixture(theta, nx, g, floor_eig);
}

} // namespace detail

struct GaussianSumFit {
    GaussianMixture mixture;
    double achieved_l1 = 0.0;
    int components = 0;
    bool target_met = false;
    bool degenerate = false;
};

// Fits the smallest Gaussian sum (component count from n_g up to n_g_cap)
// whose tabulation comes within eps_target of p in L1. When even the cap
// misses the target the best fit is returned with target_met=false; the
// caller decides whether that is acceptable.
inline GaussianSumFit fit_gaussian_sum(const GridDensity& p, int n_g, double eps_target,
                                       int n_g_cap, std::uint64_t seed,
                                       const NormalizeOptions& opts = {}) {
    if (n_g < 1 || n_g_cap < n_g) throw ConfigError("gaussian sum: need 1 <= n_g <= n_g_cap");
    if (!(eps_target > 0.0)) throw ConfigError("gaussian sum: eps_target must be positive");
    GaussianSumFit best;
    best.achieved_l1 = std::numeric_limits<double>::infinity();
    double max_width = 0.0;
    for (std::size_t d = 0; d < p.grid().dims(); ++d)
        max_width = std::max(max_width, p.grid().upper(d) - p.grid().lower(d));
    for (int g = n_g; g <= n_g_cap; ++g) {
        EmOptions em;
        em.seed = seed;
        const EmResult fit = fit_mixture_em(p, g, em);
        double err = 0.0;
        const GaussianMixture refined = detail::refine_mixture_l1(
            p, fit.mixture, eps_target, em.eigenvalue_floor_scale * max_width * max_width,
            opts, &err);
        if (err < best.achieved_l1) {
            best.mixture = refined;
            best.achieved_l1 = err;
            best.components = g;
            best.degenerate = fit.degenerate;
        }
        if (best.achieved_l1 <= eps_target) {
            best.target_met = true;
            return best;
        }
    }
    return best;
}

// --- wire codecs ---------------------------------------------------------

// Gaussian-sum payload: little-endian doubles
// [n_g, n_x, then per component: weight, mean, upper-triangular covariance].
inline std::vector<std::uint8_t> encode_gaussian_sum(const GaussianMixture& mix) {
    if (mix.components.empty()) throw ConfigError("encode: empty mixture");
    const auto nx = static_cast<Eigen::Index>(mix.dims());
    std::vector<std::uint8_t> out;
    out.reserve((2 + mix.size() * (1 + mix.dims() + mix.dims() * (mix.dims() + 1) / 2)) * 8);
    detail::append_double(out, static_cast<double>(mix.size()));
    detail::append_double(out, static_cast<double>(nx));
    for (const auto& c : mix.components) {
        detail::append_double(out, c.weight);
        for (Eigen::Index d = 0; d < nx; ++d) detail::append_double(out, c.mean[d]);
        for (Eigen::Index r = 0; r < nx; ++r)
            for (Eigen::Index col = r; col < nx; ++col) detail::append_double(out, c.cov(r, col));
    }
    return out;
}

inline GaussianMixture decode_gaussian_sum(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 16 || bytes.size() % 8 != 0)
        throw ConfigError("decode: truncated gaussian-sum payload");
    const double ngd = detail::read_double(bytes, 0);
    const double nxd = detail::read_double(bytes, 1);
    if (!(ngd >= 1.0) || ngd != std::floor(ngd) || !(nxd >= 1.0) || nxd != std::floor(nxd))
        throw ConfigError("decode: bad gaussian-sum header");
    const auto ng = static_cast<std::size_t>(ngd);
    const auto nx = static_cast<Eigen::Index>(nxd);
    const std::size_t per = 1 + static_cast<std::size_t>(nx) +
                            static_cast<std::size_t>(nx) * (static_cast<std::size_t>(nx) + 1) / 2;
    if (bytes.size() != (2 + ng * per) * 8)
        throw ConfigError("decode: gaussian-sum payload size mismatch");
    GaussianMixture mix;
    mix.components.resize(ng);
    std::size_t at = 2;
    for (auto& c : mix.components) {
        c.weight = detail::read_double(bytes, at++);
        c.mean = Eigen::VectorXd(nx);
        for (Eigen::Index d = 0; d < nx; ++d) c.mean[d] = detail::read_double(bytes, at++);
        c.cov = Eigen::MatrixXd(nx, nx);
        for (Eigen::Index r = 0; r < nx; ++r)
            for (Eigen::Index col = r; col < nx; ++col) {
                c.cov(r, col) = detail::read_double(bytes, at++);
                c.cov(col, r) = c.cov(r, col);
            }
    }
    return mix;
}

// Lossless grid payload: [dims, per-dim cells/lower/upper, values...].
inline std::vector<std::uint8_t> encode_grid(const GridDensity& p) {
    const auto& g = p.grid();
    std::vector<std::uint8_t> out;
    out.reserve((1 + 3 * g.dims() + g.size()) * 8);
    detail::append_double(out, static_cast<double>(g.dims()));
    for (std::size_t d = 0; d < g.dims(); ++d) {
        detail::append_double(out, static_cast<double>(g.extent(d)));
        detail::append_double(out, g.lower(d));
        detail::append_double(out, g.upper(d));
    }
    for (double v : p.values()) detail::append_double(out, v);
    return out;
}

inline GridDensity decode_grid(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8 || bytes.size() % 8 != 0) throw ConfigError("decode: truncated grid payload");
    const double dimsd = detail::read_double(bytes, 0);
    if (!(dimsd >= 1.0) || dimsd != std::floor(dimsd)) throw ConfigError("decode: bad grid header");
    const auto dims = static_cast<std::size_t>(dimsd);
    if (bytes.size() < (1 + 3 * dims) * 8) throw ConfigError("decode: truncated grid header");
    std::vector<double> lower(dims), upper(dims);
    std::vector<std::size_t> cells(dims);
    std::size_t at = 1;
    for (std::size_t d = 0; d < dims; ++d) {
        const double c = detail::read_double(bytes, at++);
        if (!(c >= 1.0) || c != std::floor(c)) throw ConfigError("decode: bad cell count");
        cells[d] = static_cast<std::size_t>(c);
        lower[d] = detail::read_double(bytes, at++);
        upper[d] = detail::read_double(bytes, at++);
    }
    StateGrid grid(lower, upper, cells);
    if (bytes.size() != (at + grid.size()) * 8)
        throw ConfigError("decode: grid payload size mismatch");
    std::vector<double> values(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) values[i] = detail::read_double(bytes, at + i);
    return GridDensity::from_normalized(grid, std::move(values));
}

// --- channel -------------------------------------------------------------

enum class Codec { Lossless, GaussianSum, Particles };

struct ChannelConfig {
    Codec codec = Codec::Lossless;
    double eps_comm = 0.0; // per-transmission L1 error target (lossy codecs)
    int n_g = 2;
    int n_g_cap = 8;
    int particles = 1000;
    NormalizeOptions density;

    void validate() const {
        if (codec != Codec::Lossless && !(eps_comm > 0.0))
            throw ConfigError("channel: lossy codec requires eps_comm > 0");
        if (codec == Codec::GaussianSum && (n_g < 1 || n_g_cap < n_g))
            throw ConfigError("channel: need 1 <= n_g <= n_g_cap");
        if (codec == Codec::Particles && particles < 1)
            throw ConfigError("channel: need at least one particle");
    }
};

struct TransmitResult {
    GridDensity density;          // what the receivers reconstruct
    double achieved_l1 = 0.0;     // measured per-transmission error
    bool within_budget = true;    // achieved_l1 <= eps_comm (lossless: always)
    std::size_t payload_reals = 0;
    bool target_met = true;       // gaussian-sum fit reached its target
};

// Encodes, "sends" and decodes one density. All receivers of a transmission
// observe the same reconstruction.
inline TransmitResult transmit(const GridDensity& p, const ChannelConfig& cfg,
                               std::uint64_t seed) {
    cfg.validate();
    switch (cfg.codec) {
    case Codec::Lossless: {
        GridDensity rt = decode_grid(encode_grid(p));
        return {std::move(rt), 0.0, true, 1 + 3 * p.grid().dims() + p.size(), true};
    }
    case Codec::GaussianSum: {
        const GaussianSumFit fit =
            fit_gaussian_sum(p, cfg.n_g, cfg.eps_comm, cfg.n_g_cap, seed, cfg.density);
        const GaussianMixture wire = decode_gaussian_sum(encode_gaussian_sum(fit.mixture));
        GridDensity rt = tabulate(wire, p.grid(), cfg.density);
        const double err = l1_distance(rt, p);
        const std::size_t payload =
            2 + static_cast<std::size_t>(fit.components) *
                    (1 + p.grid().dims() + p.grid().dims() * (p.grid().dims() + 1) / 2);
        return {std::move(rt), err, err <= cfg.eps_comm, payload, fit.target_met};
    }
    case Codec::Particles: {
        auto gen = make_rng(derive_seed(seed, Stream::ChannelParticles));
        std::vector<double> cum(p.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            acc += p.mass(i);
            cum[i] = acc;
        }
        std::vector<double> counts(p.size(), 0.0);
        for (int s = 0; s < cfg.particles; ++s) {
            const double u = uniform01(gen) * acc;
            auto it = std::lower_bound(cum.begin(), cum.end(), u);
            if (it == cum.end()) --it; // rounding fell past the last bin
            counts[static_cast<std::size_t>(it - cum.begin())] += 1.0;
        }
        GridDensity rt = GridDensity::normalized(p.grid(), std::move(counts), cfg.density);
        const double err = l1_distance(rt, p);
        return {std::move(rt), err, err <= cfg.eps_comm,
                static_cast<std::size_t>(cfg.particles) * p.grid().dims(), true};
    }
    }
    throw ConfigError("channel: unknown codec");
}

} // namespace bcf

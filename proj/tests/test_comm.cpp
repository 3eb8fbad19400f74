#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "bcf/bcf.hpp"
#include "test_util.hpp"

using namespace bcf;
using test_util::grid_1d;

namespace {

GaussianMixture one_gaussian(double mean, double var, double weight = 1.0) {
    GaussianComponent c;
    c.weight = weight;
    c.mean = Eigen::VectorXd::Constant(1, mean);
    c.cov = Eigen::MatrixXd::Constant(1, 1, var);
    return GaussianMixture{{c}};
}

} // namespace

TEST_CASE("payload size counts means and covariances only") {
    // n_g * (1 weight-slot-free layout: n_x means + n_x(n_x+1)/2 covariances
    // plus the weight) collapses to n_g * n_x * (n_x + 3) / 2 reals.
    REQUIRE(gaussian_sum_payload_reals(1, 1) == 2);
    REQUIRE(gaussian_sum_payload_reals(2, 3) == 18);
    REQUIRE(gaussian_sum_payload_reals(5, 2) == 25);
}

TEST_CASE("mixture validation rejects broken components") {
    auto mix = one_gaussian(0.5, 0.01);
    REQUIRE_NOTHROW(mix.validate(1e-12));
    auto flat = one_gaussian(0.5, 0.0);
    REQUIRE_THROWS_AS(flat.validate(1e-12), Degenerate);
    auto negw = one_gaussian(0.5, 0.01, -1.0);
    REQUIRE_THROWS_AS(negw.validate(1e-12), BadWeights);
}

TEST_CASE("tabulating a gaussian mixture matches the direct tabulation") {
    auto g = grid_1d(-4.0, 4.0, 128);
    auto p = tabulate(one_gaussian(0.5, 0.49), g);
    auto direct = test_util::gaussian_density(g, 0.5, 0.7);
    REQUIRE(l1_distance(p, direct) < 1e-9);
}

TEST_CASE("em fit of a single gaussian recovers its moments") {
    auto g = grid_1d(-5.0, 5.0, 200);
    auto p = test_util::gaussian_density(g, 1.2, 0.8);
    auto fit = fit_mixture_em(p, 1);
    REQUIRE_FALSE(fit.degenerate);
    REQUIRE(fit.mixture.size() == 1);
    REQUIRE(fit.mixture.components[0].weight == Catch::Approx(1.0).margin(1e-9));
    REQUIRE(fit.mixture.components[0].mean(0) == Catch::Approx(1.2).margin(1e-3));
    // Tabulation adds the cell-width variance h^2/12; keep the tolerance loose.
    REQUIRE(fit.mixture.components[0].cov(0, 0) == Catch::Approx(0.64).epsilon(0.01));
}

TEST_CASE("em fit of a well-separated two-component mixture finds both modes") {
    auto g = grid_1d(-8.0, 8.0, 256);
    std::vector<double> raw(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = g.center(i)[0];
        raw[i] = 0.65 * std::exp(-0.5 * (x + 3.0) * (x + 3.0) / 0.25) / std::sqrt(0.25) +
                 0.35 * std::exp(-0.5 * (x - 3.0) * (x - 3.0) / 0.49) / std::sqrt(0.49);
    }
    auto p = GridDensity::normalized(g, raw);
    auto fit = fit_mixture_em(p, 2);
    REQUIRE(fit.mixture.size() == 2);
    auto& a = fit.mixture.components[0];
    auto& b = fit.mixture.components[1];
    const auto& lo = a.mean(0) < b.mean(0) ? a : b;
    const auto& hi = a.mean(0) < b.mean(0) ? b : a;
    REQUIRE(lo.mean(0) == Catch::Approx(-3.0).margin(0.05));
    REQUIRE(hi.mean(0) == Catch::Approx(3.0).margin(0.05));
    REQUIRE(lo.weight == Catch::Approx(0.65).margin(0.01));
    REQUIRE(l1_distance(tabulate(fit.mixture, g), p) < 0.01);
}

TEST_CASE("em on a point mass flags degeneracy instead of blowing up") {
    auto g = grid_1d(0.0, 1.0, 64);
    std::vector<double> raw(g.size(), 0.0);
    raw[20] = 1.0;
    auto p = GridDensity::normalized(g, raw);
    auto fit = fit_mixture_em(p, 2);
    REQUIRE(fit.degenerate);
    for (const auto& c : fit.mixture.components) REQUIRE(c.cov(0, 0) > 0.0);
}

TEST_CASE("escalating fit stops at the first component count within target") {
    auto g = grid_1d(-8.0, 8.0, 256);
    std::vector<double> raw(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = g.center(i)[0];
        raw[i] = std::exp(-0.5 * (x + 3.0) * (x + 3.0) / 0.25) +
                 std::exp(-0.5 * (x - 3.0) * (x - 3.0) / 0.25);
    }
    auto p = GridDensity::normalized(g, raw);
    auto fit = fit_gaussian_sum(p, 1, 0.02, 4, 7);
    REQUIRE(fit.target_met);
    REQUIRE(fit.components == 2); // one gaussian cannot cover two far modes
    REQUIRE(fit.achieved_l1 <= 0.02);

    // Impossible target: best effort comes back unmet.
    auto miss = fit_gaussian_sum(p, 1, 1e-12, 1, 7);
    REQUIRE_FALSE(miss.target_met);
    REQUIRE(miss.achieved_l1 > 1e-12);
}

TEST_CASE("gaussian-sum wire format round-trips exactly") {
    GaussianComponent a;
    a.weight = 0.3;
    a.mean = Eigen::VectorXd::Zero(2);
    a.mean << 0.5, -1.25;
    a.cov = Eigen::MatrixXd(2, 2);
    a.cov << 0.5, 0.1, 0.1, 0.75;
    GaussianComponent b = a;
    b.weight = 0.7;
    b.mean << -2.0, 3.5;
    GaussianMixture mix{{a, b}};

    auto bytes = encode_gaussian_sum(mix);
    REQUIRE(bytes.size() == (2 + 2 * (1 + 2 + 3)) * 8);
    auto back = decode_gaussian_sum(bytes);
    REQUIRE(back.size() == 2);
    for (std::size_t c = 0; c < 2; ++c) {
        REQUIRE(back.components[c].weight == mix.components[c].weight);
        REQUIRE((back.components[c].mean - mix.components[c].mean).cwiseAbs().maxCoeff() == 0.0);
        REQUIRE((back.components[c].cov - mix.components[c].cov).cwiseAbs().maxCoeff() == 0.0);
    }

    auto truncated = bytes;
    truncated.pop_back();
    REQUIRE_THROWS_AS(decode_gaussian_sum(truncated), ConfigError);
}

TEST_CASE("grid wire format round-trips bit-exactly") {
    auto g = StateGrid({0.0, -1.0}, {2.0, 1.0}, {8, 4});
    auto gen = make_rng(derive_seed(17, Stream::Test));
    std::vector<double> raw(g.size());
    for (double& v : raw) v = uniform01(gen) + 0.05;
    auto p = GridDensity::normalized(g, raw);

    auto bytes = encode_grid(p);
    auto back = decode_grid(bytes);
    REQUIRE(back.grid() == g);
    for (std::size_t i = 0; i < g.size(); ++i) REQUIRE(back.value(i) == p.value(i));
}

TEST_CASE("lossless channel is exact; lossy channels respect their budgets") {
    auto g = grid_1d(0.0, 10.0, 128);
    auto p = test_util::gaussian_density(g, 6.0, 1.1);

    ChannelConfig lossless;
    auto r0 = transmit(p, lossless, 1);
    REQUIRE(r0.achieved_l1 == 0.0);
    REQUIRE(r0.within_budget);
    for (std::size_t i = 0; i < g.size(); ++i) REQUIRE(r0.density.value(i) == p.value(i));

    ChannelConfig gs;
    gs.codec = Codec::GaussianSum;
    gs.eps_comm = 0.01;
    gs.n_g = 1;
    gs.n_g_cap = 6;
    auto r1 = transmit(p, gs, 1);
    REQUIRE(r1.achieved_l1 <= 0.01);
    REQUIRE(r1.within_budget);
    REQUIRE(r1.target_met);
    // Wire layout for 1-D: 2 header reals plus (weight, mean, cov) per
    // component, for some component count within the cap.
    REQUIRE((r1.payload_reals - 2) % 3 == 0);
    const auto used = (r1.payload_reals - 2) / 3;
    REQUIRE(used >= 1);
    REQUIRE(used <= 6);

    ChannelConfig pf;
    pf.codec = Codec::Particles;
    pf.eps_comm = 0.5;
    pf.particles = 4000;
    auto r2 = transmit(p, pf, 1);
    REQUIRE(r2.achieved_l1 > 0.0);
    REQUIRE(r2.achieved_l1 <= 0.5);
    REQUIRE(r2.density.is_normalized());

    // More particles, smaller resampling error (on average; fixed seeds).
    pf.particles = 50;
    auto coarse = transmit(p, pf, 1);
    pf.particles = 50000;
    auto fine = transmit(p, pf, 1);
    REQUIRE(fine.achieved_l1 < coarse.achieved_l1);

    ChannelConfig bad;
    bad.codec = Codec::GaussianSum;
    bad.eps_comm = 0.0;
    REQUIRE_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("transmission is deterministic in the seed") {
    auto g = grid_1d(0.0, 1.0, 64);
    auto p = test_util::random_density(g, 44);
    ChannelConfig pf;
    pf.codec = Codec::Particles;
    pf.eps_comm = 1.0;
    pf.particles = 500;
    auto a = transmit(p, pf, 9);
    auto b = transmit(p, pf, 9);
    auto c = transmit(p, pf, 10);
    for (std::size_t i = 0; i < g.size(); ++i)
        REQUIRE(a.density.value(i) == b.density.value(i));
    REQUIRE(l1_distance(a.density, c.density) > 0.0);
}

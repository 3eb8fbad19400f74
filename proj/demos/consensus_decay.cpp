// Repeated pooling rounds on a ring of eight agents, starting from rough
// random densities. Prints the disagreement norm per round for both pooling
// operators next to the geometric envelope sigma^nu * theta_0.

#include <cmath>
#include <cstdio>
#include <vector>

#include "bcf/consensus.hpp"
#include "bcf/density.hpp"
#include "bcf/network.hpp"
#include "bcf/rng.hpp"

using namespace bcf;

namespace {

GridDensity rough_density(const StateGrid& grid, std::uint64_t seed) {
    auto gen = make_rng(derive_seed(seed, Stream::Test));
    std::vector<double> raw(grid.size());
    for (double& v : raw) v = std::exp(uniform(gen, std::log(0.1), std::log(10.0)));
    return GridDensity::normalized(grid, std::move(raw));
}

} // namespace

int main() {
    const std::size_t m = 8;
    const int rounds = 25;
    const StateGrid grid({0.0}, {1.0}, {96});

    const Digraph g = Digraph::ring(m);
    const WeightMatrix P = make_balanced_weights(g, WeightMethod::Metropolis);
    const double sigma = second_largest_singular_value(P);
    const Eigen::VectorXd pi = stationary_distribution(P);

    std::vector<GridDensity> initial;
    for (std::size_t j = 0; j < m; ++j) initial.push_back(rough_density(grid, 100 + j));

    std::printf("ring of %zu agents, sigma = %.6f\n\n", m, sigma);
    std::printf("  nu   theta(LinOP)   theta(LogOP)   sigma^nu * theta_0\n");

    std::vector<GridDensity> lin = initial, log = initial;
    const GridDensity lin_ref = consensual_pdf(lin, pi, PoolKind::LinOP);
    const GridDensity log_ref = consensual_pdf(log, pi, PoolKind::LogOP);
    const double theta0 = disagreement(log, log_ref).l2;

    for (int nu = 0; nu <= rounds; ++nu) {
        std::printf("%4d %14.6e %14.6e %14.6e\n", nu, disagreement(lin, lin_ref).l2,
                    disagreement(log, log_ref).l2, std::pow(sigma, nu) * theta0);
        if (nu == rounds) break;
        lin = consensus_round(lin, P, PoolKind::LinOP);
        log = consensus_round(log, P, PoolKind::LogOP);
    }
    return 0;
}

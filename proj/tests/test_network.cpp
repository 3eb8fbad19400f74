#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include <Eigen/SVD>

#include "bcf/bcf.hpp"
#include "test_util.hpp"

using namespace bcf;

TEST_CASE("digraph construction and queries") {
    Digraph g(4);
    g.add_edge(0, 1);
    g.add_edge(1, 2);
    g.add_symmetric_edge(2, 3);
    REQUIRE(g.has_edge(0, 1));
    REQUIRE_FALSE(g.has_edge(1, 0));
    REQUIRE(g.has_edge(3, 2));
    REQUIRE(g.out_degree(2) == 1);
    REQUIRE(g.in_degree(2) == 2);
    REQUIRE_FALSE(g.symmetric());
    REQUIRE_THROWS_AS(g.add_edge(1, 1), ConfigError);
    REQUIRE_THROWS_AS(g.add_edge(0, 7), ConfigError);
}

TEST_CASE("strong connectivity distinguishes paths from cycles") {
    auto cyc = Digraph::directed_cycle(5);
    REQUIRE(cyc.strongly_connected());
    REQUIRE_FALSE(cyc.symmetric());

    Digraph chain(3); // one-way chain: not strongly connected
    chain.add_edge(0, 1);
    chain.add_edge(1, 2);
    REQUIRE_FALSE(chain.strongly_connected());

    REQUIRE(Digraph::ring(6).strongly_connected());
    REQUIRE(Digraph::path(4).strongly_connected()); // symmetric path
    REQUIRE(Digraph::complete(3).strongly_connected());
    REQUIRE(Digraph::star(5).strongly_connected());
}

TEST_CASE("random connected graphs are symmetric and strongly connected") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto g = Digraph::random_connected(3 + seed, 0.3, seed);
        REQUIRE(g.symmetric());
        REQUIRE(g.strongly_connected());
    }
}

TEST_CASE("induced subgraph keeps the selected nodes' edges") {
    auto g = Digraph::ring(5);
    std::vector<std::size_t> keep = {0, 1, 2};
    auto sub = g.induced(keep);
    REQUIRE(sub.size() == 3);
    REQUIRE(sub.has_edge(0, 1));
    REQUIRE(sub.has_edge(1, 2));
    REQUIRE_FALSE(sub.has_edge(0, 2)); // 0-4 edge dropped with node 4
}

TEST_CASE("weight checks report stochasticity, diagonal, and conformance") {
    auto g = Digraph::ring(4);
    auto P = make_balanced_weights(g, WeightMethod::Metropolis);
    auto flags = check_weights(P, g);
    REQUIRE(flags.row_stochastic);
    REQUIRE(flags.column_stochastic);
    REQUIRE(flags.positive_diagonal);
    REQUIRE(flags.conformant);

    WeightMatrix bad = P;
    bad(0, 2) = 0.1; // weight on a non-neighbor
    bad(0, 0) -= 0.1;
    auto flags2 = check_weights(bad, g);
    REQUIRE(flags2.row_stochastic);
    REQUIRE_FALSE(flags2.conformant);

    REQUIRE_THROWS_AS(require_row_stochastic(WeightMatrix::Ones(2, 2)), BadWeights);
}

TEST_CASE("stationary distribution matches hand-solved chains") {
    // Two-state chain [[0.9, 0.1], [0.4, 0.6]]: pi = (0.8, 0.2).
    WeightMatrix P(2, 2);
    P << 0.9, 0.1, 0.4, 0.6;
    auto pi = stationary_distribution(P);
    REQUIRE(pi(0) == Catch::Approx(0.8).margin(1e-10));
    REQUIRE(pi(1) == Catch::Approx(0.2).margin(1e-10));

    // Doubly stochastic matrices have the uniform stationary distribution.
    auto ring = make_balanced_weights(Digraph::ring(5), WeightMethod::Metropolis);
    auto pi2 = stationary_distribution(ring);
    for (int i = 0; i < 5; ++i) REQUIRE(pi2(i) == Catch::Approx(0.2).margin(1e-10));

    // Disconnected pattern is rejected.
    WeightMatrix block = WeightMatrix::Identity(3, 3);
    REQUIRE_THROWS_AS(stationary_distribution(block), NotIrreducible);
}

TEST_CASE("second largest singular value matches known matrices and a full svd") {
    REQUIRE(second_largest_singular_value(WeightMatrix::Identity(3, 3)) ==
            Catch::Approx(1.0).margin(1e-12));
    REQUIRE(second_largest_singular_value(WeightMatrix::Ones(4, 4) / 4.0) ==
            Catch::Approx(0.0).margin(1e-10));

    // Metropolis ring of 4: eigenvalues 1, 1/3, 1/3, -1/3; sigma_{m-1} = 1/3.
    auto ring = make_balanced_weights(Digraph::ring(4), WeightMethod::Metropolis);
    REQUIRE(second_largest_singular_value(ring) == Catch::Approx(1.0 / 3.0).margin(1e-12));

    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        auto P = test_util::random_balanced_weights(4 + seed, 500 + seed);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(P);
        REQUIRE(second_largest_singular_value(P) ==
                Catch::Approx(svd.singularValues()(1)).margin(1e-10));
    }

    REQUIRE_THROWS_AS(second_largest_singular_value(WeightMatrix::Ones(1, 1)), Degenerate);
}

TEST_CASE("balanced weight construction is doubly stochastic and conformant") {
    SECTION("metropolis on symmetric graphs") {
        for (auto g : {Digraph::ring(6), Digraph::complete(5), Digraph::star(5),
                       Digraph::path(4)}) {
            auto P = make_balanced_weights(g, WeightMethod::Metropolis);
            auto flags = check_weights(P, g);
            REQUIRE(flags.row_stochastic);
            REQUIRE(flags.column_stochastic);
            REQUIRE(flags.positive_diagonal);
            REQUIRE(flags.conformant);
        }
        REQUIRE_THROWS_AS(
            make_balanced_weights(Digraph::directed_cycle(3), WeightMethod::Metropolis),
            CannotBalance);
    }

    SECTION("uniform-inclusive on degree-balanced digraphs") {
        auto P = make_balanced_weights(Digraph::directed_cycle(4),
                                       WeightMethod::UniformInclusive);
        // in-degree 1 everywhere: a = 1/2, so diag 1/2 and predecessor 1/2.
        REQUIRE(P(0, 0) == Catch::Approx(0.5).margin(1e-15));
        REQUIRE(P(0, 3) == Catch::Approx(0.5).margin(1e-15));
        auto flags = check_weights(P, Digraph::directed_cycle(4));
        REQUIRE(flags.column_stochastic);

        Digraph lop(3); // node 0 has out-degree 2, in-degree 1
        lop.add_edge(0, 1);
        lop.add_edge(0, 2);
        lop.add_edge(1, 0);
        lop.add_edge(2, 1);
        REQUIRE_THROWS_AS(make_balanced_weights(lop, WeightMethod::UniformInclusive),
                          CannotBalance);
    }
}

TEST_CASE("hierarchical weight validation spots coupling and imbalance") {
    // Trackers {0,1} as a balanced pair, non-tracker 2 listening to both.
    WeightMatrix P(3, 3);
    P << 0.5, 0.5, 0.0, //
        0.5, 0.5, 0.0,  //
        0.25, 0.25, 0.5;
    auto rep = validate_hierarchical(P, 2);
    REQUIRE(rep.coupling_block_zero);
    REQUIRE(rep.tracking_block_row_stochastic);
    REQUIRE(rep.tracking_block_balanced);
    REQUIRE(rep.tracking_block_connected);
    REQUIRE(rep.ok());

    WeightMatrix leaky = P;
    leaky(0, 2) = 0.1; // tracker now weighs a non-tracker density
    leaky(0, 0) -= 0.1;
    auto rep2 = validate_hierarchical(leaky, 2);
    REQUIRE_FALSE(rep2.coupling_block_zero);
    REQUIRE_FALSE(rep2.ok());
    REQUIRE_FALSE(rep2.violations.empty());
}

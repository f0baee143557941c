#include <gtest/gtest.h>

#include <wormsim/topology.hpp>

#include "fixtures.hpp"

using namespace wormsim;

namespace {

NetworkSpec line4() {
    NetworkSpec n;
    n.nodes = {"a", "b", "c", "d"};
    n.links = {{1, LinkKind::valid, "a", "b"}, {2, LinkKind::valid, "b", "c"}, {3, LinkKind::valid, "c", "d"}};
    n.sources = {{1, "a", "d", 1.0, {{1, 2, 3}}}};
    return n;
}

}  // namespace

TEST(ShortestPath, SelfDistanceIsZero) {
    auto n = line4();
    EXPECT_EQ(shortest_path_len(n, "b", "b").value(), 0);
}

TEST(ShortestPath, LineOfFour) {
    auto n = line4();
    EXPECT_EQ(shortest_path_len(n, "a", "d").value(), 3);
}

TEST(ShortestPath, DisconnectedIsUnreachable) {
    auto n = line4();
    n.nodes.push_back("e");
    EXPECT_FALSE(shortest_path_len(n, "a", "e").has_value());
}

TEST(ShortestPath, UnknownNodeThrows) {
    auto n = line4();
    EXPECT_THROW(shortest_path_len(n, "a", "zz"), InputError);
}

TEST(ShortestPath, CanonicalDistancesSkipWormholes) {
    auto n = fixtures::canonical_network();
    EXPECT_EQ(shortest_path_len(n, "S1", "D", false).value(), 4);
    EXPECT_EQ(shortest_path_len(n, "S1", "D", true).value(), 3);
    EXPECT_EQ(shortest_path_len(n, "S1", "G", false).value(), 2);
}

TEST(ShortestPath, TriangleInequalityOnRandomGraphs) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Graph g = random_connected_graph(15, 0.2, seed);
        std::vector<std::vector<int>> d;
        for (std::size_t v = 0; v < g.size(); ++v) d.push_back(g.bfs(v));
        Stream rng(seed, "triples");
        for (int k = 0; k < 200; ++k) {
            auto i = rng.below(15), j = rng.below(15), m = rng.below(15);
            EXPECT_LE(d[i][m], d[i][j] + d[j][m]);
        }
    }
}

TEST(Incidence, SinglePathSingleLink) {
    NetworkSpec n;
    n.nodes = {"s", "t"};
    n.links = {{7, LinkKind::valid, "s", "t"}};
    n.sources = {{1, "s", "t", 1.0, {{7}}}};
    auto A = build_incidence(n);
    ASSERT_EQ(A.rows, 1u);
    ASSERT_EQ(A.cols, 1u);
    EXPECT_EQ(A.at(0, 0), 1);
}

TEST(Incidence, CanonicalEachLinkOncePerSource) {
    auto n = fixtures::canonical_network();
    auto A = build_incidence(n);
    ASSERT_EQ(A.rows, 5u);
    ASSERT_EQ(A.cols, 6u);
    for (std::size_t l = 0; l < A.rows; ++l) {
        int ones = 0;
        for (std::size_t p = 0; p < A.cols; ++p) ones += A.at(l, p);
        EXPECT_EQ(ones, 2) << "link " << n.links[l].id;
    }
    // path {9} does not touch link 4
    EXPECT_EQ(A.at(n.link_index(4), 2), 0);
}

TEST(Incidence, ColumnSupportIsDeclaredPath) {
    auto n = fixtures::canonical_network();
    auto A = build_incidence(n);
    for (std::size_t p = 0; p < A.cols; ++p) {
        std::vector<int> support;
        for (std::size_t l = 0; l < A.rows; ++l)
            if (A.at(l, p)) support.push_back(n.links[l].id);
        auto declared = n.flat_path(p);
        std::sort(declared.begin(), declared.end());
        EXPECT_EQ(support, declared);
    }
}

TEST(Incidence, CanonicalHasSharedColumns) {
    EXPECT_FALSE(full_column_rank(build_incidence(fixtures::canonical_network())));
    EXPECT_TRUE(full_column_rank(build_incidence(line4())));
}

TEST(LinkRates, ZeroFlow) {
    auto A = build_incidence(fixtures::canonical_network());
    for (double v : link_rates(A, std::vector<double>(6, 0.0))) EXPECT_EQ(v, 0.0);
}

TEST(LinkRates, CanonicalInitialAllocation) {
    auto n = fixtures::canonical_network();
    auto A = build_incidence(n);
    auto rl = link_rates(A, {5, 2, 3, 2, 2, 1});
    EXPECT_DOUBLE_EQ(rl[n.link_index(9)], 4.0);
    EXPECT_DOUBLE_EQ(rl[n.link_index(4)], 7.0);
    EXPECT_DOUBLE_EQ(rl[n.link_index(7)], 4.0);
}

TEST(LinkRates, SinglePathOverTwoLinks) {
    NetworkSpec n;
    n.nodes = {"G", "A", "D"};
    n.links = {{4, LinkKind::valid, "G", "A"}, {5, LinkKind::valid, "A", "D"}};
    n.sources = {{1, "G", "D", 7.0, {{4, 5}}}};
    auto rl = link_rates(build_incidence(n), {7.0});
    EXPECT_DOUBLE_EQ(rl[0], 7.0);
    EXPECT_DOUBLE_EQ(rl[1], 7.0);
}

TEST(LinkRates, Linear) {
    auto A = build_incidence(fixtures::canonical_network());
    Stream rng(3, "linear");
    for (int k = 0; k < 50; ++k) {
        std::vector<double> r(6), s(6), sum(6);
        for (int p = 0; p < 6; ++p) {
            r[p] = rng.uniform() * 5;
            s[p] = rng.uniform() * 5;
            sum[p] = r[p] + s[p];
        }
        auto a = link_rates(A, r), b = link_rates(A, s), c = link_rates(A, sum);
        for (std::size_t l = 0; l < c.size(); ++l) EXPECT_NEAR(c[l], a[l] + b[l], 1e-12);
    }
}

TEST(LinkRates, NegativeRateRejected) {
    auto A = build_incidence(fixtures::canonical_network());
    EXPECT_THROW(link_rates(A, {1, 1, -1, 1, 1, 1}), InputError);
}

TEST(Validate, RejectsBrokenWalk) {
    auto n = fixtures::canonical_network();
    n.sources[0].paths.push_back({5, 4});
    EXPECT_THROW(validate(n), InputError);
}

TEST(Validate, RejectsUnknownLinkAndDuplicateIds) {
    auto n = fixtures::canonical_network();
    n.sources[0].paths.push_back({42});
    EXPECT_THROW(validate(n), InputError);
    auto m = fixtures::canonical_network();
    m.links.push_back(m.links.front());
    EXPECT_THROW(validate(m), InputError);
}

TEST(RandomGraph, ConnectedAndReproducible) {
    auto a = random_connected_graph(20, 0.15, 11);
    auto b = random_connected_graph(20, 0.15, 11);
    EXPECT_TRUE(a.connected());
    for (std::size_t v = 0; v < a.size(); ++v) EXPECT_EQ(a.neighbors(v), b.neighbors(v));
}

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "alignet/community.hpp"
#include "oracles.hpp"

using namespace alignet;

namespace {

FollowerGraph follower_graph(const std::vector<std::pair<std::string, std::string>>& edges) {
    FollowerGraph g;
    for (const auto& e : edges) {
        g.nodes.insert(e.first);
        g.nodes.insert(e.second);
        g.edges.insert(e);
    }
    return g;
}

// Two triangles {a,b,c} and {d,e,f} joined by the bridge c-d, unit weights.
FollowerGraph two_triangles() {
    return follower_graph(
        {{"a", "b"}, {"b", "c"}, {"c", "a"}, {"d", "e"}, {"e", "f"}, {"f", "d"}, {"c", "d"}});
}

FollowerGraph clique(const std::vector<std::string>& names) {
    FollowerGraph g;
    for (std::size_t i = 0; i < names.size(); ++i)
        for (std::size_t j = i + 1; j < names.size(); ++j) g.edges.insert({names[i], names[j]});
    for (const auto& n : names) g.nodes.insert(n);
    return g;
}

Partition make_partition(const std::map<std::string, int>& assignment) {
    Partition p;
    p.assignment = assignment;
    return p;
}

}  // namespace

TEST_CASE("canonicalize renumbers communities by smallest member") {
    const auto p = canonicalize(make_partition({{"a", 7}, {"b", 7}, {"c", 2}, {"d", 9}}));
    REQUIRE(p.assignment.at("a") == 0);
    REQUIRE(p.assignment.at("b") == 0);
    REQUIRE(p.assignment.at("c") == 1);
    REQUIRE(p.assignment.at("d") == 2);
    REQUIRE(p.k() == 3);

    // Equality ignores the labels themselves.
    const auto q = make_partition({{"a", 5}, {"b", 5}, {"c", 0}, {"d", 1}});
    REQUIRE(p == q);
    const auto r = make_partition({{"a", 0}, {"b", 1}, {"c", 1}, {"d", 2}});
    REQUIRE_FALSE(p == r);
}

TEST_CASE("partition_quality matches the hand value on two bridged triangles") {
    const auto g = two_triangles();
    const auto split = make_partition(
        {{"a", 0}, {"b", 0}, {"c", 0}, {"d", 1}, {"e", 1}, {"f", 1}});
    // m = 7: each triangle has in = 6, tot = 7, so Q = 2 (6/14 - (7/14)^2).
    REQUIRE(partition_quality(g, split, 1.0) == Catch::Approx(5.0 / 14.0).margin(1e-12));
    REQUIRE(partition_quality(g, split, 2.0) ==
            Catch::Approx(2.0 * (6.0 / 14.0 - 0.25 / 2.0)).margin(1e-12));

    const auto all_one = make_partition(
        {{"a", 0}, {"b", 0}, {"c", 0}, {"d", 0}, {"e", 0}, {"f", 0}});
    REQUIRE(partition_quality(g, all_one, 1.0) == Catch::Approx(0.0).margin(1e-12));

    // Cross-check against the independent formula.
    const auto w = oracle::undirected_weights(g);
    const std::vector<std::string> nodes(g.nodes.begin(), g.nodes.end());
    std::map<std::string, int> comm;
    for (const auto& [n, c] : split.assignment) comm[n] = c;
    REQUIRE(partition_quality(g, split, 1.0) ==
            Catch::Approx(oracle::quality(nodes, w, comm, 1.0)).margin(1e-12));

    REQUIRE_THROWS_AS(partition_quality(g, split, 0.0), ArgumentError);
    REQUIRE_THROWS_AS(partition_quality(FollowerGraph{}, split, 1.0), ArgumentError);
    auto missing = split;
    missing.assignment.erase("f");
    REQUIRE_THROWS_AS(partition_quality(g, missing, 1.0), ConsistencyError);
}

TEST_CASE("detect_communities splits bridged triangles and is reproducible") {
    const auto g = two_triangles();
    const auto res = detect_communities_full(g, 1.0, 8, 3);
    const auto expected = make_partition(
        {{"a", 0}, {"b", 0}, {"c", 0}, {"d", 1}, {"e", 1}, {"f", 1}});
    REQUIRE(res.partition == expected);
    REQUIRE(res.quality == Catch::Approx(5.0 / 14.0).margin(1e-9));
    REQUIRE(res.quality == Catch::Approx(partition_quality(g, res.partition, 1.0)).margin(1e-9));

    // The recorded trace never decreases.
    for (std::size_t i = 1; i < res.quality_trace.size(); ++i)
        REQUIRE(res.quality_trace[i] >= res.quality_trace[i - 1] - 1e-9);
    REQUIRE(res.quality_trace.back() == Catch::Approx(res.quality).margin(1e-12));

    const auto again = detect_communities_full(g, 1.0, 8, 3);
    REQUIRE(again.partition == res.partition);
    REQUIRE(again.quality == res.quality);
    const auto threaded = detect_communities_full(g, 1.0, 8, 3, 4);
    REQUIRE(threaded.partition == res.partition);
    REQUIRE(threaded.quality == res.quality);

    REQUIRE_THROWS_AS(detect_communities(g, 1.0, 0, 3), ArgumentError);
    REQUIRE_THROWS_AS(detect_communities(g, -1.0, 8, 3), ArgumentError);
    REQUIRE_THROWS_AS(detect_communities(FollowerGraph{}, 1.0, 8, 3), ArgumentError);
    FollowerGraph no_edges;
    no_edges.nodes = {"a", "b"};
    REQUIRE_THROWS_AS(detect_communities(no_edges, 1.0, 8, 3), ArgumentError);
}

TEST_CASE("detect_communities keeps a clique together") {
    const auto g = clique({"a", "b", "c", "d", "e"});
    const auto p = detect_communities(g, 1.0, 6, 11);
    REQUIRE(p.k() == 1);
}

TEST_CASE("communities never span disconnected components") {
    auto g = follower_graph({{"a", "b"}, {"b", "c"}, {"c", "a"},
                             {"x", "y"}, {"y", "z"}, {"z", "x"}});
    const auto p = detect_communities(g, 1.0, 6, 5);
    const auto expected = make_partition(
        {{"a", 0}, {"b", 0}, {"c", 0}, {"x", 1}, {"y", 1}, {"z", 1}});
    REQUIRE(p == expected);
}

TEST_CASE("detect_communities finds the exhaustive optimum on small graphs") {
    std::mt19937_64 rng(777);
    int optimal = 0;
    const int trials = 25;
    for (int trial = 0; trial < trials; ++trial) {
        const std::size_t n = 4 + rng() % 4;  // 4..7 nodes
        std::vector<std::string> names;
        for (std::size_t i = 0; i < n; ++i) names.push_back("n" + std::to_string(i));
        std::vector<std::pair<std::string, std::string>> edges;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                if (rng() % 100 < 50) edges.push_back({names[i], names[j]});
        if (edges.empty()) edges.push_back({names[0], names[1]});
        auto g = follower_graph(edges);
        for (const auto& nm : names) g.nodes.insert(nm);

        const auto res = detect_communities_full(g, 1.0, 8, 1000 + trial);
        const auto best = oracle::best_partition(g, 1.0);

        // Self-consistency always; the heuristic must never beat the
        // exhaustive optimum and should almost always reach it.
        REQUIRE(res.quality ==
                Catch::Approx(partition_quality(g, res.partition, 1.0)).margin(1e-9));
        REQUIRE(res.quality <= best.quality + 1e-9);
        if (std::abs(res.quality - best.quality) <= 1e-9) ++optimal;
    }
    REQUIRE(optimal >= trials - 2);
}

TEST_CASE("variation_of_information axioms and frozen values") {
    const auto a = make_partition({{"a", 0}, {"b", 0}, {"c", 1}, {"d", 1}});
    const auto a_relabeled = make_partition({{"a", 4}, {"b", 4}, {"c", 2}, {"d", 2}});
    const auto b = make_partition({{"a", 0}, {"b", 1}, {"c", 0}, {"d", 1}});
    REQUIRE(variation_of_information(a, a) == 0.0);
    REQUIRE(variation_of_information(a, a_relabeled) == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(variation_of_information(a, b) == Catch::Approx(2.0 * std::log(2.0)).margin(1e-12));
    REQUIRE(variation_of_information(a, b) ==
            Catch::Approx(variation_of_information(b, a)).margin(1e-12));

    const auto singletons = make_partition({{"a", 0}, {"b", 1}, {"c", 2}, {"d", 3}});
    const auto one_block = make_partition({{"a", 0}, {"b", 0}, {"c", 0}, {"d", 0}});
    REQUIRE(variation_of_information(singletons, one_block) ==
            Catch::Approx(std::log(4.0)).margin(1e-12));

    const auto smaller = make_partition({{"a", 0}, {"b", 0}});
    REQUIRE_THROWS_AS(variation_of_information(a, smaller), ArgumentError);
    const auto other_nodes = make_partition({{"a", 0}, {"b", 0}, {"c", 1}, {"x", 1}});
    REQUIRE_THROWS_AS(variation_of_information(a, other_nodes), ArgumentError);
    REQUIRE_THROWS_AS(variation_of_information(Partition{}, Partition{}), ArgumentError);
}

TEST_CASE("variation_of_information matches the contingency oracle on random pairs") {
    std::mt19937_64 rng(4242);
    for (int trial = 0; trial < 30; ++trial) {
        Partition a, b;
        std::map<std::string, int> ma, mb;
        for (int i = 0; i < 8; ++i) {
            const std::string node = "n" + std::to_string(i);
            int ca = static_cast<int>(rng() % 3);
            int cb = static_cast<int>(rng() % 3);
            a.assignment[node] = ca;
            b.assignment[node] = cb;
            ma[node] = ca;
            mb[node] = cb;
        }
        REQUIRE(variation_of_information(a, b) ==
                Catch::Approx(oracle::variation_of_information(ma, mb)).margin(1e-9));
    }
}

TEST_CASE("intersect_partitions refines both inputs") {
    const auto a = make_partition(
        {{"u1", 0}, {"u2", 0}, {"u3", 0}, {"u4", 1}, {"u5", 1}, {"u6", 1}});
    const auto b = make_partition(
        {{"u1", 0}, {"u2", 0}, {"u3", 1}, {"u4", 1}, {"u5", 2}, {"u6", 2}});
    const auto cells = intersect_partitions(a, b);
    const auto expected = make_partition(
        {{"u1", 0}, {"u2", 0}, {"u3", 1}, {"u4", 2}, {"u5", 3}, {"u6", 3}});
    REQUIRE(cells == expected);
    REQUIRE(cells.k() == 4);

    REQUIRE(intersect_partitions(a, a) == a);
    REQUIRE(intersect_partitions(cells, cells) == cells);
    REQUIRE(intersect_partitions(a, b) == intersect_partitions(b, a));

    const auto smaller = make_partition({{"u1", 0}});
    REQUIRE_THROWS_AS(intersect_partitions(a, smaller), ArgumentError);
    auto other = b;
    other.assignment.erase("u6");
    other.assignment["u7"] = 2;
    REQUIRE_THROWS_AS(intersect_partitions(a, other), ArgumentError);
}

TEST_CASE("intersect_partitions groups exactly the node pairs shared by both") {
    std::mt19937_64 rng(999);
    for (int trial = 0; trial < 20; ++trial) {
        Partition a, b;
        std::vector<std::string> nodes;
        for (int i = 0; i < 8; ++i) {
            const std::string node = "n" + std::to_string(i);
            nodes.push_back(node);
            a.assignment[node] = static_cast<int>(rng() % 3);
            b.assignment[node] = static_cast<int>(rng() % 3);
        }
        const auto cells = intersect_partitions(a, b);
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            for (std::size_t j = i + 1; j < nodes.size(); ++j) {
                const bool together = cells.assignment.at(nodes[i]) == cells.assignment.at(nodes[j]);
                const bool in_both = a.assignment.at(nodes[i]) == a.assignment.at(nodes[j]) &&
                                     b.assignment.at(nodes[i]) == b.assignment.at(nodes[j]);
                REQUIRE(together == in_both);
            }
        }
    }
}

TEST_CASE("prune_small drops undersized cells and renumbers") {
    const auto p = make_partition(
        {{"a", 0}, {"b", 0}, {"c", 0}, {"d", 1}, {"e", 1}, {"f", 2}});
    const auto pruned = prune_small(p, 2);
    REQUIRE(pruned.removed == std::set<std::string>{"f"});
    REQUIRE(pruned.partition.k() == 2);
    REQUIRE(pruned.partition.assignment.size() == 5);
    REQUIRE(pruned.partition.assignment.at("a") == 0);
    REQUIRE(pruned.partition.assignment.at("d") == 1);

    const auto keep_all = prune_small(p, 1);
    REQUIRE(keep_all.removed.empty());
    REQUIRE(keep_all.partition == p);

    REQUIRE_THROWS_AS(prune_small(p, 4), ValidationError);
    REQUIRE_THROWS_AS(prune_small(p, 0), ArgumentError);

    // Default threshold is 21 members.
    Partition big;
    for (int i = 0; i < 25; ++i) big.assignment["m" + std::to_string(i)] = 0;
    for (int i = 0; i < 4; ++i) big.assignment["s" + std::to_string(i)] = 1;
    const auto def = prune_small(big);
    REQUIRE(def.removed.size() == 4);
    REQUIRE(def.partition.k() == 1);
}

TEST_CASE("stability_scan picks the earliest most stable time") {
    std::vector<std::string> left, right;
    for (int i = 0; i < 6; ++i) {
        left.push_back("l" + std::to_string(i));
        right.push_back("r" + std::to_string(i));
    }
    auto g = clique(left);
    const auto rg = clique(right);
    g.nodes.insert(rg.nodes.begin(), rg.nodes.end());
    g.edges.insert(rg.edges.begin(), rg.edges.end());
    g.edges.insert({"l0", "r0"});

    const auto scan = stability_scan(g, {1.0, 1.4}, 6, 21);
    REQUIRE(scan.diagnostics.size() == 2);
    REQUIRE(scan.diagnostics[0].time == 1.0);
    REQUIRE(scan.diagnostics[1].time == 1.4);
    for (const auto& d : scan.diagnostics) {
        REQUIRE(d.k == 2);
        REQUIRE(d.mean_vi == Catch::Approx(0.0).margin(1e-12));
        REQUIRE(d.quality > 0.0);
    }
    REQUIRE(scan.selected_time == 1.0);
    REQUIRE(scan.partition.k() == 2);
    for (int i = 1; i < 6; ++i) {
        REQUIRE(scan.partition.assignment.at(left[i]) == scan.partition.assignment.at(left[0]));
        REQUIRE(scan.partition.assignment.at(right[i]) == scan.partition.assignment.at(right[0]));
    }
    REQUIRE(scan.partition.assignment.at("l0") != scan.partition.assignment.at("r0"));

    REQUIRE_THROWS_AS(stability_scan(g, {}, 6, 21), ArgumentError);
    REQUIRE_THROWS_AS(stability_scan(g, {1.0}, 0, 21), ArgumentError);
}

TEST_CASE("subcommunity_profiles averages the defined components per cell") {
    const auto p = make_partition({{"a", 0}, {"b", 0}, {"c", 1}});
    std::map<std::string, UserSentiment> agg;
    agg["a"] = {1.0, 2.0, std::nullopt, 3.0};
    agg["b"] = {3.0, std::nullopt, std::nullopt, 5.0};
    agg["c"] = {-1.0, -2.0, -3.0, -4.0};

    const auto profiles = subcommunity_profiles(p, agg);
    REQUIRE(profiles.size() == 2);
    const auto& c0 = profiles[0];
    REQUIRE(c0.cell == 0);
    REQUIRE(c0.members == std::set<std::string>{"a", "b"});
    REQUIRE(c0.size() == 2);
    REQUIRE(c0.s_in.value() == Catch::Approx(2.0).margin(1e-12));
    REQUIRE(c0.s_out.value() == Catch::Approx(2.0).margin(1e-12));
    REQUIRE_FALSE(c0.s_n_in.has_value());
    REQUIRE(c0.s_n_out.value() == Catch::Approx(4.0).margin(1e-12));
    const auto& c1 = profiles[1];
    REQUIRE(c1.cell == 1);
    REQUIRE(c1.size() == 1);
    REQUIRE(c1.s_in.value() == -1.0);
    REQUIRE(c1.s_n_in.value() == -3.0);

    agg.erase("b");
    REQUIRE_THROWS_AS(subcommunity_profiles(p, agg), ConsistencyError);
}

TEST_CASE("partition serialization round trips") {
    const auto p = canonicalize(make_partition({{"ann", 0}, {"bob", 0}, {"cat", 1}}));
    const auto text = serialize_partition(p);
    REQUIRE(text == "user,community\nann,0\nbob,0\ncat,1\n");
    REQUIRE(parse_partition_text(text) == p);

    REQUIRE_THROWS_AS(parse_partition_text("user,x\nann,0\n"), ValidationError);
    REQUIRE_THROWS_AS(parse_partition_text("user,community\nann\n"), ValidationError);
    REQUIRE_THROWS_AS(parse_partition_text("user,community\nann,-1\n"), ValidationError);
    REQUIRE_THROWS_AS(parse_partition_text(""), ValidationError);
}

TEST_CASE("profile serialization round trips including blanks") {
    const auto p = make_partition({{"a", 0}, {"b", 0}, {"c", 1}});
    std::map<std::string, UserSentiment> agg;
    agg["a"] = {1.5, std::nullopt, std::nullopt, 3.0};
    agg["b"] = {2.5, std::nullopt, std::nullopt, 5.0};
    agg["c"] = {-1.0, -2.0, -3.0, -4.0};
    const auto profiles = subcommunity_profiles(p, agg);
    const auto text = serialize_profiles(profiles);
    const auto rows = parse_profiles_text(text);
    REQUIRE(rows.size() == 2);
    REQUIRE(rows[0].cell == 0);
    REQUIRE(rows[0].size == 2);
    REQUIRE(rows[0].s_in.value() == Catch::Approx(2.0).margin(1e-12));
    REQUIRE_FALSE(rows[0].s_out.has_value());
    REQUIRE_FALSE(rows[0].s_n_in.has_value());
    REQUIRE(rows[0].s_n_out.value() == Catch::Approx(4.0).margin(1e-12));
    REQUIRE(rows[1].cell == 1);
    REQUIRE(rows[1].s_out.value() == -2.0);

    REQUIRE_THROWS_AS(parse_profiles_text("bad\n"), ValidationError);
    REQUIRE_THROWS_AS(parse_profiles_text("cell,size,s_in,s_out,s_n_in,s_n_out\n0,1,1,2\n"),
                      ValidationError);
    REQUIRE_THROWS_AS(parse_profiles_text("cell,size,s_in,s_out,s_n_in,s_n_out\n0,-1,1,2,3,4\n"),
                      ValidationError);
    REQUIRE_THROWS_AS(parse_profiles_text(""), ValidationError);
}

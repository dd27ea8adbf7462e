#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "alignet/kmeans.hpp"
#include "oracles.hpp"

using namespace alignet;

namespace {

// Three well-separated 4-D blobs with +-0.5 jitter, 15 points each.
std::vector<Point4> three_blobs(std::vector<int>* truth = nullptr) {
    const std::vector<Point4> centers{
        {0.0, 0.0, 0.0, 0.0}, {10.0, 0.0, 0.0, 0.0}, {0.0, 10.0, 0.0, 0.0}};
    std::mt19937_64 rng(8123);
    std::uniform_real_distribution<double> jitter(-0.5, 0.5);
    std::vector<Point4> pts;
    for (int b = 0; b < 3; ++b)
        for (int i = 0; i < 15; ++i) {
            Point4 p = centers[b];
            for (int d = 0; d < 4; ++d) p[d] += jitter(rng);
            pts.push_back(p);
            if (truth) truth->push_back(b);
        }
    return pts;
}

SubCommunityProfile profile(int cell, const std::set<std::string>& members,
                            std::optional<double> s_in, std::optional<double> s_out,
                            std::optional<double> s_n_in, std::optional<double> s_n_out) {
    SubCommunityProfile p;
    p.cell = cell;
    p.members = members;
    p.s_in = s_in;
    p.s_out = s_out;
    p.s_n_in = s_n_in;
    p.s_n_out = s_n_out;
    return p;
}

}  // namespace

TEST_CASE("kmeans with k=1 returns the weighted mean") {
    const std::vector<Point4> pts{{0, 0, 0, 0}, {1, 1, 1, 1}};
    const auto unweighted = kmeans(pts, 1, 3, 5);
    for (int d = 0; d < 4; ++d)
        REQUIRE(unweighted.centroids[0][d] == Catch::Approx(0.5).margin(1e-12));
    REQUIRE(unweighted.wss == Catch::Approx(2.0).margin(1e-12));

    const auto weighted = kmeans(pts, {1.0, 3.0}, 1, 3, 5);
    for (int d = 0; d < 4; ++d)
        REQUIRE(weighted.centroids[0][d] == Catch::Approx(0.75).margin(1e-12));
    REQUIRE(weighted.wss == Catch::Approx(3.0).margin(1e-12));
}

TEST_CASE("kmeans with k equal to the point count is exact") {
    const std::vector<Point4> pts{{0, 0, 0, 0}, {5, 0, 0, 0}, {0, 5, 0, 0}, {0, 0, 5, 0}};
    const auto r = kmeans(pts, 4, 2, 9);
    REQUIRE(r.wss == Catch::Approx(0.0).margin(1e-12));
    std::set<int> used(r.assignment.begin(), r.assignment.end());
    REQUIRE(used.size() == 4);
}

TEST_CASE("kmeans validates its arguments") {
    const std::vector<Point4> pts{{0, 0, 0, 0}, {1, 0, 0, 0}};
    REQUIRE_THROWS_AS(kmeans({}, 1, 3, 1), ArgumentError);
    REQUIRE_THROWS_AS(kmeans(pts, 0, 3, 1), ArgumentError);
    REQUIRE_THROWS_AS(kmeans(pts, 3, 3, 1), ArgumentError);
    REQUIRE_THROWS_AS(kmeans(pts, std::vector<double>{1.0}, 1, 3, 1), ArgumentError);
    REQUIRE_THROWS_AS(kmeans(pts, std::vector<double>{1.0, 0.0}, 1, 3, 1), ArgumentError);
    REQUIRE_THROWS_AS(kmeans(pts, std::vector<double>{1.0, -2.0}, 1, 3, 1), ArgumentError);
    REQUIRE_THROWS_AS(kmeans(pts, 1, 0, 1), ArgumentError);
}

TEST_CASE("kmeans is reproducible and thread independent") {
    const auto pts = three_blobs();
    const auto a = kmeans(pts, 3, 5, 17, 1);
    const auto b = kmeans(pts, 3, 5, 17, 1);
    REQUIRE(a.assignment == b.assignment);
    REQUIRE(a.centroids == b.centroids);
    REQUIRE(a.wss == b.wss);
    const auto c = kmeans(pts, 3, 5, 17, 4);
    REQUIRE(c.assignment == a.assignment);
    REQUIRE(c.wss == a.wss);
}

TEST_CASE("nearest centroid ties break toward the lower index") {
    const std::vector<Point4> centroids{{1, 0, 0, 0}, {-1, 0, 0, 0}};
    REQUIRE(detail::nearest({0, 0, 0, 0}, centroids) == 0);
    REQUIRE(detail::nearest({-0.5, 0, 0, 0}, centroids) == 1);
}

TEST_CASE("kmeans recovers three separated blobs") {
    std::vector<int> truth;
    const auto pts = three_blobs(&truth);
    const auto r = kmeans(pts, 3, 10, 23);

    // Same blob, same cluster; different blobs, different clusters.
    std::map<int, int> blob_to_cluster;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        auto it = blob_to_cluster.find(truth[i]);
        if (it == blob_to_cluster.end()) {
            blob_to_cluster[truth[i]] = r.assignment[i];
        } else {
            REQUIRE(it->second == r.assignment[i]);
        }
    }
    std::set<int> distinct;
    for (const auto& [blob, cl] : blob_to_cluster) distinct.insert(cl);
    REQUIRE(distinct.size() == 3);
    REQUIRE(r.wss < 45.0 * 4.0 * 0.25);  // far below the jitter upper bound
}

TEST_CASE("kmeans output satisfies the nearest and wss invariants") {
    std::mt19937_64 rng(5150);
    std::uniform_real_distribution<double> coord(-5.0, 5.0);
    std::uniform_real_distribution<double> wdist(0.5, 2.0);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<Point4> pts(40);
        std::vector<double> weights(40);
        for (auto& p : pts)
            for (int d = 0; d < 4; ++d) p[d] = coord(rng);
        for (auto& w : weights) w = wdist(rng);
        const int k = 2 + static_cast<int>(rng() % 4);
        const auto r = kmeans(pts, weights, k, 6, 31 + trial);
        REQUIRE(r.assignment.size() == pts.size());
        for (int a : r.assignment) {
            REQUIRE(a >= 0);
            REQUIRE(a < k);
        }
        REQUIRE(oracle::assignment_is_nearest(pts, r.assignment, r.centroids));
        REQUIRE(r.wss ==
                Catch::Approx(oracle::wss_of(pts, weights, r.assignment, r.centroids)).margin(1e-9));
    }
}

TEST_CASE("kmeans survives duplicate-heavy input") {
    const std::vector<Point4> pts{
        {0, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}, {1, 0, 0, 0}};
    const auto r = kmeans(pts, 3, 5, 2);
    REQUIRE(r.wss == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(oracle::assignment_is_nearest(pts, r.assignment, r.centroids));
}

TEST_CASE("elbow_from_curve picks the largest second difference") {
    REQUIRE(elbow_from_curve({{1, 100}, {2, 40}, {3, 35}, {4, 33}, {5, 32}}) == 2);
    REQUIRE(elbow_from_curve({{1, 100}, {2, 90}, {3, 20}, {4, 15}, {5, 12}}) == 3);
    // A linear curve has no elbow; ties resolve to the first interior k.
    REQUIRE(elbow_from_curve({{1, 10}, {2, 8}, {3, 6}, {4, 4}}) == 2);
    REQUIRE_THROWS_AS(elbow_from_curve({{1, 10}, {2, 8}}), ArgumentError);
}

TEST_CASE("elbow_select finds k=3 on the blob fixture with a non-increasing curve") {
    const auto pts = three_blobs();
    const std::vector<double> weights(pts.size(), 1.0);
    const auto res = elbow_select(pts, weights, 1, 5, 10, 77);
    REQUIRE(res.selected_k == 3);
    REQUIRE(res.curve.size() == 5);
    for (std::size_t i = 0; i < res.curve.size(); ++i)
        REQUIRE(res.curve[i].first == static_cast<int>(i) + 1);
    for (std::size_t i = 1; i < res.curve.size(); ++i)
        REQUIRE(res.curve[i].second <= res.curve[i - 1].second + 1e-9);
    REQUIRE(res.best.centroids.size() == 3);
    REQUIRE(res.best.wss == Catch::Approx(res.curve[2].second).margin(1e-12));

    REQUIRE_THROWS_AS(elbow_select(pts, weights, 1, 2, 10, 77), ArgumentError);
    REQUIRE_THROWS_AS(elbow_select(pts, weights, 0, 5, 10, 77), ArgumentError);
    REQUIRE_THROWS_AS(elbow_select(pts, weights, 1, static_cast<int>(pts.size()) + 1, 10, 77),
                      ArgumentError);
}

TEST_CASE("profile_points imputes cross-cell means and can standardize") {
    std::vector<SubCommunityProfile> profiles{
        profile(0, {"a"}, 1.0, 4.0, std::nullopt, 2.0),
        profile(1, {"b"}, 3.0, std::nullopt, std::nullopt, 4.0),
        profile(2, {"c"}, 5.0, 2.0, std::nullopt, std::nullopt),
    };
    PointsInfo info;
    const auto pts = profile_points(profiles, false, &info);
    REQUIRE(pts.size() == 3);
    REQUIRE(pts[0][0] == 1.0);
    REQUIRE(pts[1][1] == Catch::Approx(3.0).margin(1e-12));  // mean of 4 and 2
    REQUIRE(pts[0][2] == 0.0);                               // nothing defines s_n_in
    REQUIRE(pts[1][2] == 0.0);
    REQUIRE(pts[2][3] == Catch::Approx(3.0).margin(1e-12));  // mean of 2 and 4
    REQUIRE(info.imputed[0] == 0);
    REQUIRE(info.imputed[1] == 1);
    REQUIRE(info.imputed[2] == 3);
    REQUIRE(info.imputed[3] == 1);
    REQUIRE(info.fill[1] == Catch::Approx(3.0).margin(1e-12));
    REQUIRE(info.fill[2] == 0.0);
    REQUIRE_FALSE(info.standardized);

    PointsInfo zinfo;
    const auto z = profile_points(profiles, true, &zinfo);
    REQUIRE(zinfo.standardized);
    // Component 0 was (1, 3, 5): mean 3, population sd sqrt(8/3).
    REQUIRE(zinfo.mean[0] == Catch::Approx(3.0).margin(1e-12));
    REQUIRE(zinfo.sd[0] == Catch::Approx(std::sqrt(8.0 / 3.0)).margin(1e-12));
    REQUIRE(z[0][0] == Catch::Approx(-2.0 / std::sqrt(8.0 / 3.0)).margin(1e-12));
    double zsum = z[0][0] + z[1][0] + z[2][0];
    REQUIRE(zsum == Catch::Approx(0.0).margin(1e-12));
    // Constant components map to zero.
    REQUIRE(z[0][2] == 0.0);
    REQUIRE(z[1][2] == 0.0);
    REQUIRE(z[2][2] == 0.0);

    REQUIRE_THROWS_AS(profile_points({}), ArgumentError);
}

TEST_CASE("assemble_clusters orders by descending out-sentiment centroid") {
    const std::vector<SubCommunityProfile> profiles{
        profile(0, {"a1", "a2"}, 1.0, 0.4, 0.0, 0.0),
        profile(1, {"b1"}, 1.0, -0.1, 0.0, 0.0),
        profile(2, {"c1"}, 1.0, 0.2, 0.0, 0.0),
    };
    KMeansResult kres;
    kres.assignment = {0, 1, 2};
    kres.centroids = {{1.0, 0.4, 0.0, 0.0}, {1.0, -0.1, 0.0, 0.0}, {1.0, 0.2, 0.0, 0.0}};
    const auto clusters = assemble_clusters(kres, profiles);
    REQUIRE(clusters.size() == 3);
    REQUIRE(clusters[0].index == 0);
    REQUIRE(clusters[0].members == std::set<std::string>{"a1", "a2"});
    REQUIRE(clusters[0].mean_s_out == Catch::Approx(0.4).margin(1e-12));
    REQUIRE(clusters[1].members == std::set<std::string>{"c1"});
    REQUIRE(clusters[2].members == std::set<std::string>{"b1"});
    REQUIRE(clusters[1].index == 1);
    REQUIRE(clusters[2].index == 2);

    // Cells mapped to the same cluster pool their members.
    KMeansResult merged;
    merged.assignment = {0, 0, 1};
    merged.centroids = {{1.0, 0.1, 0.0, 0.0}, {1.0, 0.9, 0.0, 0.0}};
    const auto two = assemble_clusters(merged, profiles);
    REQUIRE(two.size() == 2);
    REQUIRE(two[0].members == std::set<std::string>{"c1"});
    REQUIRE(two[1].members == std::set<std::string>{"a1", "a2", "b1"});

    KMeansResult bad;
    bad.assignment = {0};
    bad.centroids = {{0, 0, 0, 0}};
    REQUIRE_THROWS_AS(assemble_clusters(bad, profiles), ArgumentError);
}

TEST_CASE("cluster serialization round trips") {
    CommunityCluster c0;
    c0.index = 0;
    c0.members = {"ann", "bob"};
    CommunityCluster c1;
    c1.index = 1;
    c1.members = {"cat"};
    const auto text = serialize_clusters({c0, c1});
    REQUIRE(text == "user,cluster\nann,0\nbob,0\ncat,1\n");
    const auto parsed = parse_clusters_text(text);
    REQUIRE(parsed.size() == 3);
    REQUIRE(parsed.at("ann") == 0);
    REQUIRE(parsed.at("cat") == 1);

    REQUIRE_THROWS_AS(parse_clusters_text("nope\n"), ValidationError);
    REQUIRE_THROWS_AS(parse_clusters_text("user,cluster\nann\n"), ValidationError);
    REQUIRE_THROWS_AS(parse_clusters_text("user,cluster\nann,-2\n"), ValidationError);
    REQUIRE_THROWS_AS(parse_clusters_text(""), ValidationError);

    const auto curve_text = serialize_wss_curve({{1, 10.0}, {2, 4.0}});
    REQUIRE(curve_text.rfind("k,wss\n", 0) == 0);
    REQUIRE(std::count(curve_text.begin(), curve_text.end(), '\n') == 3);
}

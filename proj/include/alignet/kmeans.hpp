#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "alignet/community.hpp"
#include "alignet/errors.hpp"
#include "alignet/io.hpp"
#include "alignet/rng.hpp"

namespace alignet {

using Point4 = std::array<double, 4>;

struct KMeansResult {
    std::vector<int> assignment;  // per input point
    std::vector<Point4> centroids;
    double wss = 0.0;
};

namespace detail {

inline double sqdist(const Point4& a, const Point4& b) {
    double s = 0.0;
    for (int i = 0; i < 4; ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

// Nearest centroid, ties resolved toward the lower centroid index.
inline int nearest(const Point4& p, const std::vector<Point4>& centroids) {
    int best = 0;
    double best_d = sqdist(p, centroids[0]);
    for (std::size_t c = 1; c < centroids.size(); ++c) {
        double d = sqdist(p, centroids[c]);
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    return best;
}

// Lloyd iterations from explicit starting centroids. Stops when an
// assignment pass leaves the assignment unchanged (or after 300 passes), so
// the returned assignment is nearest with respect to the returned centroids.
inline KMeansResult lloyd(const std::vector<Point4>& pts, const std::vector<double>& weights,
                          std::vector<Point4> centroids) {
    const std::size_t n = pts.size();
    const int k = static_cast<int>(centroids.size());
    std::vector<int> assignment(n, -1);
    for (int pass = 0; pass < 300; ++pass) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            int c = nearest(pts[i], centroids);
            if (c != assignment[i]) {
                assignment[i] = c;
                changed = true;
            }
        }
        if (!changed) break;
        std::vector<Point4> sum(k, Point4{0, 0, 0, 0});
        std::vector<double> wsum(k, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (int d = 0; d < 4; ++d) sum[assignment[i]][d] += weights[i] * pts[i][d];
            wsum[assignment[i]] += weights[i];
        }
        std::vector<bool> used(n, false);
        for (int c = 0; c < k; ++c) {
            if (wsum[c] > 0.0) {
                for (int d = 0; d < 4; ++d) centroids[c][d] = sum[c][d] / wsum[c];
                continue;
            }
            // Reseed an empty cluster at the point farthest from its current
            // centroid; keeps k clusters alive when initial seeds collide.
            double best_d = 0.0;
            std::size_t best_i = n;
            for (std::size_t i = 0; i < n; ++i) {
                if (used[i]) continue;
                double d = sqdist(pts[i], centroids[assignment[i]]);
                if (d > best_d) {
                    best_d = d;
                    best_i = i;
                }
            }
            if (best_i == n) continue;  // all points coincide with their centroids
            centroids[c] = pts[best_i];
            used[best_i] = true;
        }
    }
    KMeansResult r;
    r.assignment = std::move(assignment);
    r.centroids = std::move(centroids);
    r.wss = 0.0;
    for (std::size_t i = 0; i < n; ++i) r.wss += weights[i] * sqdist(pts[i], r.centroids[r.assignment[i]]);
    return r;
}

// Greedy farthest-point initialization: seeded random first centroid, then
// repeatedly the point with maximal distance to the chosen set (ties toward
// the lowest index).
inline std::vector<Point4> farthest_point_init(const std::vector<Point4>& pts, int k,
                                               std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
    std::vector<Point4> centroids{pts[pick(rng)]};
    std::vector<double> min_d(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) min_d[i] = sqdist(pts[i], centroids[0]);
    while (static_cast<int>(centroids.size()) < k) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < pts.size(); ++i)
            if (min_d[i] > min_d[best]) best = i;
        centroids.push_back(pts[best]);
        for (std::size_t i = 0; i < pts.size(); ++i)
            min_d[i] = std::min(min_d[i], sqdist(pts[i], centroids.back()));
    }
    return centroids;
}

inline void validate_points(const std::vector<Point4>& pts, const std::vector<double>& weights,
                            int k) {
    if (pts.empty()) throw ArgumentError("kmeans: no points");
    if (weights.size() != pts.size()) throw ArgumentError("kmeans: weights size mismatch");
    for (double w : weights)
        if (!(w > 0.0)) throw ArgumentError("kmeans: weights must be positive");
    if (k < 1 || static_cast<std::size_t>(k) > pts.size())
        throw ArgumentError("kmeans: k must be in [1, number of points]");
}

}  // namespace detail

inline KMeansResult kmeans(const std::vector<Point4>& pts, const std::vector<double>& weights,
                           int k, std::size_t restarts, std::uint64_t seed, unsigned threads = 1) {
    detail::validate_points(pts, weights, k);
    if (restarts == 0) throw ArgumentError("kmeans: restarts must be positive");
    std::vector<KMeansResult> outs(restarts);
    parallel_for(restarts, threads, [&](std::size_t r) {
        auto rng = make_rng(seed, r);
        outs[r] = detail::lloyd(pts, weights, detail::farthest_point_init(pts, k, rng));
    });
    std::size_t best = 0;
    for (std::size_t r = 1; r < restarts; ++r)
        if (outs[r].wss < outs[best].wss) best = r;
    return outs[best];
}

inline KMeansResult kmeans(const std::vector<Point4>& pts, int k, std::size_t restarts,
                           std::uint64_t seed, unsigned threads = 1) {
    return kmeans(pts, std::vector<double>(pts.size(), 1.0), k, restarts, seed, threads);
}

// Selection rule on a computed curve: the interior k maximizing the discrete
// second difference wss(k-1) - 2 wss(k) + wss(k+1); ties toward smaller k.
inline int elbow_from_curve(const std::vector<std::pair<int, double>>& curve) {
    if (curve.size() < 3) throw ArgumentError("elbow_from_curve: need at least 3 curve points");
    int best_k = curve[1].first;
    double best_d2 = curve[0].second - 2.0 * curve[1].second + curve[2].second;
    for (std::size_t i = 2; i + 1 < curve.size(); ++i) {
        double d2 = curve[i - 1].second - 2.0 * curve[i].second + curve[i + 1].second;
        if (d2 > best_d2) {
            best_d2 = d2;
            best_k = curve[i].first;
        }
    }
    return best_k;
}

struct ElbowResult {
    int selected_k = 0;
    std::vector<std::pair<int, double>> curve;  // (k, best wss)
    KMeansResult best;                          // result at selected_k
};

// Best wss per k over k_range, then the second-difference elbow. Each k gets
// the seeded restarts plus one warm start grown from the previous k's best
// centroids, which keeps the curve non-increasing.
inline ElbowResult elbow_select(const std::vector<Point4>& pts, const std::vector<double>& weights,
                                int k_min, int k_max, std::size_t restarts, std::uint64_t seed,
                                unsigned threads = 1) {
    detail::validate_points(pts, weights, k_min);
    if (k_max < k_min || static_cast<std::size_t>(k_max) > pts.size())
        throw ArgumentError("elbow_select: k range out of [1, number of points]");
    if (k_max - k_min < 2) throw ArgumentError("elbow_select: k range must contain at least 3 values");
    ElbowResult out;
    std::map<int, KMeansResult> results;
    const KMeansResult* prev = nullptr;
    for (int k = k_min; k <= k_max; ++k) {
        KMeansResult best = kmeans(pts, weights, k, restarts, substream_seed(seed, static_cast<std::uint64_t>(k)), threads);
        if (prev) {
            std::vector<Point4> warm = prev->centroids;
            std::vector<double> min_d(pts.size());
            for (std::size_t i = 0; i < pts.size(); ++i) {
                min_d[i] = detail::sqdist(pts[i], warm[0]);
                for (std::size_t c = 1; c < warm.size(); ++c)
                    min_d[i] = std::min(min_d[i], detail::sqdist(pts[i], warm[c]));
            }
            std::size_t far = 0;
            for (std::size_t i = 1; i < pts.size(); ++i)
                if (min_d[i] > min_d[far]) far = i;
            warm.push_back(pts[far]);
            KMeansResult warmed = detail::lloyd(pts, weights, std::move(warm));
            if (warmed.wss < best.wss) best = std::move(warmed);
        }
        out.curve.push_back({k, best.wss});
        prev = &results.emplace(k, std::move(best)).first->second;
    }
    out.selected_k = elbow_from_curve(out.curve);
    out.best = results.at(out.selected_k);
    return out;
}

// Records how profile rows were turned into points: which components were
// imputed and with what fill value, plus the standardization parameters.
struct PointsInfo {
    std::array<double, 4> fill{};
    std::array<std::size_t, 4> imputed{};
    std::array<double, 4> mean{};
    std::array<double, 4> sd{};
    bool standardized = false;
};

// Profile rows to 4-D points in component order (s_in, s_out, s_n_in,
// s_n_out). Undefined components take the mean of that component across
// cells (0 when no cell defines it). Optional z-scoring; a constant
// component maps to 0.
inline std::vector<Point4> profile_points(const std::vector<SubCommunityProfile>& profiles,
                                          bool standardize = false, PointsInfo* info = nullptr) {
    if (profiles.empty()) throw ArgumentError("profile_points: no profiles");
    PointsInfo local;
    std::array<double, 4> sum{};
    std::array<std::size_t, 4> cnt{};
    auto component = [](const SubCommunityProfile& p, int d) -> const std::optional<double>& {
        switch (d) {
            case 0: return p.s_in;
            case 1: return p.s_out;
            case 2: return p.s_n_in;
            default: return p.s_n_out;
        }
    };
    for (const auto& p : profiles)
        for (int d = 0; d < 4; ++d)
            if (component(p, d)) {
                sum[d] += *component(p, d);
                cnt[d] += 1;
            }
    for (int d = 0; d < 4; ++d) local.fill[d] = cnt[d] ? sum[d] / static_cast<double>(cnt[d]) : 0.0;

    std::vector<Point4> pts(profiles.size());
    for (std::size_t i = 0; i < profiles.size(); ++i)
        for (int d = 0; d < 4; ++d) {
            const auto& v = component(profiles[i], d);
            if (v) {
                pts[i][d] = *v;
            } else {
                pts[i][d] = local.fill[d];
                local.imputed[d] += 1;
            }
        }

    if (standardize) {
        local.standardized = true;
        for (int d = 0; d < 4; ++d) {
            double m = 0.0;
            for (const auto& p : pts) m += p[d];
            m /= static_cast<double>(pts.size());
            double var = 0.0;
            for (const auto& p : pts) var += (p[d] - m) * (p[d] - m);
            double sd = std::sqrt(var / static_cast<double>(pts.size()));
            local.mean[d] = m;
            local.sd[d] = sd;
            for (auto& p : pts) p[d] = sd > 0.0 ? (p[d] - m) / sd : 0.0;
        }
    }
    if (info) *info = local;
    return pts;
}

struct CommunityCluster {
    int index = 0;
    std::set<std::string> members;
    double mean_s_out = 0.0;

    std::size_t size() const { return members.size(); }
};

// Union of member cells per cluster, ordered by descending mean out-sentiment
// (cluster 0 is the most positive). Empty clusters are dropped.
inline std::vector<CommunityCluster> assemble_clusters(const KMeansResult& kres,
                                                       const std::vector<SubCommunityProfile>& profiles) {
    if (kres.assignment.size() != profiles.size())
        throw ArgumentError("assemble_clusters: assignment does not cover profiles");
    std::map<int, CommunityCluster> raw;
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        auto& c = raw[kres.assignment[i]];
        c.members.insert(profiles[i].members.begin(), profiles[i].members.end());
    }
    for (auto& [ci, c] : raw) c.mean_s_out = kres.centroids[ci][1];
    std::vector<std::pair<int, CommunityCluster>> ordered(raw.begin(), raw.end());
    std::stable_sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
        return a.second.mean_s_out > b.second.mean_s_out;
    });
    std::vector<CommunityCluster> out;
    for (auto& [ci, c] : ordered) {
        if (c.members.empty()) continue;
        c.index = static_cast<int>(out.size());
        out.push_back(std::move(c));
    }
    return out;
}

inline std::string serialize_clusters(const std::vector<CommunityCluster>& clusters) {
    std::map<std::string, int> rows;
    for (const auto& c : clusters)
        for (const auto& u : c.members) rows[u] = c.index;
    std::string out = "user,cluster\n";
    for (const auto& [u, c] : rows) out += u + "," + std::to_string(c) + "\n";
    return out;
}

inline std::map<std::string, int> parse_clusters_text(const std::string& text) {
    std::map<std::string, int> out;
    bool header_seen = false;
    for_each_line(text, [&](std::string_view line, std::size_t line_no) {
        if (!header_seen) {
            if (line != "user,cluster")
                throw ValidationError("clusters: bad header at line " + std::to_string(line_no));
            header_seen = true;
            return;
        }
        auto fields = split_csv_line(line);
        if (fields.size() != 2)
            throw ValidationError("clusters: expected 2 fields at line " + std::to_string(line_no));
        int c = parse_int(fields[1], line_no);
        if (c < 0) throw ValidationError("clusters: negative cluster at line " + std::to_string(line_no));
        out[std::string(fields[0])] = c;
    });
    if (!header_seen) throw ValidationError("clusters: empty file");
    return out;
}

inline std::map<std::string, int> parse_clusters(const std::string& path) {
    return parse_clusters_text(read_file(path));
}

inline std::string serialize_wss_curve(const std::vector<std::pair<int, double>>& curve) {
    std::string out = "k,wss\n";
    for (const auto& [k, wss] : curve) out += std::to_string(k) + "," + format_double(wss) + "\n";
    return out;
}

}  // namespace alignet

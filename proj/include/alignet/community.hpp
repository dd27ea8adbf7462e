#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "alignet/aggregate.hpp"
#include "alignet/errors.hpp"
#include "alignet/graph.hpp"
#include "alignet/io.hpp"
#include "alignet/rng.hpp"

namespace alignet {

// Community indices are contiguous in [0, k) and canonical: community 0
// contains the smallest node id, community 1 the smallest id not in 0, etc.
struct Partition {
    std::map<std::string, int> assignment;

    int k() const {
        std::set<int> distinct;
        for (const auto& [node, c] : assignment) distinct.insert(c);
        return static_cast<int>(distinct.size());
    }
};

inline Partition canonicalize(const Partition& p) {
    Partition out;
    std::map<int, int> remap;
    for (const auto& [node, c] : p.assignment) {
        auto it = remap.find(c);
        if (it == remap.end()) it = remap.emplace(c, static_cast<int>(remap.size())).first;
        out.assignment[node] = it->second;
    }
    return out;
}

inline bool operator==(const Partition& a, const Partition& b) {
    return canonicalize(a).assignment == canonicalize(b).assignment;
}

namespace detail {

// Undirected weighted view used by the quality objective. Symmetric matrix
// convention: adj holds off-diagonal entries, self holds A_ii, the degree
// k_i = self_i + sum of incident off-diagonal weights, and two_m = sum k_i.
struct WeightedGraph {
    std::vector<std::string> nodes;
    std::vector<std::map<int, double>> adj;
    std::vector<double> self;
    std::vector<double> k;
    double two_m = 0.0;
};

inline void add_undirected(WeightedGraph& wg, int a, int b, double w) {
    if (a == b) {
        wg.self[a] += 2.0 * w;
    } else {
        wg.adj[a][b] += w;
        wg.adj[b][a] += w;
    }
}

inline void finish_degrees(WeightedGraph& wg) {
    wg.k.assign(wg.nodes.size(), 0.0);
    wg.two_m = 0.0;
    for (std::size_t i = 0; i < wg.nodes.size(); ++i) {
        double d = wg.self[i];
        for (const auto& [j, w] : wg.adj[i]) d += w;
        wg.k[i] = d;
        wg.two_m += d;
    }
}

inline WeightedGraph to_weighted(const InteractionGraph& g) {
    WeightedGraph wg;
    wg.nodes.assign(g.nodes.begin(), g.nodes.end());
    std::map<std::string, int> index;
    for (std::size_t i = 0; i < wg.nodes.size(); ++i) index[wg.nodes[i]] = static_cast<int>(i);
    wg.adj.resize(wg.nodes.size());
    wg.self.assign(wg.nodes.size(), 0.0);
    for (const auto& [key, d] : g.edges) {
        int a = index.at(key.first), b = index.at(key.second);
        if (a == b) continue;
        add_undirected(wg, a, b, static_cast<double>(d.total()));
    }
    finish_degrees(wg);
    return wg;
}

inline WeightedGraph to_weighted(const FollowerGraph& g) {
    WeightedGraph wg;
    wg.nodes.assign(g.nodes.begin(), g.nodes.end());
    std::map<std::string, int> index;
    for (std::size_t i = 0; i < wg.nodes.size(); ++i) index[wg.nodes[i]] = static_cast<int>(i);
    wg.adj.resize(wg.nodes.size());
    wg.self.assign(wg.nodes.size(), 0.0);
    for (const auto& e : g.edges) {
        int a = index.at(e.first), b = index.at(e.second);
        if (a == b) continue;
        add_undirected(wg, a, b, 1.0);
    }
    finish_degrees(wg);
    return wg;
}

// Resolution-t quality: sum over communities of in_c/2m - (1/t)(tot_c/2m)^2,
// with in_c in the matrix convention (internal off-diagonal weights counted
// in both orders plus self-loops). t = 1 is plain modularity; larger t
// favours coarser partitions.
inline double quality_from_sums(const std::vector<double>& in, const std::vector<double>& tot,
                                double two_m, double t) {
    double q = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
        double frac = tot[c] / two_m;
        q += in[c] / two_m - frac * frac / t;
    }
    return q;
}

struct LouvainOutcome {
    std::vector<int> assignment;       // per original node index
    double quality = 0.0;
    std::vector<double> quality_trace; // after each local-move pass
};

inline LouvainOutcome louvain_once(const WeightedGraph& g0, double t, std::uint64_t seed) {
    constexpr double eps = 1e-12;
    auto rng = make_rng(seed);
    const std::size_t n0 = g0.nodes.size();
    LouvainOutcome out;
    out.assignment.resize(n0);
    std::iota(out.assignment.begin(), out.assignment.end(), 0);

    WeightedGraph g = g0;
    while (true) {
        const std::size_t n = g.adj.size();
        std::vector<int> comm(n);
        std::iota(comm.begin(), comm.end(), 0);
        std::vector<double> tot = g.k;
        std::vector<double> in = g.self;
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);

        bool moved_any = false;
        while (true) {
            std::size_t moves = 0;
            for (std::size_t idx = 0; idx < n; ++idx) {
                const std::size_t i = order[idx];
                const int old_c = comm[i];
                std::map<int, double> nbw;
                for (const auto& [j, w] : g.adj[i]) nbw[comm[j]] += w;
                const double w_old = nbw.count(old_c) ? nbw[old_c] : 0.0;
                tot[old_c] -= g.k[i];
                in[old_c] -= 2.0 * w_old + g.self[i];

                auto gain = [&](int c, double w_ic) {
                    return w_ic - tot[c] * g.k[i] / (g.two_m * t);
                };
                int best = old_c;
                double best_gain = gain(old_c, w_old);
                for (const auto& [c, w] : nbw) {
                    if (c == old_c) continue;
                    double gn = gain(c, w);
                    if (gn > best_gain + eps) {
                        best = c;
                        best_gain = gn;
                    }
                }
                const double w_best = nbw.count(best) ? nbw[best] : 0.0;
                tot[best] += g.k[i];
                in[best] += 2.0 * w_best + g.self[i];
                comm[i] = best;
                if (best != old_c) ++moves;
            }
            out.quality_trace.push_back(quality_from_sums(in, tot, g.two_m, t));
            if (moves == 0) break;
            moved_any = true;
        }

        std::map<int, int> renumber;
        for (std::size_t i = 0; i < n; ++i) {
            if (!renumber.count(comm[i])) renumber[comm[i]] = static_cast<int>(renumber.size());
        }
        for (std::size_t i = 0; i < n; ++i) comm[i] = renumber.at(comm[i]);
        for (std::size_t v = 0; v < n0; ++v) out.assignment[v] = comm[out.assignment[v]];
        if (!moved_any) break;

        const std::size_t nc = renumber.size();
        WeightedGraph next;
        next.nodes.resize(nc);
        next.adj.resize(nc);
        next.self.assign(nc, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            next.self[comm[i]] += g.self[i];
            for (const auto& [j, w] : g.adj[i]) {
                if (comm[static_cast<std::size_t>(j)] == comm[i])
                    next.self[comm[i]] += w;  // both orders of each internal pair pass through here
                else
                    next.adj[comm[i]][comm[static_cast<std::size_t>(j)]] += w;
            }
        }
        finish_degrees(next);
        if (nc == n) break;
        g = std::move(next);
    }
    out.quality = out.quality_trace.empty() ? 0.0 : out.quality_trace.back();
    return out;
}

inline Partition to_partition(const WeightedGraph& wg, const std::vector<int>& assignment) {
    Partition p;
    for (std::size_t i = 0; i < wg.nodes.size(); ++i) p.assignment[wg.nodes[i]] = assignment[i];
    return canonicalize(p);
}

struct RestartOutcome {
    Partition partition;
    double quality = 0.0;
    std::vector<double> quality_trace;
};

// Higher quality wins; ties prefer fewer communities, then the
// lexicographically smaller canonical assignment.
inline bool better_restart(const RestartOutcome& a, const RestartOutcome& b) {
    if (a.quality != b.quality) return a.quality > b.quality;
    int ka = a.partition.k(), kb = b.partition.k();
    if (ka != kb) return ka < kb;
    return a.partition.assignment < b.partition.assignment;
}

inline std::vector<RestartOutcome> run_restarts(const WeightedGraph& wg, double time,
                                                std::size_t restarts, std::uint64_t seed,
                                                unsigned threads) {
    if (wg.nodes.empty()) throw ArgumentError("detect_communities: empty graph");
    if (wg.two_m <= 0.0) throw ArgumentError("detect_communities: graph has no links");
    if (time <= 0.0) throw ArgumentError("detect_communities: markov time must be positive");
    if (restarts == 0) throw ArgumentError("detect_communities: restarts must be positive");
    std::vector<RestartOutcome> outs(restarts);
    parallel_for(restarts, threads, [&](std::size_t r) {
        auto lo = louvain_once(wg, time, substream_seed(seed, r));
        outs[r] = {to_partition(wg, lo.assignment), lo.quality, std::move(lo.quality_trace)};
    });
    return outs;
}

}  // namespace detail

struct CommunityResult {
    Partition partition;
    double quality = 0.0;
    std::vector<double> quality_trace;  // from the winning restart
};

template <class Graph>
CommunityResult detect_communities_full(const Graph& g, double markov_time, std::size_t restarts,
                                        std::uint64_t seed, unsigned threads = 1) {
    const auto wg = detail::to_weighted(g);
    auto outs = detail::run_restarts(wg, markov_time, restarts, seed, threads);
    std::size_t best = 0;
    for (std::size_t r = 1; r < outs.size(); ++r)
        if (detail::better_restart(outs[r], outs[best])) best = r;
    return {outs[best].partition, outs[best].quality, outs[best].quality_trace};
}

template <class Graph>
Partition detect_communities(const Graph& g, double markov_time, std::size_t restarts,
                             std::uint64_t seed, unsigned threads = 1) {
    return detect_communities_full(g, markov_time, restarts, seed, threads).partition;
}

// Quality of an arbitrary partition of g at resolution t. Used to check the
// optimizer against exhaustive search on small graphs.
template <class Graph>
double partition_quality(const Graph& g, const Partition& p, double markov_time) {
    const auto wg = detail::to_weighted(g);
    if (wg.two_m <= 0.0) throw ArgumentError("partition_quality: graph has no links");
    if (markov_time <= 0.0) throw ArgumentError("partition_quality: markov time must be positive");
    std::vector<int> comm(wg.nodes.size());
    int max_c = 0;
    for (std::size_t i = 0; i < wg.nodes.size(); ++i) {
        auto it = p.assignment.find(wg.nodes[i]);
        if (it == p.assignment.end())
            throw ConsistencyError("partition_quality: node '" + wg.nodes[i] + "' not in partition");
        comm[i] = it->second;
        max_c = std::max(max_c, it->second);
    }
    std::vector<double> in(max_c + 1, 0.0), tot(max_c + 1, 0.0);
    for (std::size_t i = 0; i < wg.nodes.size(); ++i) {
        tot[comm[i]] += wg.k[i];
        in[comm[i]] += wg.self[i];
        for (const auto& [j, w] : wg.adj[i])
            if (comm[static_cast<std::size_t>(j)] == comm[i]) in[comm[i]] += w;
    }
    return detail::quality_from_sums(in, tot, wg.two_m, markov_time);
}

inline double variation_of_information(const Partition& a, const Partition& b) {
    if (a.assignment.size() != b.assignment.size())
        throw ArgumentError("variation_of_information: node sets differ");
    const double n = static_cast<double>(a.assignment.size());
    if (n == 0.0) throw ArgumentError("variation_of_information: empty partitions");
    std::map<int, double> ca, cb;
    std::map<std::pair<int, int>, double> joint;
    auto ib = b.assignment.begin();
    for (const auto& [node, c] : a.assignment) {
        if (ib->first != node) throw ArgumentError("variation_of_information: node sets differ");
        ca[c] += 1.0;
        cb[ib->second] += 1.0;
        joint[{c, ib->second}] += 1.0;
        ++ib;
    }
    auto entropy = [n](const std::map<int, double>& counts) {
        double h = 0.0;
        for (const auto& [c, cnt] : counts) h -= cnt / n * std::log(cnt / n);
        return h;
    };
    double mi = 0.0;
    for (const auto& [cc, cnt] : joint) {
        double pxy = cnt / n;
        mi += pxy * std::log(pxy / (ca.at(cc.first) / n * cb.at(cc.second) / n));
    }
    return std::max(0.0, entropy(ca) + entropy(cb) - 2.0 * mi);
}

inline Partition intersect_partitions(const Partition& a, const Partition& b) {
    if (a.assignment.size() != b.assignment.size())
        throw ArgumentError("intersect_partitions: node sets differ");
    Partition out;
    std::map<std::pair<int, int>, int> cells;
    auto ib = b.assignment.begin();
    for (const auto& [node, c] : a.assignment) {
        if (ib->first != node) throw ArgumentError("intersect_partitions: node sets differ");
        std::pair<int, int> key{c, ib->second};
        auto it = cells.find(key);
        if (it == cells.end()) it = cells.emplace(key, static_cast<int>(cells.size())).first;
        out.assignment[node] = it->second;
        ++ib;
    }
    return canonicalize(out);
}

struct PruneResult {
    Partition partition;
    std::set<std::string> removed;
};

inline PruneResult prune_small(const Partition& p, std::size_t min_size = 21) {
    if (min_size == 0) throw ArgumentError("prune_small: min_size must be positive");
    std::map<int, std::size_t> sizes;
    for (const auto& [node, c] : p.assignment) sizes[c] += 1;
    PruneResult out;
    for (const auto& [node, c] : p.assignment) {
        if (sizes.at(c) >= min_size)
            out.partition.assignment[node] = c;
        else
            out.removed.insert(node);
    }
    if (out.partition.assignment.empty())
        throw ValidationError("prune_small: every cell is below min_size " + std::to_string(min_size));
    out.partition = canonicalize(out.partition);
    return out;
}

// Per-time diagnostics from a stability scan. mean_vi is the mean pairwise
// variation of information across the restarts at that time.
struct TimeDiagnostics {
    double time = 0.0;
    int k = 0;
    double quality = 0.0;
    double mean_vi = 0.0;
};

struct StabilityScanResult {
    Partition partition;
    double selected_time = 0.0;
    std::vector<TimeDiagnostics> diagnostics;
};

template <class Graph>
StabilityScanResult stability_scan(const Graph& g, const std::vector<double>& times,
                                   std::size_t restarts, std::uint64_t seed, unsigned threads = 1) {
    if (times.empty()) throw ArgumentError("stability_scan: times must be non-empty");
    const auto wg = detail::to_weighted(g);
    StabilityScanResult result;
    bool have = false;
    Partition best_partition;
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
        auto outs = detail::run_restarts(wg, times[ti], restarts, substream_seed(seed, ti), threads);
        std::size_t best = 0;
        for (std::size_t r = 1; r < outs.size(); ++r)
            if (detail::better_restart(outs[r], outs[best])) best = r;
        double vi_sum = 0.0;
        std::size_t pairs = 0;
        for (std::size_t i = 0; i < outs.size(); ++i)
            for (std::size_t j = i + 1; j < outs.size(); ++j) {
                vi_sum += variation_of_information(outs[i].partition, outs[j].partition);
                ++pairs;
            }
        TimeDiagnostics d;
        d.time = times[ti];
        d.k = outs[best].partition.k();
        d.quality = outs[best].quality;
        d.mean_vi = pairs ? vi_sum / static_cast<double>(pairs) : 0.0;
        result.diagnostics.push_back(d);
        const auto& cur = result.diagnostics.back();
        bool take = !have;
        if (have) {
            const auto& sel = *std::find_if(result.diagnostics.begin(), result.diagnostics.end(),
                                            [&](const TimeDiagnostics& x) { return x.time == result.selected_time; });
            if (cur.mean_vi < sel.mean_vi || (cur.mean_vi == sel.mean_vi && cur.k < sel.k)) take = true;
        }
        if (take) {
            result.selected_time = cur.time;
            best_partition = outs[best].partition;
            have = true;
        }
    }
    result.partition = best_partition;
    return result;
}

struct SubCommunityProfile {
    int cell = 0;
    std::set<std::string> members;
    std::optional<double> s_in, s_out, s_n_in, s_n_out;

    std::size_t size() const { return members.size(); }
};

inline std::vector<SubCommunityProfile> subcommunity_profiles(
    const Partition& p, const std::map<std::string, UserSentiment>& aggregates) {
    std::map<int, SubCommunityProfile> cells;
    std::map<int, std::array<std::pair<double, std::size_t>, 4>> sums;
    for (const auto& [node, c] : p.assignment) {
        auto it = aggregates.find(node);
        if (it == aggregates.end())
            throw ConsistencyError("subcommunity_profiles: no aggregates for user '" + node + "'");
        auto& cell = cells[c];
        cell.cell = c;
        cell.members.insert(node);
        const std::optional<double> comps[4] = {it->second.s_in, it->second.s_out,
                                                it->second.s_n_in, it->second.s_n_out};
        auto& acc = sums[c];
        for (int i = 0; i < 4; ++i) {
            if (comps[i]) {
                acc[i].first += *comps[i];
                acc[i].second += 1;
            }
        }
    }
    std::vector<SubCommunityProfile> out;
    for (auto& [c, cell] : cells) {
        const auto& acc = sums.at(c);
        auto mean_of = [](const std::pair<double, std::size_t>& a) -> std::optional<double> {
            if (a.second == 0) return std::nullopt;
            return a.first / static_cast<double>(a.second);
        };
        cell.s_in = mean_of(acc[0]);
        cell.s_out = mean_of(acc[1]);
        cell.s_n_in = mean_of(acc[2]);
        cell.s_n_out = mean_of(acc[3]);
        out.push_back(std::move(cell));
    }
    return out;
}

inline std::string serialize_partition(const Partition& p) {
    std::string out = "user,community\n";
    for (const auto& [node, c] : p.assignment) out += node + "," + std::to_string(c) + "\n";
    return out;
}

inline Partition parse_partition_text(const std::string& text) {
    Partition p;
    bool header_seen = false;
    for_each_line(text, [&](std::string_view line, std::size_t line_no) {
        if (!header_seen) {
            if (line != "user,community")
                throw ValidationError("partition: bad header at line " + std::to_string(line_no));
            header_seen = true;
            return;
        }
        auto fields = split_csv_line(line);
        if (fields.size() != 2)
            throw ValidationError("partition: expected 2 fields at line " + std::to_string(line_no));
        int c = parse_int(fields[1], line_no);
        if (c < 0) throw ValidationError("partition: negative community at line " + std::to_string(line_no));
        p.assignment[std::string(fields[0])] = c;
    });
    if (!header_seen) throw ValidationError("partition: empty file");
    return canonicalize(p);
}

inline Partition parse_partition(const std::string& path) { return parse_partition_text(read_file(path)); }

inline std::string serialize_profiles(const std::vector<SubCommunityProfile>& profiles) {
    std::string out = "cell,size,s_in,s_out,s_n_in,s_n_out\n";
    auto cell_str = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    for (const auto& pr : profiles) {
        out += std::to_string(pr.cell) + "," + std::to_string(pr.size()) + "," + cell_str(pr.s_in) +
               "," + cell_str(pr.s_out) + "," + cell_str(pr.s_n_in) + "," + cell_str(pr.s_n_out) + "\n";
    }
    return out;
}

struct ProfileRow {
    int cell = 0;
    std::size_t size = 0;
    std::optional<double> s_in, s_out, s_n_in, s_n_out;
};

inline std::vector<ProfileRow> parse_profiles_text(const std::string& text) {
    std::vector<ProfileRow> rows;
    bool header_seen = false;
    for_each_line(text, [&](std::string_view line, std::size_t line_no) {
        if (!header_seen) {
            if (line != "cell,size,s_in,s_out,s_n_in,s_n_out")
                throw ValidationError("profiles: bad header at line " + std::to_string(line_no));
            header_seen = true;
            return;
        }
        auto fields = split_csv_line(line);
        if (fields.size() != 6)
            throw ValidationError("profiles: expected 6 fields at line " + std::to_string(line_no));
        ProfileRow r;
        r.cell = parse_int(fields[0], line_no);
        int size = parse_int(fields[1], line_no);
        if (size < 0) throw ValidationError("profiles: negative size at line " + std::to_string(line_no));
        r.size = static_cast<std::size_t>(size);
        auto opt = [&](std::string_view f) -> std::optional<double> {
            if (f.empty()) return std::nullopt;
            return parse_real(f, line_no);
        };
        r.s_in = opt(fields[2]);
        r.s_out = opt(fields[3]);
        r.s_n_in = opt(fields[4]);
        r.s_n_out = opt(fields[5]);
        rows.push_back(r);
    });
    if (!header_seen) throw ValidationError("profiles: empty file");
    return rows;
}

inline std::vector<ProfileRow> parse_profiles(const std::string& path) {
    return parse_profiles_text(read_file(path));
}

}  // namespace alignet

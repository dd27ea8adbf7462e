#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "alignet/aggregate.hpp"
#include "alignet/errors.hpp"
#include "alignet/graph.hpp"
#include "alignet/io.hpp"
#include "alignet/rng.hpp"
#include "alignet/stats.hpp"

namespace alignet {

struct QuantileBand {
    double lo = 0.025;
    double hi = 0.975;
};

inline void validate_band(const QuantileBand& band) {
    if (!(band.lo >= 0.0 && band.lo < band.hi && band.hi <= 1.0))
        throw ArgumentError("quantile band must satisfy 0 <= lo < hi <= 1");
}

struct RandTestResult {
    double observed = 0.0;
    QuantileBand band;
    double quantile_lo = 0.0;
    double quantile_hi = 0.0;
    bool outside_band = false;
    std::size_t iterations = 0;
    std::uint64_t seed = 0;
    std::vector<double> null_samples;  // in iteration order
};

inline const char* verdict(const RandTestResult& r) {
    return r.outside_band ? "outside_band" : "inside_band";
}

// Topology, node set and per-kind counts stay fixed; each edge's
// mean_sentiment is redrawn i.i.d. with replacement from the observed
// edge-sentiment multiset. Draws happen in canonical edge order, so the
// result depends only on the seed.
inline InteractionGraph resample_edge_sentiment(const InteractionGraph& g, std::uint64_t seed) {
    if (g.edges.empty()) throw ArgumentError("resample_edge_sentiment: graph has no edges");
    std::vector<double> pool;
    pool.reserve(g.edges.size());
    for (const auto& [key, d] : g.edges) pool.push_back(d.mean_sentiment);
    auto rng = make_rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    InteractionGraph out = g;
    for (auto& [key, d] : out.edges) d.mean_sentiment = pool[pick(rng)];
    return out;
}

namespace detail {

// Index structure for fast repeated recomputation of s_in/s_out means over
// resampled sentiment vectors. Only users with both an in and an out edge
// participate in the correlation.
struct CorrelationIndex {
    std::vector<double> observed;                    // canonical edge order
    std::vector<std::vector<std::size_t>> in_edges;  // per participating user
    std::vector<std::vector<std::size_t>> out_edges;
};

inline CorrelationIndex build_correlation_index(const InteractionGraph& g) {
    CorrelationIndex ix;
    std::map<std::string, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> per_user;
    std::size_t e = 0;
    for (const auto& [key, d] : g.edges) {
        ix.observed.push_back(d.mean_sentiment);
        per_user[key.first].second.push_back(e);
        per_user[key.second].first.push_back(e);
        ++e;
    }
    for (auto& [user, lists] : per_user) {
        if (lists.first.empty() || lists.second.empty()) continue;
        ix.in_edges.push_back(std::move(lists.first));
        ix.out_edges.push_back(std::move(lists.second));
    }
    return ix;
}

inline double correlation_from(const CorrelationIndex& ix, const std::vector<double>& sentiments,
                               bool zero_on_degenerate) {
    std::vector<double> s_in(ix.in_edges.size()), s_out(ix.in_edges.size());
    for (std::size_t u = 0; u < ix.in_edges.size(); ++u) {
        double a = 0.0;
        for (std::size_t e : ix.in_edges[u]) a += sentiments[e];
        s_in[u] = a / static_cast<double>(ix.in_edges[u].size());
        double b = 0.0;
        for (std::size_t e : ix.out_edges[u]) b += sentiments[e];
        s_out[u] = b / static_cast<double>(ix.out_edges[u].size());
    }
    if (zero_on_degenerate) {
        // A resampled draw can in principle be constant; call that zero
        // correlation rather than aborting the whole test.
        try {
            return pearson(s_in, s_out);
        } catch (const ArgumentError&) {
            return 0.0;
        }
    }
    return pearson(s_in, s_out);
}

inline void finalize_band(RandTestResult& r) {
    std::vector<double> sorted = r.null_samples;
    std::sort(sorted.begin(), sorted.end());
    r.quantile_lo = quantile_sorted(sorted, r.band.lo);
    r.quantile_hi = quantile_sorted(sorted, r.band.hi);
    r.outside_band = r.observed < r.quantile_lo || r.observed > r.quantile_hi;
}

}  // namespace detail

// Null test for the in/out sentiment correlation: the observed Pearson
// correlation of (s_in, s_out) against its distribution over
// sentiment-resampled copies of the graph. Iteration i uses substream
// (seed, i), so results are independent of the execution schedule.
inline RandTestResult correlation_null_test(const InteractionGraph& g, std::size_t iterations,
                                            QuantileBand band, std::uint64_t seed,
                                            unsigned threads = 1) {
    validate_band(band);
    if (iterations == 0) throw ArgumentError("correlation_null_test: iterations must be positive");
    if (g.edges.empty()) throw ArgumentError("correlation_null_test: graph has no edges");
    const auto ix = detail::build_correlation_index(g);
    if (ix.in_edges.size() < 3)
        throw ArgumentError("correlation_null_test: need at least 3 users with both s_in and s_out");

    RandTestResult r;
    r.band = band;
    r.iterations = iterations;
    r.seed = seed;
    r.observed = detail::correlation_from(ix, ix.observed, false);
    r.null_samples.resize(iterations);
    const std::size_t m = ix.observed.size();
    parallel_for(iterations, threads, [&](std::size_t iter) {
        auto rng = make_rng(seed, iter);
        std::uniform_int_distribution<std::size_t> pick(0, m - 1);
        std::vector<double> drawn(m);
        for (std::size_t e = 0; e < m; ++e) drawn[e] = ix.observed[pick(rng)];
        r.null_samples[iter] = detail::correlation_from(ix, drawn, true);
    });
    detail::finalize_band(r);
    return r;
}

// Unordered label pair, stored with the lexicographically smaller label
// first.
using LabelPair = std::pair<std::string, std::string>;

inline LabelPair make_label_pair(const std::string& a, const std::string& b) {
    return a <= b ? LabelPair{a, b} : LabelPair{b, a};
}

using LinkFractions = std::map<LabelPair, double>;

namespace detail {

template <class Graph>
std::vector<std::pair<std::size_t, std::size_t>> indexed_edges(const Graph& g,
                                                               std::vector<std::string>& nodes) {
    nodes.assign(g.nodes.begin(), g.nodes.end());
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < nodes.size(); ++i) index[nodes[i]] = i;
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (const auto& e : edge_pairs(g)) edges.push_back({index.at(e.first), index.at(e.second)});
    return edges;
}

inline std::vector<std::string> node_labels(const std::vector<std::string>& nodes,
                                            const std::map<std::string, std::string>& labels) {
    std::vector<std::string> out;
    out.reserve(nodes.size());
    for (const std::string& n : nodes) {
        auto it = labels.find(n);
        if (it == labels.end()) throw ConsistencyError("link_fractions: node '" + n + "' has no label");
        out.push_back(it->second);
    }
    return out;
}

inline std::vector<LabelPair> pair_universe(const std::vector<std::string>& labels) {
    std::set<std::string> distinct(labels.begin(), labels.end());
    std::vector<std::string> ls(distinct.begin(), distinct.end());
    std::vector<LabelPair> keys;
    for (std::size_t i = 0; i < ls.size(); ++i)
        for (std::size_t j = i; j < ls.size(); ++j) keys.push_back({ls[i], ls[j]});
    return keys;
}

}  // namespace detail

// Fraction of links per unordered endpoint-label pair. With the three
// polarity labels this yields the six f_pp .. f_uu values.
template <class Graph>
LinkFractions link_fractions(const Graph& g, const std::map<std::string, std::string>& labels) {
    std::vector<std::string> nodes;
    const auto edges = detail::indexed_edges(g, nodes);
    if (edges.empty()) throw ArgumentError("link_fractions: graph has no edges");
    const auto node_labels = detail::node_labels(nodes, labels);
    LinkFractions out;
    for (const auto& key : detail::pair_universe(node_labels)) out[key] = 0.0;
    for (const auto& [s, t] : edges) out[make_label_pair(node_labels[s], node_labels[t])] += 1.0;
    for (auto& [key, v] : out) v /= static_cast<double>(edges.size());
    return out;
}

enum class LabelNullMode {
    iid,      // each node's label drawn i.i.d. from the empirical distribution
    permute,  // the exact observed label multiset is shuffled
};

// Per pair type: observed fraction against its label-randomised null
// distribution. Accepts either network.
template <class Graph>
std::map<LabelPair, RandTestResult> label_permutation_test(
    const Graph& g, const std::map<std::string, std::string>& labels, std::size_t iterations,
    QuantileBand band, std::uint64_t seed, LabelNullMode mode = LabelNullMode::iid,
    unsigned threads = 1) {
    validate_band(band);
    if (iterations == 0) throw ArgumentError("label_permutation_test: iterations must be positive");
    std::vector<std::string> nodes;
    const auto edges = detail::indexed_edges(g, nodes);
    if (edges.empty()) throw ArgumentError("label_permutation_test: graph has no edges");
    const auto observed_labels = detail::node_labels(nodes, labels);
    const auto keys = detail::pair_universe(observed_labels);
    std::map<LabelPair, std::size_t> key_index;
    for (std::size_t i = 0; i < keys.size(); ++i) key_index[keys[i]] = i;

    auto fractions_of = [&](const std::vector<std::string>& ls) {
        std::vector<double> f(keys.size(), 0.0);
        for (const auto& [s, t] : edges) f[key_index.at(make_label_pair(ls[s], ls[t]))] += 1.0;
        for (double& v : f) v /= static_cast<double>(edges.size());
        return f;
    };

    const auto observed = fractions_of(observed_labels);
    std::vector<std::vector<double>> samples(iterations);
    parallel_for(iterations, threads, [&](std::size_t iter) {
        auto rng = make_rng(seed, iter);
        std::vector<std::string> drawn;
        if (mode == LabelNullMode::iid) {
            std::uniform_int_distribution<std::size_t> pick(0, observed_labels.size() - 1);
            drawn.reserve(observed_labels.size());
            for (std::size_t i = 0; i < observed_labels.size(); ++i)
                drawn.push_back(observed_labels[pick(rng)]);
        } else {
            drawn = observed_labels;
            std::shuffle(drawn.begin(), drawn.end(), rng);
        }
        samples[iter] = fractions_of(drawn);
    });

    std::map<LabelPair, RandTestResult> out;
    for (std::size_t k = 0; k < keys.size(); ++k) {
        RandTestResult r;
        r.band = band;
        r.iterations = iterations;
        r.seed = seed;
        r.observed = observed[k];
        r.null_samples.resize(iterations);
        for (std::size_t i = 0; i < iterations; ++i) r.null_samples[i] = samples[i][k];
        detail::finalize_band(r);
        out[keys[k]] = std::move(r);
    }
    return out;
}

// Exact expectation of each link fraction under the i.i.d. label null:
// every edge independently sees label x with the empirical probability p_x
// at each endpoint, so E[f_xy] = 2 p_x p_y for x != y and p_x^2 otherwise.
template <class Graph>
LinkFractions expected_null_fractions(const Graph& g, const std::map<std::string, std::string>& labels) {
    std::vector<std::string> nodes;
    const auto edges = detail::indexed_edges(g, nodes);
    if (edges.empty()) throw ArgumentError("expected_null_fractions: graph has no edges");
    const auto observed_labels = detail::node_labels(nodes, labels);
    std::map<std::string, double> p;
    for (const std::string& l : observed_labels) p[l] += 1.0;
    for (auto& [l, v] : p) v /= static_cast<double>(observed_labels.size());
    LinkFractions out;
    for (const auto& key : detail::pair_universe(observed_labels))
        out[key] = key.first == key.second ? p[key.first] * p[key.first]
                                           : 2.0 * p[key.first] * p[key.second];
    return out;
}

inline nlohmann::ordered_json rand_test_json(const std::string& test, const RandTestResult& r) {
    nlohmann::ordered_json j;
    j["test"] = test;
    j["observed"] = r.observed;
    j["band"] = {r.band.lo, r.band.hi};
    j["quantiles"] = {r.quantile_lo, r.quantile_hi};
    j["verdict"] = verdict(r);
    j["iterations"] = r.iterations;
    j["seed"] = r.seed;
    return j;
}

inline std::string serialize_null_samples(const RandTestResult& r) {
    std::string out = "iteration,value\n";
    for (std::size_t i = 0; i < r.null_samples.size(); ++i)
        out += std::to_string(i) + "," + format_double(r.null_samples[i]) + "\n";
    return out;
}

}  // namespace alignet

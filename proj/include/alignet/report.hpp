#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "alignet/corpus.hpp"
#include "alignet/errors.hpp"
#include "alignet/graph.hpp"
#include "alignet/io.hpp"
#include "alignet/kmeans.hpp"
#include "alignet/rng.hpp"
#include "alignet/sentiment.hpp"
#include "alignet/stats.hpp"

namespace alignet {

inline std::map<std::string, int> cluster_index(const std::vector<CommunityCluster>& clusters) {
    std::map<std::string, int> out;
    for (const auto& c : clusters)
        for (const auto& u : c.members) out[u] = c.index;
    return out;
}

// Per source cluster, the fraction of its out-links landing in each target
// cluster. Every (from, to) pair over clusters with outgoing links is
// present, zero cells included, so each row sums to 1.
template <class Graph>
std::map<std::pair<int, int>, double> cluster_link_fractions(const Graph& g,
                                                             const std::map<std::string, int>& clusters) {
    std::map<int, std::size_t> out_total;
    std::map<std::pair<int, int>, std::size_t> counts;
    auto cluster_of = [&](const std::string& u) {
        auto it = clusters.find(u);
        if (it == clusters.end())
            throw ConsistencyError("cluster_link_fractions: node '" + u + "' not clustered");
        return it->second;
    };
    for (const auto& e : edge_pairs(g)) {
        int from = cluster_of(e.first), to = cluster_of(e.second);
        counts[{from, to}] += 1;
        out_total[from] += 1;
    }
    std::set<int> all;
    for (const auto& [u, c] : clusters) all.insert(c);
    std::map<std::pair<int, int>, double> fractions;
    for (const auto& [from, total] : out_total)
        for (int to : all)
            fractions[{from, to}] =
                static_cast<double>(counts.count({from, to}) ? counts[{from, to}] : 0) /
                static_cast<double>(total);
    return fractions;
}

inline std::string serialize_link_fractions(const std::map<std::pair<int, int>, double>& fractions) {
    std::string out = "from,to,fraction\n";
    for (const auto& [key, f] : fractions)
        out += std::to_string(key.first) + "," + std::to_string(key.second) + "," + format_double(f) + "\n";
    return out;
}

namespace detail {

// One clustered mention interaction: the message's author and its primary
// target (first mentioned user other than the author).
struct MentionRecord {
    int from = 0;
    int to = 0;
    Kind kind = Kind::original;
    const Message* msg = nullptr;
};

struct MentionWalk {
    std::vector<MentionRecord> records;
    std::size_t skipped_unclustered = 0;  // mention messages whose author or target lacks a cluster
};

inline MentionWalk walk_mentions(const Corpus& corpus, const std::map<std::string, int>& clusters) {
    MentionWalk w;
    for (const auto& m : corpus.messages) {
        std::string target;
        for (const auto& t : m.mentions)
            if (t != m.author) {
                target = t;
                break;
            }
        if (target.empty()) continue;
        auto fa = clusters.find(m.author);
        auto ft = clusters.find(target);
        if (fa == clusters.end() || ft == clusters.end()) {
            w.skipped_unclustered += 1;
            continue;
        }
        w.records.push_back({fa->second, ft->second, m.kind, &m});
    }
    return w;
}

}  // namespace detail

struct InteractionCell {
    std::size_t n_original = 0;
    std::size_t n_reply = 0;
    std::size_t n_retweet = 0;

    std::size_t total() const { return n_original + n_reply + n_retweet; }
    std::size_t of(Kind k) const {
        switch (k) {
            case Kind::original: return n_original;
            case Kind::reply: return n_reply;
            default: return n_retweet;
        }
    }
};

// Mention-message counts by (source cluster, target cluster, kind), over
// messages rather than collapsed edges. Proportions are per source cluster.
struct MentionTypeTable {
    std::map<std::pair<int, int>, InteractionCell> cells;
    std::map<int, std::size_t> source_totals;
    std::size_t skipped_unclustered = 0;

    double proportion(int from, int to, Kind kind) const {
        auto it = cells.find({from, to});
        if (it == cells.end()) return 0.0;
        auto st = source_totals.find(from);
        if (st == source_totals.end() || st->second == 0) return 0.0;
        return static_cast<double>(it->second.of(kind)) / static_cast<double>(st->second);
    }
};

inline MentionTypeTable mention_type_table(const Corpus& corpus,
                                           const std::map<std::string, int>& clusters) {
    auto walk = detail::walk_mentions(corpus, clusters);
    MentionTypeTable t;
    t.skipped_unclustered = walk.skipped_unclustered;
    for (const auto& r : walk.records) {
        auto& cell = t.cells[{r.from, r.to}];
        switch (r.kind) {
            case Kind::original: cell.n_original += 1; break;
            case Kind::reply: cell.n_reply += 1; break;
            case Kind::retweet: cell.n_retweet += 1; break;
        }
        t.source_totals[r.from] += 1;
    }
    return t;
}

inline std::string serialize_mention_table(const MentionTypeTable& t) {
    std::string out = "from,to,kind,count,proportion\n";
    for (const auto& [key, cell] : t.cells) {
        for (Kind kind : {Kind::original, Kind::reply, Kind::retweet}) {
            out += std::to_string(key.first) + "," + std::to_string(key.second) + "," +
                   std::string(to_string(kind)) + "," + std::to_string(cell.of(kind)) + "," +
                   format_double(t.proportion(key.first, key.second, kind)) + "\n";
        }
    }
    return out;
}

struct CoverageCell {
    std::size_t connected = 0;
    std::size_t total = 0;

    double fraction() const { return static_cast<double>(connected) / static_cast<double>(total); }
};

using CoverageTable = std::map<std::tuple<int, int, Kind>, CoverageCell>;

// Fraction of mention messages per (from, to, kind) whose author and target
// are linked in the follower network. Default counts a link in either
// direction; directed_only restricts to author -> target.
inline CoverageTable follower_coverage(const Corpus& corpus, const std::map<std::string, int>& clusters,
                                       const FollowerGraph& followers, bool directed_only = false) {
    auto walk = detail::walk_mentions(corpus, clusters);
    CoverageTable t;
    for (const auto& r : walk.records) {
        auto& cell = t[{r.from, r.to, r.kind}];
        cell.total += 1;
        std::string target;
        for (const auto& m : r.msg->mentions)
            if (m != r.msg->author) {
                target = m;
                break;
            }
        bool fwd = followers.edges.count({r.msg->author, target}) > 0;
        bool rev = followers.edges.count({target, r.msg->author}) > 0;
        if (fwd || (!directed_only && rev)) cell.connected += 1;
    }
    return t;
}

inline std::string serialize_coverage(const CoverageTable& t) {
    std::string out = "from,to,kind,connected,total,fraction\n";
    for (const auto& [key, cell] : t) {
        out += std::to_string(std::get<0>(key)) + "," + std::to_string(std::get<1>(key)) + "," +
               std::string(to_string(std::get<2>(key))) + "," + std::to_string(cell.connected) + "," +
               std::to_string(cell.total) + "," + format_double(cell.fraction()) + "\n";
    }
    return out;
}

// Five-number summary + mean of edge sentiments grouped by (source cluster,
// target cluster). Pairs with no edges are absent.
inline std::map<std::pair<int, int>, FiveNumberSummary> cluster_sentiment_stats(
    const InteractionGraph& g, const std::map<std::string, int>& clusters) {
    std::map<std::pair<int, int>, std::vector<double>> groups;
    for (const auto& [key, d] : g.edges) {
        auto fa = clusters.find(key.first);
        auto fb = clusters.find(key.second);
        if (fa == clusters.end())
            throw ConsistencyError("cluster_sentiment_stats: node '" + key.first + "' not clustered");
        if (fb == clusters.end())
            throw ConsistencyError("cluster_sentiment_stats: node '" + key.second + "' not clustered");
        groups[{fa->second, fb->second}].push_back(d.mean_sentiment);
    }
    std::map<std::pair<int, int>, FiveNumberSummary> out;
    for (auto& [key, vals] : groups) out[key] = five_number_summary(vals);
    return out;
}

inline std::string serialize_sentiment_stats(
    const std::map<std::pair<int, int>, FiveNumberSummary>& stats) {
    std::string out = "from,to,min,q1,median,q3,max,mean\n";
    for (const auto& [key, s] : stats) {
        out += std::to_string(key.first) + "," + std::to_string(key.second) + "," +
               format_double(s.min) + "," + format_double(s.q1) + "," + format_double(s.median) +
               "," + format_double(s.q3) + "," + format_double(s.max) + "," + format_double(s.mean) +
               "\n";
    }
    return out;
}

// UTC day index of a timestamp; intervals are half-open, so a message at
// exactly midnight belongs to the later day.
inline std::int64_t day_of(std::int64_t ts) {
    std::int64_t d = ts / 86400;
    if (ts % 86400 < 0) d -= 1;
    return d;
}

struct ActivityPoint {
    int cluster = 0;
    std::int64_t day = 0;
    std::size_t messages = 0;
    double tweets_per_user = 0.0;
    std::optional<double> mean_sentiment;
};

// Daily activity per cluster over the corpus day span: messages per member
// per day, and the mean difference score of those messages. Days without
// messages stay in the series with zero activity and undefined sentiment.
inline std::vector<ActivityPoint> activity_timeseries(const Corpus& corpus,
                                                      const std::map<std::string, SentimentScore>& scores,
                                                      const std::map<std::string, int>& clusters) {
    std::map<int, std::size_t> sizes;
    for (const auto& [u, c] : clusters) sizes[c] += 1;
    if (corpus.messages.empty() || sizes.empty()) return {};
    std::int64_t day_min = day_of(corpus.messages.front().ts);
    std::int64_t day_max = day_min;
    for (const auto& m : corpus.messages) {
        day_min = std::min(day_min, day_of(m.ts));
        day_max = std::max(day_max, day_of(m.ts));
    }
    std::map<std::pair<int, std::int64_t>, std::pair<std::size_t, double>> acc;
    for (const auto& m : corpus.messages) {
        auto fc = clusters.find(m.author);
        if (fc == clusters.end()) continue;
        auto fs = scores.find(m.id);
        if (fs == scores.end())
            throw ConsistencyError("activity_timeseries: no score for message '" + m.id + "'");
        auto& a = acc[{fc->second, day_of(m.ts)}];
        a.first += 1;
        a.second += fs->second.difference();
    }
    std::vector<ActivityPoint> out;
    for (const auto& [c, size] : sizes) {
        for (std::int64_t d = day_min; d <= day_max; ++d) {
            ActivityPoint p;
            p.cluster = c;
            p.day = d;
            auto it = acc.find({c, d});
            if (it != acc.end()) {
                p.messages = it->second.first;
                p.mean_sentiment = it->second.second / static_cast<double>(it->second.first);
            }
            p.tweets_per_user = static_cast<double>(p.messages) / static_cast<double>(size);
            out.push_back(p);
        }
    }
    return out;
}

inline std::string serialize_activity(const std::vector<ActivityPoint>& points) {
    std::string out = "cluster,day,messages,tweets_per_user,mean_sentiment\n";
    for (const auto& p : points) {
        out += std::to_string(p.cluster) + "," + std::to_string(p.day) + "," +
               std::to_string(p.messages) + "," + format_double(p.tweets_per_user) + "," +
               (p.mean_sentiment ? format_double(*p.mean_sentiment) : std::string()) + "\n";
    }
    return out;
}

// Long-form series (series,x,y) backing the activity plots.
inline std::string serialize_activity_tidy(const std::vector<ActivityPoint>& points) {
    std::string out = "series,x,y\n";
    for (const auto& p : points)
        out += "cluster" + std::to_string(p.cluster) + "_tweets_per_user," + std::to_string(p.day) +
               "," + format_double(p.tweets_per_user) + "\n";
    for (const auto& p : points)
        if (p.mean_sentiment)
            out += "cluster" + std::to_string(p.cluster) + "_mean_sentiment," + std::to_string(p.day) +
                   "," + format_double(*p.mean_sentiment) + "\n";
    return out;
}

enum class Annotation { yes, no, unaligned };

inline const char* to_string(Annotation a) {
    switch (a) {
        case Annotation::yes: return "yes";
        case Annotation::no: return "no";
        default: return "unaligned";
    }
}

inline std::map<std::string, Annotation> parse_annotations_text(const std::string& text) {
    std::map<std::string, Annotation> out;
    bool header_seen = false;
    for_each_line(text, [&](std::string_view line, std::size_t line_no) {
        if (!header_seen) {
            if (line != "user,label")
                throw ValidationError("annotations: bad header at line " + std::to_string(line_no));
            header_seen = true;
            return;
        }
        auto fields = split_csv_line(line);
        if (fields.size() != 2)
            throw ValidationError("annotations: expected 2 fields at line " + std::to_string(line_no));
        Annotation a;
        if (fields[1] == "yes")
            a = Annotation::yes;
        else if (fields[1] == "no")
            a = Annotation::no;
        else if (fields[1] == "unaligned")
            a = Annotation::unaligned;
        else
            throw ValidationError("annotations: unknown label at line " + std::to_string(line_no));
        out[std::string(fields[0])] = a;
    });
    if (!header_seen) throw ValidationError("annotations: empty file");
    return out;
}

inline std::map<std::string, Annotation> parse_annotations(const std::string& path) {
    return parse_annotations_text(read_file(path));
}

inline std::string serialize_annotations(const std::map<std::string, Annotation>& annotations) {
    std::string out = "user,label\n";
    for (const auto& [u, a] : annotations) out += u + "," + std::string(to_string(a)) + "\n";
    return out;
}

struct ConfusionMatrix {
    std::map<std::pair<std::string, std::string>, std::size_t> counts;  // (predicted, actual)

    std::size_t total() const {
        std::size_t t = 0;
        for (const auto& [key, n] : counts) t += n;
        return t;
    }
    std::size_t actual_total(const std::string& label) const {
        std::size_t t = 0;
        for (const auto& [key, n] : counts)
            if (key.second == label) t += n;
        return t;
    }
};

// Ratio of correctly predicted users over all annotated users in labeled
// clusters (unaligned annotations stay in the denominator).
inline double overall_accuracy(const ConfusionMatrix& cm) {
    std::size_t total = cm.total();
    if (total == 0) throw ArgumentError("overall_accuracy: empty confusion matrix");
    std::size_t diag = 0;
    for (const char* l : {"yes", "no"}) {
        auto it = cm.counts.find({l, l});
        if (it != cm.counts.end()) diag += it->second;
    }
    return static_cast<double>(diag) / static_cast<double>(total);
}

// Mean per-class recall over the yes/no classes.
inline double balanced_accuracy(const ConfusionMatrix& cm) {
    double sum = 0.0;
    std::size_t classes = 0;
    for (const char* l : {"yes", "no"}) {
        std::size_t actual = cm.actual_total(l);
        if (actual == 0) continue;
        auto it = cm.counts.find({l, l});
        std::size_t hit = it == cm.counts.end() ? 0 : it->second;
        sum += static_cast<double>(hit) / static_cast<double>(actual);
        classes += 1;
    }
    if (classes == 0) throw ArgumentError("balanced_accuracy: no yes/no annotations");
    return sum / static_cast<double>(classes);
}

struct ClusterComposition {
    int cluster = 0;
    std::size_t yes = 0;
    std::size_t no = 0;
    std::size_t unaligned = 0;
    std::string label;  // "yes", "no" or "unknown"

    std::size_t annotated() const { return yes + no + unaligned; }
};

// Mean over labeled clusters of (majority-class count / annotated users in
// the cluster); the per-cluster accuracy variant.
inline double per_cluster_accuracy(const std::vector<ClusterComposition>& composition) {
    double sum = 0.0;
    std::size_t labeled = 0;
    for (const auto& c : composition) {
        if (c.label == "yes")
            sum += static_cast<double>(c.yes) / static_cast<double>(c.annotated());
        else if (c.label == "no")
            sum += static_cast<double>(c.no) / static_cast<double>(c.annotated());
        else
            continue;
        labeled += 1;
    }
    if (labeled == 0) throw ArgumentError("per_cluster_accuracy: no labeled clusters");
    return sum / static_cast<double>(labeled);
}

struct EvaluationResult {
    std::vector<ClusterComposition> composition;
    ConfusionMatrix confusion;
    double overall = 0.0;
    double balanced = 0.0;
    double per_cluster = 0.0;
    std::size_t excluded_users = 0;  // annotated users in unknown-label clusters
    std::vector<std::string> warnings;
};

// Clusters take the majority label of their yes/no annotations; each user's
// prediction is its cluster's label. A cluster with no yes/no majority
// (none, or a tie) is labeled unknown and its users are excluded.
inline EvaluationResult evaluate_alignment(const std::map<std::string, Annotation>& annotations,
                                           const std::map<std::string, int>& clusters) {
    if (annotations.empty()) throw ArgumentError("evaluate_alignment: no annotations");
    std::map<int, ClusterComposition> comps;
    for (const auto& [user, a] : annotations) {
        auto it = clusters.find(user);
        if (it == clusters.end())
            throw ConsistencyError("evaluate_alignment: annotated user '" + user + "' not clustered");
        auto& c = comps[it->second];
        c.cluster = it->second;
        switch (a) {
            case Annotation::yes: c.yes += 1; break;
            case Annotation::no: c.no += 1; break;
            case Annotation::unaligned: c.unaligned += 1; break;
        }
    }
    EvaluationResult r;
    std::map<int, std::string> labels;
    for (auto& [ci, c] : comps) {
        if (c.yes > c.no)
            c.label = "yes";
        else if (c.no > c.yes)
            c.label = "no";
        else {
            c.label = "unknown";
            r.warnings.push_back("cluster " + std::to_string(ci) +
                                 " has no yes/no majority; its users are excluded");
            r.excluded_users += c.annotated();
        }
        labels[ci] = c.label;
        r.composition.push_back(c);
    }
    for (const auto& [user, a] : annotations) {
        const std::string& pred = labels.at(clusters.at(user));
        if (pred == "unknown") continue;
        r.confusion.counts[{pred, to_string(a)}] += 1;
    }
    if (r.confusion.total() == 0)
        throw ValidationError("evaluate_alignment: every cluster lacks a yes/no majority");
    r.overall = overall_accuracy(r.confusion);
    r.balanced = balanced_accuracy(r.confusion);
    r.per_cluster = per_cluster_accuracy(r.composition);
    return r;
}

inline std::string serialize_confusion(const ConfusionMatrix& cm) {
    std::string out = "predicted,actual,count\n";
    for (const auto& [key, n] : cm.counts)
        out += key.first + "," + key.second + "," + std::to_string(n) + "\n";
    return out;
}

inline std::string serialize_composition(const std::vector<ClusterComposition>& comps) {
    std::string out = "cluster,yes,no,unaligned,label\n";
    for (const auto& c : comps)
        out += std::to_string(c.cluster) + "," + std::to_string(c.yes) + "," + std::to_string(c.no) +
               "," + std::to_string(c.unaligned) + "," + c.label + "\n";
    return out;
}

// Seeded stratified sampler: from each cluster, ceil(fraction * size)
// members drawn without replacement. Supports the annotation workflow; the
// labels themselves come from humans.
inline std::set<std::string> sample_annotation_candidates(const std::vector<CommunityCluster>& clusters,
                                                          double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw ArgumentError("sample_annotation_candidates: fraction must be in (0, 1]");
    std::set<std::string> out;
    for (std::size_t ci = 0; ci < clusters.size(); ++ci) {
        std::vector<std::string> members(clusters[ci].members.begin(), clusters[ci].members.end());
        auto rng = make_rng(seed, ci);
        std::shuffle(members.begin(), members.end(), rng);
        std::size_t k = static_cast<std::size_t>(
            std::ceil(fraction * static_cast<double>(members.size()) - 1e-12));
        k = std::min(k, members.size());
        for (std::size_t i = 0; i < k; ++i) out.insert(members[i]);
    }
    return out;
}

}  // namespace alignet

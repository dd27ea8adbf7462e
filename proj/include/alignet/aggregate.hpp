#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "alignet/errors.hpp"
#include "alignet/graph.hpp"
#include "alignet/io.hpp"
#include "alignet/stats.hpp"

namespace alignet {

// Per-user aggregates. s_in / s_out average the mean sentiments of the
// user's in / out edges; s_n_in / s_n_out average the defined s_in / s_out
// of the user's neighbours. Any of them is undefined when no value
// contributes.
struct UserSentiment {
    std::optional<double> s_in;
    std::optional<double> s_out;
    std::optional<double> s_n_in;
    std::optional<double> s_n_out;
};

enum class Component { s_in, s_out, s_n_in, s_n_out };

inline const std::optional<double>& component_of(const UserSentiment& u, Component c) {
    switch (c) {
        case Component::s_in: return u.s_in;
        case Component::s_out: return u.s_out;
        case Component::s_n_in: return u.s_n_in;
        default: return u.s_n_out;
    }
}

// Which nodes count as neighbours when averaging neighbour aggregates.
enum class NeighbourSet { union_in_out, out_only };

// First pass: s_in / s_out from incident edges.
inline std::map<std::string, UserSentiment> user_sentiment(const InteractionGraph& g) {
    std::map<std::string, UserSentiment> agg;
    std::map<std::string, std::pair<double, int>> in_acc, out_acc;
    for (const std::string& n : g.nodes) agg[n];
    for (const auto& [key, d] : g.edges) {
        auto& o = out_acc[key.first];
        o.first += d.mean_sentiment;
        o.second += 1;
        auto& i = in_acc[key.second];
        i.first += d.mean_sentiment;
        i.second += 1;
    }
    for (auto& [user, u] : agg) {
        auto i = in_acc.find(user);
        if (i != in_acc.end()) u.s_in = i->second.first / i->second.second;
        auto o = out_acc.find(user);
        if (o != out_acc.end()) u.s_out = o->second.first / o->second.second;
    }
    return agg;
}

// Second pass: neighbour means over the chosen neighbour set (the node
// itself never contributes); undefined neighbour values are skipped.
inline void neighbour_sentiment(const InteractionGraph& g, std::map<std::string, UserSentiment>& agg,
                                NeighbourSet nbrs = NeighbourSet::union_in_out) {
    std::map<std::string, std::set<std::string>> adjacency;
    for (const std::string& n : g.nodes) adjacency[n];
    for (const auto& [key, d] : g.edges) {
        adjacency[key.first].insert(key.second);
        if (nbrs == NeighbourSet::union_in_out) adjacency[key.second].insert(key.first);
    }
    for (auto& [user, u] : agg) {
        double sum_in = 0.0, sum_out = 0.0;
        int n_in = 0, n_out = 0;
        for (const std::string& v : adjacency[user]) {
            auto it = agg.find(v);
            if (it == agg.end()) continue;
            if (it->second.s_in) {
                sum_in += *it->second.s_in;
                ++n_in;
            }
            if (it->second.s_out) {
                sum_out += *it->second.s_out;
                ++n_out;
            }
        }
        if (n_in > 0) u.s_n_in = sum_in / n_in;
        if (n_out > 0) u.s_n_out = sum_out / n_out;
    }
}

inline std::map<std::string, UserSentiment> compute_aggregates(
    const InteractionGraph& g, NeighbourSet nbrs = NeighbourSet::union_in_out) {
    auto agg = user_sentiment(g);
    neighbour_sentiment(g, agg, nbrs);
    return agg;
}

enum class Polarity { positive, negative, unknown };

inline const char* to_string(Polarity p) {
    switch (p) {
        case Polarity::positive: return "positive";
        case Polarity::negative: return "negative";
        default: return "unknown";
    }
}

// Sign of the chosen component; zero or undefined map to unknown.
inline Polarity classify_polarity(const std::optional<double>& value) {
    if (!value || *value == 0.0) return Polarity::unknown;
    return *value > 0.0 ? Polarity::positive : Polarity::negative;
}

inline std::map<std::string, std::string> polarity_labels(
    const std::map<std::string, UserSentiment>& agg, Component component = Component::s_out) {
    std::map<std::string, std::string> labels;
    for (const auto& [user, u] : agg)
        labels[user] = to_string(classify_polarity(component_of(u, component)));
    return labels;
}

enum class GroupScheme { sign, mean_split, median_split, quartiles };

inline GroupScheme group_scheme_from_string(const std::string& s) {
    if (s == "sign") return GroupScheme::sign;
    if (s == "mean_split") return GroupScheme::mean_split;
    if (s == "median_split") return GroupScheme::median_split;
    if (s == "quartiles") return GroupScheme::quartiles;
    throw ArgumentError("unknown grouping scheme '" + s + "'");
}

// Splits users on the chosen component. The sign scheme labels every user
// (undefined -> unknown); threshold schemes exclude users with an undefined
// component and tie values go to the lower group.
inline std::map<std::string, std::string> group_users(const std::map<std::string, UserSentiment>& agg,
                                                      GroupScheme scheme,
                                                      Component component = Component::s_out) {
    if (agg.empty()) throw ArgumentError("group_users: empty aggregate map");
    std::map<std::string, std::string> labels;
    if (scheme == GroupScheme::sign) {
        return polarity_labels(agg, component);
    }
    std::vector<double> defined;
    for (const auto& [user, u] : agg)
        if (const auto& v = component_of(u, component)) defined.push_back(*v);
    if (defined.empty()) throw ArgumentError("group_users: no user has a defined value");

    if (scheme == GroupScheme::mean_split || scheme == GroupScheme::median_split) {
        const double cut =
            scheme == GroupScheme::mean_split ? mean(defined) : quantile(defined, 0.5);
        for (const auto& [user, u] : agg) {
            const auto& v = component_of(u, component);
            if (!v) continue;
            labels[user] = *v < cut ? "below" : "above_or_equal";
        }
        return labels;
    }

    const double q1 = quantile(defined, 0.25);
    const double q2 = quantile(defined, 0.5);
    const double q3 = quantile(defined, 0.75);
    for (const auto& [user, u] : agg) {
        const auto& v = component_of(u, component);
        if (!v) continue;
        if (*v <= q1) labels[user] = "q1";
        else if (*v <= q2) labels[user] = "q2";
        else if (*v <= q3) labels[user] = "q3";
        else labels[user] = "q4";
    }
    return labels;
}

inline std::string serialize_aggregates(const std::map<std::string, UserSentiment>& agg,
                                        const std::map<std::string, std::string>& labels) {
    std::string out = "user,s_in,s_out,s_n_in,s_n_out,label\n";
    auto cell = [](const std::optional<double>& v) {
        return v ? format_double(*v) : std::string();
    };
    for (const auto& [user, u] : agg) {
        auto l = labels.find(user);
        out += csv_escape(user) + "," + cell(u.s_in) + "," + cell(u.s_out) + "," + cell(u.s_n_in) +
               "," + cell(u.s_n_out) + "," + (l == labels.end() ? std::string() : l->second) + "\n";
    }
    return out;
}

struct AggregateTable {
    std::map<std::string, UserSentiment> aggregates;
    std::map<std::string, std::string> labels;
};

inline AggregateTable parse_aggregates_text(const std::string& csv) {
    AggregateTable t;
    bool header = false;
    for_each_line(csv, [&](const std::string& line, std::size_t line_no) {
        if (!header) {
            header = true;
            return;
        }
        auto f = split_csv_line(line);
        if (f.size() != 6)
            throw ValidationError("aggregates: malformed row at line " + std::to_string(line_no));
        UserSentiment u;
        auto cell = [&](const std::string& s) -> std::optional<double> {
            if (s.empty()) return std::nullopt;
            return parse_real(s, line_no);
        };
        u.s_in = cell(f[1]);
        u.s_out = cell(f[2]);
        u.s_n_in = cell(f[3]);
        u.s_n_out = cell(f[4]);
        t.aggregates[f[0]] = u;
        if (!f[5].empty()) t.labels[f[0]] = f[5];
    });
    return t;
}

inline AggregateTable parse_aggregates(const std::string& path) {
    return parse_aggregates_text(read_file(path));
}

}  // namespace alignet

#pragma once

#include <algorithm>
#include <map>
#include <queue>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "alignet/corpus.hpp"
#include "alignet/errors.hpp"
#include "alignet/io.hpp"
#include "alignet/sentiment.hpp"

namespace alignet {

struct EdgeData {
    double mean_sentiment = 0.0;  // arithmetic mean of message difference scores, in [-4,4]
    int n_original = 0;
    int n_reply = 0;
    int n_retweet = 0;
    int total() const { return n_original + n_reply + n_retweet; }
};

inline bool operator==(const EdgeData& a, const EdgeData& b) {
    return a.mean_sentiment == b.mean_sentiment && a.n_original == b.n_original &&
           a.n_reply == b.n_reply && a.n_retweet == b.n_retweet;
}

// Directed, weighted: one edge per ordered (author, mentioned) pair.
struct InteractionGraph {
    std::set<std::string> nodes;
    std::map<std::pair<std::string, std::string>, EdgeData> edges;
};

// Directed, unweighted: follower -> followee.
struct FollowerGraph {
    std::set<std::string> nodes;
    std::set<std::pair<std::string, std::string>> edges;
};

inline std::vector<std::pair<std::string, std::string>> edge_pairs(const InteractionGraph& g) {
    std::vector<std::pair<std::string, std::string>> out;
    out.reserve(g.edges.size());
    for (const auto& [key, data] : g.edges) out.push_back(key);
    return out;
}

inline std::vector<std::pair<std::string, std::string>> edge_pairs(const FollowerGraph& g) {
    return {g.edges.begin(), g.edges.end()};
}

// One directed edge per (author, mentioned) pair over the whole corpus;
// self-mentions are dropped. Every message id must have a score.
inline InteractionGraph build_mention_graph(const Corpus& corpus,
                                            const std::map<std::string, SentimentScore>& scores) {
    struct Accum {
        double sum = 0.0;
        int n_original = 0, n_reply = 0, n_retweet = 0;
    };
    std::map<std::pair<std::string, std::string>, Accum> acc;
    for (const Message& m : corpus.messages) {
        auto s = scores.find(m.id);
        if (s == scores.end()) throw ConsistencyError("no score for message '" + m.id + "'");
        const int diff = s->second.difference();
        for (const std::string& target : m.mentions) {
            if (target == m.author) continue;
            Accum& a = acc[{m.author, target}];
            a.sum += diff;
            switch (m.kind) {
                case Kind::original: ++a.n_original; break;
                case Kind::reply: ++a.n_reply; break;
                case Kind::retweet: ++a.n_retweet; break;
            }
        }
    }
    InteractionGraph g;
    for (const auto& [key, a] : acc) {
        const int total = a.n_original + a.n_reply + a.n_retweet;
        g.edges[key] = EdgeData{a.sum / total, a.n_original, a.n_reply, a.n_retweet};
        g.nodes.insert(key.first);
        g.nodes.insert(key.second);
    }
    return g;
}

inline FollowerGraph build_follower_graph(const FollowerEdgeList& list) {
    FollowerGraph g;
    for (const auto& e : list.edges) {
        g.edges.insert(e);
        g.nodes.insert(e.first);
        g.nodes.insert(e.second);
    }
    return g;
}

// Keeps only edges whose reverse edge exists; nodes with no remaining edge
// are dropped. Idempotent.
inline InteractionGraph reciprocal_subgraph(const InteractionGraph& g) {
    InteractionGraph out;
    for (const auto& [key, data] : g.edges) {
        if (g.edges.count({key.second, key.first})) {
            out.edges[key] = data;
            out.nodes.insert(key.first);
            out.nodes.insert(key.second);
        }
    }
    return out;
}

inline FollowerGraph reciprocal_subgraph(const FollowerGraph& g) {
    FollowerGraph out;
    for (const auto& e : g.edges) {
        if (g.edges.count({e.second, e.first})) {
            out.edges.insert(e);
            out.nodes.insert(e.first);
            out.nodes.insert(e.second);
        }
    }
    return out;
}

namespace detail {

// Weakly connected components over any directed edge set; returns the node
// set of the largest one, ties broken by smallest lexicographic minimum
// member.
inline std::set<std::string> largest_component_nodes(
    const std::set<std::string>& nodes,
    const std::vector<std::pair<std::string, std::string>>& edges) {
    std::map<std::string, std::vector<const std::string*>> adj;
    for (const auto& e : edges) {
        auto a = adj.try_emplace(e.first).first;
        auto b = adj.try_emplace(e.second).first;
        a->second.push_back(&b->first);
        b->second.push_back(&a->first);
    }
    std::set<std::string> best;
    std::set<std::string> visited;
    for (const std::string& start : nodes) {
        if (visited.count(start)) continue;
        std::set<std::string> comp;
        std::queue<std::string> q;
        q.push(start);
        visited.insert(start);
        comp.insert(start);
        while (!q.empty()) {
            std::string u = q.front();
            q.pop();
            auto it = adj.find(u);
            if (it == adj.end()) continue;
            for (const std::string* v : it->second) {
                if (visited.insert(*v).second) {
                    comp.insert(*v);
                    q.push(*v);
                }
            }
        }
        // Components are discovered in order of their minimum node id, so a
        // strict size comparison implements the documented tie-break.
        if (comp.size() > best.size()) best = std::move(comp);
    }
    return best;
}

}  // namespace detail

// Restriction to a node subset: keeps listed nodes and edges with both
// endpoints inside.
inline InteractionGraph restrict_graph(const InteractionGraph& g, const std::set<std::string>& keep) {
    InteractionGraph out;
    for (const std::string& n : g.nodes)
        if (keep.count(n)) out.nodes.insert(n);
    for (const auto& [key, data] : g.edges)
        if (keep.count(key.first) && keep.count(key.second)) out.edges[key] = data;
    return out;
}

inline FollowerGraph restrict_graph(const FollowerGraph& g, const std::set<std::string>& keep) {
    FollowerGraph out;
    for (const std::string& n : g.nodes)
        if (keep.count(n)) out.nodes.insert(n);
    for (const auto& e : g.edges)
        if (keep.count(e.first) && keep.count(e.second)) out.edges.insert(e);
    return out;
}

template <class Graph>
Graph largest_connected_component(const Graph& g) {
    return restrict_graph(g, detail::largest_component_nodes(g.nodes, edge_pairs(g)));
}

// Node-set alignment: intersect the LCCs of the two (already reciprocal)
// graphs and restrict both to that common node set.
inline std::pair<InteractionGraph, FollowerGraph> align_networks(const InteractionGraph& mention_recip,
                                                                 const FollowerGraph& follower_recip) {
    const auto mention_lcc = detail::largest_component_nodes(mention_recip.nodes, edge_pairs(mention_recip));
    const auto follower_lcc =
        detail::largest_component_nodes(follower_recip.nodes, edge_pairs(follower_recip));
    std::set<std::string> common;
    std::set_intersection(mention_lcc.begin(), mention_lcc.end(), follower_lcc.begin(),
                          follower_lcc.end(), std::inserter(common, common.begin()));
    if (common.empty())
        throw ValidationError("align_networks: the two largest components share no users");
    return {restrict_graph(mention_recip, common), restrict_graph(follower_recip, common)};
}

struct GraphStats {
    std::size_t nodes = 0;
    std::size_t links = 0;             // directed edges
    std::size_t reciprocal_links = 0;  // directed edges whose reverse exists
    double avg_out_degree = 0.0;       // links / nodes
    double transitivity = 0.0;         // 3 * triangles / connected triples
    std::size_t triangles = 0;
    std::size_t connected_triples = 0;
};

// Reciprocity and transitivity are computed on the undirected simple
// projection of the directed edge set.
template <class Graph>
GraphStats summary_stats(const Graph& g) {
    GraphStats s;
    s.nodes = g.nodes.size();
    const auto edges = edge_pairs(g);
    s.links = edges.size();
    std::set<std::pair<std::string, std::string>> directed(edges.begin(), edges.end());
    std::map<std::string, std::set<std::string>> undirected;
    for (const auto& e : edges) {
        if (directed.count({e.second, e.first})) ++s.reciprocal_links;
        undirected[e.first].insert(e.second);
        undirected[e.second].insert(e.first);
    }
    if (s.nodes > 0) s.avg_out_degree = static_cast<double>(s.links) / static_cast<double>(s.nodes);
    for (const auto& [node, nbrs] : undirected) {
        const std::size_t d = nbrs.size();
        s.connected_triples += d * (d - 1) / 2;
    }
    for (const auto& [u, nbrs] : undirected) {
        for (const std::string& v : nbrs) {
            if (v <= u) continue;
            const auto& nv = undirected[v];
            for (const std::string& w : nbrs) {
                if (w <= v) continue;
                if (nv.count(w)) ++s.triangles;
            }
        }
    }
    if (s.connected_triples > 0)
        s.transitivity =
            3.0 * static_cast<double>(s.triangles) / static_cast<double>(s.connected_triples);
    return s;
}

inline std::string serialize_mention_graph(const InteractionGraph& g) {
    std::string out = "source,target,mean_sentiment,n_original,n_reply,n_retweet\n";
    for (const auto& [key, d] : g.edges)
        out += csv_escape(key.first) + "," + csv_escape(key.second) + "," +
               format_double(d.mean_sentiment) + "," + std::to_string(d.n_original) + "," +
               std::to_string(d.n_reply) + "," + std::to_string(d.n_retweet) + "\n";
    return out;
}

inline InteractionGraph parse_mention_graph_text(const std::string& csv) {
    InteractionGraph g;
    bool header = false;
    for_each_line(csv, [&](const std::string& line, std::size_t line_no) {
        if (!header) {
            header = true;
            return;
        }
        auto f = split_csv_line(line);
        if (f.size() != 6)
            throw ValidationError("mention graph: malformed row at line " + std::to_string(line_no));
        EdgeData d;
        d.mean_sentiment = parse_real(f[2], line_no);
        d.n_original = parse_int(f[3], line_no);
        d.n_reply = parse_int(f[4], line_no);
        d.n_retweet = parse_int(f[5], line_no);
        g.edges[{f[0], f[1]}] = d;
        g.nodes.insert(f[0]);
        g.nodes.insert(f[1]);
    });
    return g;
}

inline InteractionGraph parse_mention_graph(const std::string& path) {
    return parse_mention_graph_text(read_file(path));
}

inline std::string serialize_follower_graph(const FollowerGraph& g) {
    std::string out = "follower,followee\n";
    for (const auto& e : g.edges) out += csv_escape(e.first) + "," + csv_escape(e.second) + "\n";
    return out;
}

inline FollowerGraph parse_follower_graph_text(const std::string& csv) {
    return build_follower_graph(parse_followers_text(csv));
}

inline FollowerGraph parse_follower_graph(const std::string& path) {
    return parse_follower_graph_text(read_file(path));
}

inline std::string serialize_node_set(const std::set<std::string>& nodes) {
    std::string out;
    for (const std::string& n : nodes) {
        out += n;
        out += '\n';
    }
    return out;
}

}  // namespace alignet

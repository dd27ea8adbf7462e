#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "alignet/aggregate.hpp"
#include "alignet/community.hpp"
#include "alignet/corpus.hpp"
#include "alignet/errors.hpp"
#include "alignet/graph.hpp"
#include "alignet/io.hpp"
#include "alignet/kmeans.hpp"
#include "alignet/null_models.hpp"
#include "alignet/report.hpp"
#include "alignet/rng.hpp"
#include "alignet/sentiment.hpp"
#include "alignet/synth.hpp"

namespace alignet {

inline constexpr const char* kVersion = "0.1.0";

enum class Stage {
    ingest,
    score,
    graph,
    aggregate,
    nulltest,
    communities,
    intersect,
    cluster,
    report,
    synth,
};

inline const char* to_string(Stage s) {
    switch (s) {
        case Stage::ingest: return "ingest";
        case Stage::score: return "score";
        case Stage::graph: return "graph";
        case Stage::aggregate: return "aggregate";
        case Stage::nulltest: return "nulltest";
        case Stage::communities: return "communities";
        case Stage::intersect: return "intersect";
        case Stage::cluster: return "cluster";
        case Stage::report: return "report";
        default: return "synth";
    }
}

inline Stage stage_from_string(const std::string& s) {
    for (Stage st : {Stage::ingest, Stage::score, Stage::graph, Stage::aggregate, Stage::nulltest,
                     Stage::communities, Stage::intersect, Stage::cluster, Stage::report, Stage::synth})
        if (s == to_string(st)) return st;
    throw ArgumentError("unknown stage '" + s + "'");
}

struct NullTestSettings {
    std::size_t iterations = 1000;
    QuantileBand band;
    std::optional<std::uint64_t> seed;  // defaults to the stage substream
};

struct CommunitySettings {
    std::vector<double> times{1.0};
    std::size_t restarts = 8;
    std::size_t min_cell_size = 21;
};

struct ClusterSettings {
    int k_min = 1;
    int k_max = 8;
    std::size_t restarts = 10;
    bool standardize = false;
    bool weighted = false;  // weight cells by member count in the objective
};

struct PipelineConfig {
    std::string corpus;
    std::string followers;
    std::string lexicon;
    std::string annotations;  // optional
    std::optional<std::pair<std::int64_t, std::int64_t>> window;
    std::vector<std::string> hashtags;
    NullTestSettings null_test;
    CommunitySettings community;
    ClusterSettings clustering;
    GroupScheme label_scheme = GroupScheme::sign;
    NeighbourSet neighbour_set = NeighbourSet::union_in_out;
    bool use_mention_entities = true;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    std::optional<SynthConfig> synth;
};

inline PipelineConfig load_pipeline_config_json(const nlohmann::json& j) {
    PipelineConfig c;
    try {
        c.corpus = j.value("corpus", std::string());
        c.followers = j.value("followers", std::string());
        c.lexicon = j.value("lexicon", std::string());
        c.annotations = j.value("annotations", std::string());
        c.out_dir = j.value("out_dir", std::string("out"));
        c.seed = j.value("seed", std::uint64_t{0});
        if (j.contains("window")) {
            const auto& w = j.at("window");
            c.window = {{w.at("t0").get<std::int64_t>(), w.at("t1").get<std::int64_t>()}};
        }
        if (j.contains("hashtags")) c.hashtags = j.at("hashtags").get<std::vector<std::string>>();
        if (j.contains("null_test")) {
            const auto& n = j.at("null_test");
            c.null_test.iterations = n.value("iterations", c.null_test.iterations);
            if (n.contains("band")) {
                auto b = n.at("band").get<std::vector<double>>();
                if (b.size() != 2) throw ValidationError("pipeline config: band must have 2 entries");
                c.null_test.band = {b[0], b[1]};
            }
            if (n.contains("seed")) c.null_test.seed = n.at("seed").get<std::uint64_t>();
        }
        if (j.contains("community")) {
            const auto& n = j.at("community");
            if (n.contains("times")) c.community.times = n.at("times").get<std::vector<double>>();
            c.community.restarts = n.value("restarts", c.community.restarts);
            c.community.min_cell_size = n.value("min_cell_size", c.community.min_cell_size);
        }
        if (j.contains("clustering")) {
            const auto& n = j.at("clustering");
            c.clustering.k_min = n.value("k_min", c.clustering.k_min);
            c.clustering.k_max = n.value("k_max", c.clustering.k_max);
            c.clustering.restarts = n.value("restarts", c.clustering.restarts);
            c.clustering.standardize = n.value("standardize", c.clustering.standardize);
            c.clustering.weighted = n.value("weighted", c.clustering.weighted);
        }
        if (j.contains("label_scheme"))
            c.label_scheme = group_scheme_from_string(j.at("label_scheme").get<std::string>());
        if (j.contains("neighbour_out_only") && j.at("neighbour_out_only").get<bool>())
            c.neighbour_set = NeighbourSet::out_only;
        c.use_mention_entities = j.value("use_mention_entities", true);
        if (j.contains("synth")) c.synth = load_synth_config_json(j.at("synth"));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("pipeline config: ") + e.what());
    }
    validate_band(c.null_test.band);
    if (c.null_test.iterations == 0) throw ValidationError("pipeline config: iterations must be positive");
    if (c.community.times.empty()) throw ValidationError("pipeline config: community times must be non-empty");
    for (double t : c.community.times)
        if (!(t > 0.0)) throw ValidationError("pipeline config: community times must be positive");
    if (c.community.restarts == 0) throw ValidationError("pipeline config: community restarts must be positive");
    if (c.community.min_cell_size == 0) throw ValidationError("pipeline config: min_cell_size must be positive");
    if (c.clustering.k_min < 1 || c.clustering.k_max < c.clustering.k_min)
        throw ValidationError("pipeline config: clustering k range is invalid");
    if (c.clustering.restarts == 0) throw ValidationError("pipeline config: clustering restarts must be positive");
    return c;
}

inline PipelineConfig load_pipeline_config_text(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ValidationError("pipeline config: invalid JSON");
    return load_pipeline_config_json(j);
}

inline PipelineConfig load_pipeline_config(const std::string& path) {
    if (!std::filesystem::exists(path)) throw MissingInputError(path);
    return load_pipeline_config_text(read_file(path));
}

struct RunContext {
    std::string out_dir;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

inline RunContext make_context(const PipelineConfig& config, std::optional<std::uint64_t> seed_override,
                               const std::string& out_override, unsigned threads) {
    RunContext ctx;
    ctx.out_dir = out_override.empty() ? config.out_dir : out_override;
    ctx.seed = seed_override ? *seed_override : config.seed;
    ctx.threads = threads == 0 ? 1 : threads;
    return ctx;
}

namespace detail {

inline std::uint64_t stage_seed(const RunContext& ctx, Stage s) {
    return substream_seed(ctx.seed, static_cast<std::uint64_t>(s));
}

inline std::string out_path(const RunContext& ctx, const std::string& name) {
    return (std::filesystem::path(ctx.out_dir) / name).string();
}

inline std::string require_input(const std::string& path) {
    if (path.empty() || !std::filesystem::exists(path)) throw MissingInputError(path);
    return path;
}

struct Manifest {
    Stage stage;
    std::uint64_t seed;
    std::map<std::string, std::string> inputs;   // path -> content hash
    std::map<std::string, std::string> outputs;  // file name -> content hash

    Manifest(Stage s, std::uint64_t sd) : stage(s), seed(sd) {}
};

inline void note_input(Manifest& m, const std::string& path) { m.inputs[path] = hash_file(path); }

inline void write_artifact(Manifest& m, const RunContext& ctx, const std::string& name,
                           const std::string& content) {
    write_file(out_path(ctx, name), content);
    m.outputs[name] = hex64(fnv1a64(content));
}

inline void write_manifest(const Manifest& m, const RunContext& ctx) {
    nlohmann::ordered_json j;
    j["stage"] = to_string(m.stage);
    j["version"] = kVersion;
    j["seed"] = m.seed;
    j["inputs"] = m.inputs;
    j["outputs"] = m.outputs;
    write_file(out_path(ctx, std::string("manifest_") + to_string(m.stage) + ".json"),
               j.dump(2) + "\n");
}

inline nlohmann::ordered_json stats_json(const GraphStats& s) {
    nlohmann::ordered_json j;
    j["nodes"] = s.nodes;
    j["links"] = s.links;
    j["reciprocal_links"] = s.reciprocal_links;
    j["avg_out_degree"] = s.avg_out_degree;
    j["transitivity"] = s.transitivity;
    j["triangles"] = s.triangles;
    j["connected_triples"] = s.connected_triples;
    return j;
}

inline std::string pair_key(const LabelPair& p) { return p.first + "|" + p.second; }

inline void run_ingest(const PipelineConfig& config, const RunContext& ctx) {
    Manifest m{Stage::ingest, stage_seed(ctx, Stage::ingest)};
    note_input(m, require_input(config.corpus));
    note_input(m, require_input(config.followers));
    ParseOptions options;
    options.use_mention_entities = config.use_mention_entities;
    auto parsed = parse_corpus(config.corpus, options);
    Corpus corpus = std::move(parsed.corpus);
    if (config.window) corpus = filter_window(corpus, config.window->first, config.window->second);
    if (!config.hashtags.empty()) corpus = filter_hashtags(corpus, config.hashtags);
    auto followers = parse_followers(config.followers);

    nlohmann::ordered_json rep;
    rep["total_records"] = parsed.report.total_records;
    rep["accepted"] = parsed.report.accepted;
    rep["rejected"] = parsed.report.rejects.size();
    rep["kind_conflicts"] = parsed.report.kind_conflicts;
    nlohmann::ordered_json rejects = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < parsed.report.rejects.size() && i < 100; ++i)
        rejects.push_back({{"line", parsed.report.rejects[i].line},
                           {"reason", parsed.report.rejects[i].reason}});
    rep["rejects"] = rejects;
    rep["messages_after_filters"] = corpus.messages.size();
    rep["users"] = corpus.users.size();
    rep["follower_edges"] = followers.edges.size();

    write_artifact(m, ctx, "corpus.jsonl", serialize_corpus(corpus));
    write_artifact(m, ctx, "followers.csv", serialize_followers(followers));
    write_artifact(m, ctx, "ingest_report.json", rep.dump(2) + "\n");
    write_manifest(m, ctx);
}

inline void run_score(const PipelineConfig& config, const RunContext& ctx) {
    Manifest m{Stage::score, stage_seed(ctx, Stage::score)};
    note_input(m, require_input(out_path(ctx, "corpus.jsonl")));
    note_input(m, require_input(config.lexicon));
    auto corpus = parse_corpus(out_path(ctx, "corpus.jsonl")).corpus;
    auto lexicon = load_lexicon(config.lexicon);
    auto scores = score_corpus(lexicon, corpus, ctx.threads);
    write_artifact(m, ctx, "scores.csv", serialize_scores(scores));
    write_manifest(m, ctx);
}

inline void run_graph(const PipelineConfig& config, const RunContext& ctx) {
    (void)config;
    Manifest m{Stage::graph, stage_seed(ctx, Stage::graph)};
    note_input(m, require_input(out_path(ctx, "corpus.jsonl")));
    note_input(m, require_input(out_path(ctx, "followers.csv")));
    note_input(m, require_input(out_path(ctx, "scores.csv")));
    auto corpus = parse_corpus(out_path(ctx, "corpus.jsonl")).corpus;
    auto scores = parse_scores(out_path(ctx, "scores.csv"));
    auto followers_list = parse_followers(out_path(ctx, "followers.csv"));

    auto mention = build_mention_graph(corpus, scores);
    auto follower = build_follower_graph(followers_list);
    auto mention_recip = reciprocal_subgraph(mention);
    auto follower_recip = reciprocal_subgraph(follower);
    auto [mention_aligned, follower_aligned] = align_networks(mention_recip, follower_recip);

    nlohmann::ordered_json stats;
    stats["mention"] = stats_json(summary_stats(mention));
    stats["follower"] = stats_json(summary_stats(follower));
    stats["mention_reciprocal"] = stats_json(summary_stats(mention_recip));
    stats["follower_reciprocal"] = stats_json(summary_stats(follower_recip));
    stats["mention_aligned"] = stats_json(summary_stats(mention_aligned));
    stats["follower_aligned"] = stats_json(summary_stats(follower_aligned));

    write_artifact(m, ctx, "mention_graph.csv", serialize_mention_graph(mention));
    write_artifact(m, ctx, "follower_graph.csv", serialize_follower_graph(follower));
    write_artifact(m, ctx, "mention_reciprocal.csv", serialize_mention_graph(mention_recip));
    write_artifact(m, ctx, "follower_reciprocal.csv", serialize_follower_graph(follower_recip));
    write_artifact(m, ctx, "mention_aligned.csv", serialize_mention_graph(mention_aligned));
    write_artifact(m, ctx, "follower_aligned.csv", serialize_follower_graph(follower_aligned));
    write_artifact(m, ctx, "aligned_nodes.csv", serialize_node_set(mention_aligned.nodes));
    write_artifact(m, ctx, "graph_stats.json", stats.dump(2) + "\n");
    write_manifest(m, ctx);
}

inline void run_aggregate(const PipelineConfig& config, const RunContext& ctx) {
    Manifest m{Stage::aggregate, stage_seed(ctx, Stage::aggregate)};
    note_input(m, require_input(out_path(ctx, "mention_aligned.csv")));
    auto g = parse_mention_graph(out_path(ctx, "mention_aligned.csv"));
    auto agg = compute_aggregates(g, config.neighbour_set);
    auto labels = group_users(agg, config.label_scheme);
    write_artifact(m, ctx, "aggregates.csv", serialize_aggregates(agg, labels));
    write_manifest(m, ctx);
}

inline void run_nulltest(const PipelineConfig& config, const RunContext& ctx) {
    Manifest m{Stage::nulltest, stage_seed(ctx, Stage::nulltest)};
    note_input(m, require_input(out_path(ctx, "mention_aligned.csv")));
    note_input(m, require_input(out_path(ctx, "follower_aligned.csv")));
    note_input(m, require_input(out_path(ctx, "aggregates.csv")));
    auto mention = parse_mention_graph(out_path(ctx, "mention_aligned.csv"));
    auto follower = parse_follower_graph(out_path(ctx, "follower_aligned.csv"));
    auto table = parse_aggregates(out_path(ctx, "aggregates.csv"));

    const std::uint64_t base = config.null_test.seed ? *config.null_test.seed : m.seed;
    const auto& band = config.null_test.band;
    const std::size_t iters = config.null_test.iterations;

    auto corr = correlation_null_test(mention, iters, band, substream_seed(base, 0), ctx.threads);
    auto mention_frac = label_permutation_test(mention, table.labels, iters, band,
                                               substream_seed(base, 1), LabelNullMode::iid, ctx.threads);
    auto follower_frac = label_permutation_test(follower, table.labels, iters, band,
                                                substream_seed(base, 2), LabelNullMode::iid, ctx.threads);

    nlohmann::ordered_json j;
    j["correlation"] = rand_test_json("correlation", corr);
    nlohmann::ordered_json mf;
    for (const auto& [key, r] : mention_frac) mf[pair_key(key)] = rand_test_json("link_fraction", r);
    j["mention_fractions"] = mf;
    nlohmann::ordered_json ff;
    for (const auto& [key, r] : follower_frac) ff[pair_key(key)] = rand_test_json("link_fraction", r);
    j["follower_fractions"] = ff;
    nlohmann::ordered_json expected;
    for (const auto& [key, v] : expected_null_fractions(mention, table.labels))
        expected[pair_key(key)] = v;
    j["expected_mention_fractions"] = expected;

    std::string samples = "test,pair,iteration,value\n";
    for (std::size_t i = 0; i < corr.null_samples.size(); ++i)
        samples += "correlation,," + std::to_string(i) + "," + format_double(corr.null_samples[i]) + "\n";
    for (const auto& [key, r] : mention_frac)
        for (std::size_t i = 0; i < r.null_samples.size(); ++i)
            samples += "mention_fraction," + pair_key(key) + "," + std::to_string(i) + "," +
                       format_double(r.null_samples[i]) + "\n";
    for (const auto& [key, r] : follower_frac)
        for (std::size_t i = 0; i < r.null_samples.size(); ++i)
            samples += "follower_fraction," + pair_key(key) + "," + std::to_string(i) + "," +
                       format_double(r.null_samples[i]) + "\n";

    write_artifact(m, ctx, "null_tests.json", j.dump(2) + "\n");
    write_artifact(m, ctx, "null_samples.csv", samples);
    write_manifest(m, ctx);
}

inline nlohmann::ordered_json scan_json(const StabilityScanResult& scan) {
    nlohmann::ordered_json j;
    j["selected_time"] = scan.selected_time;
    j["k"] = scan.partition.k();
    nlohmann::ordered_json diag = nlohmann::ordered_json::array();
    for (const auto& d : scan.diagnostics)
        diag.push_back({{"time", d.time}, {"k", d.k}, {"quality", d.quality}, {"mean_vi", d.mean_vi}});
    j["diagnostics"] = diag;
    return j;
}

inline void run_communities(const PipelineConfig& config, const RunContext& ctx) {
    Manifest m{Stage::communities, stage_seed(ctx, Stage::communities)};
    note_input(m, require_input(out_path(ctx, "mention_aligned.csv")));
    note_input(m, require_input(out_path(ctx, "follower_aligned.csv")));
    auto mention = parse_mention_graph(out_path(ctx, "mention_aligned.csv"));
    auto follower = parse_follower_graph(out_path(ctx, "follower_aligned.csv"));

    auto mention_scan = stability_scan(mention, config.community.times, config.community.restarts,
                                       substream_seed(m.seed, 0), ctx.threads);
    auto follower_scan = stability_scan(follower, config.community.times, config.community.restarts,
                                        substream_seed(m.seed, 1), ctx.threads);

    nlohmann::ordered_json j;
    j["seed"] = m.seed;
    j["mention"] = scan_json(mention_scan);
    j["follower"] = scan_json(follower_scan);

    write_artifact(m, ctx, "mention_partition.csv", serialize_partition(mention_scan.partition));
    write_artifact(m, ctx, "follower_partition.csv", serialize_partition(follower_scan.partition));
    write_artifact(m, ctx, "community_report.json", j.dump(2) + "\n");
    write_manifest(m, ctx);
}

inline void run_intersect(const PipelineConfig& config, const RunContext& ctx) {
    Manifest m{Stage::intersect, stage_seed(ctx, Stage::intersect)};
    note_input(m, require_input(out_path(ctx, "mention_partition.csv")));
    note_input(m, require_input(out_path(ctx, "follower_partition.csv")));
    note_input(m, require_input(out_path(ctx, "aggregates.csv")));
    auto p1 = parse_partition(out_path(ctx, "mention_partition.csv"));
    auto p2 = parse_partition(out_path(ctx, "follower_partition.csv"));
    auto table = parse_aggregates(out_path(ctx, "aggregates.csv"));

    auto cells = intersect_partitions(p1, p2);
    auto pruned = prune_small(cells, config.community.min_cell_size);
    auto profiles = subcommunity_profiles(pruned.partition, table.aggregates);

    nlohmann::ordered_json j;
    j["cells_before_prune"] = cells.k();
    j["cells_after_prune"] = pruned.partition.k();
    j["users_before_prune"] = cells.assignment.size();
    j["users_removed"] = pruned.removed.size();
    j["min_cell_size"] = config.community.min_cell_size;

    write_artifact(m, ctx, "cells.csv", serialize_partition(pruned.partition));
    write_artifact(m, ctx, "cell_profiles.csv", serialize_profiles(profiles));
    write_artifact(m, ctx, "intersect_report.json", j.dump(2) + "\n");
    write_manifest(m, ctx);
}

inline void run_cluster(const PipelineConfig& config, const RunContext& ctx) {
    Manifest m{Stage::cluster, stage_seed(ctx, Stage::cluster)};
    note_input(m, require_input(out_path(ctx, "cells.csv")));
    note_input(m, require_input(out_path(ctx, "cell_profiles.csv")));
    auto cells = parse_partition(out_path(ctx, "cells.csv"));
    auto rows = parse_profiles(out_path(ctx, "cell_profiles.csv"));

    std::map<int, std::set<std::string>> members;
    for (const auto& [user, c] : cells.assignment) members[c].insert(user);
    std::vector<SubCommunityProfile> profiles;
    for (const auto& r : rows) {
        auto it = members.find(r.cell);
        if (it == members.end())
            throw ConsistencyError("cluster: profile cell " + std::to_string(r.cell) +
                                   " has no members in cells.csv");
        SubCommunityProfile p;
        p.cell = r.cell;
        p.members = it->second;
        if (p.members.size() != r.size)
            throw ConsistencyError("cluster: size mismatch for cell " + std::to_string(r.cell));
        p.s_in = r.s_in;
        p.s_out = r.s_out;
        p.s_n_in = r.s_n_in;
        p.s_n_out = r.s_n_out;
        profiles.push_back(std::move(p));
    }
    if (profiles.size() != static_cast<std::size_t>(cells.k()))
        throw ConsistencyError("cluster: profile rows do not cover all cells");

    PointsInfo info;
    auto pts = profile_points(profiles, config.clustering.standardize, &info);
    std::vector<double> weights(pts.size(), 1.0);
    if (config.clustering.weighted)
        for (std::size_t i = 0; i < profiles.size(); ++i)
            weights[i] = static_cast<double>(profiles[i].members.size());

    const int k_max_eff = std::min<int>(config.clustering.k_max, static_cast<int>(pts.size()));
    if (k_max_eff - config.clustering.k_min < 2)
        throw ValidationError("cluster: fewer than 3 feasible k values for elbow selection");
    auto elbow = elbow_select(pts, weights, config.clustering.k_min, k_max_eff,
                              config.clustering.restarts, m.seed, ctx.threads);
    auto clusters = assemble_clusters(elbow.best, profiles);

    nlohmann::ordered_json j;
    j["seed"] = m.seed;
    j["selected_k"] = elbow.selected_k;
    j["k_min"] = config.clustering.k_min;
    j["k_max_requested"] = config.clustering.k_max;
    j["k_max_effective"] = k_max_eff;
    j["standardize"] = config.clustering.standardize;
    j["weighted"] = config.clustering.weighted;
    j["wss"] = elbow.best.wss;
    nlohmann::ordered_json cents = nlohmann::ordered_json::array();
    for (const auto& c : elbow.best.centroids) cents.push_back({c[0], c[1], c[2], c[3]});
    j["centroids"] = cents;
    nlohmann::ordered_json imp;
    imp["fill"] = {info.fill[0], info.fill[1], info.fill[2], info.fill[3]};
    imp["imputed"] = {info.imputed[0], info.imputed[1], info.imputed[2], info.imputed[3]};
    j["imputation"] = imp;
    nlohmann::ordered_json sizes = nlohmann::ordered_json::array();
    for (const auto& c : clusters) sizes.push_back({{"cluster", c.index},
                                                    {"size", c.size()},
                                                    {"mean_s_out", c.mean_s_out}});
    j["clusters"] = sizes;

    write_artifact(m, ctx, "clusters.csv", serialize_clusters(clusters));
    write_artifact(m, ctx, "wss_curve.csv", serialize_wss_curve(elbow.curve));
    write_artifact(m, ctx, "cluster_report.json", j.dump(2) + "\n");
    write_manifest(m, ctx);
}

inline void run_report(const PipelineConfig& config, const RunContext& ctx) {
    Manifest m{Stage::report, stage_seed(ctx, Stage::report)};
    note_input(m, require_input(out_path(ctx, "corpus.jsonl")));
    note_input(m, require_input(out_path(ctx, "scores.csv")));
    note_input(m, require_input(out_path(ctx, "followers.csv")));
    note_input(m, require_input(out_path(ctx, "mention_aligned.csv")));
    note_input(m, require_input(out_path(ctx, "clusters.csv")));
    auto corpus = parse_corpus(out_path(ctx, "corpus.jsonl")).corpus;
    auto scores = parse_scores(out_path(ctx, "scores.csv"));
    auto follower_full = parse_follower_graph(out_path(ctx, "followers.csv"));
    auto mention_aligned = parse_mention_graph(out_path(ctx, "mention_aligned.csv"));
    auto clusters = parse_clusters(out_path(ctx, "clusters.csv"));

    std::set<std::string> clustered;
    for (const auto& [u, c] : clusters) clustered.insert(u);
    auto mention_clustered = restrict_graph(mention_aligned, clustered);

    auto fractions = cluster_link_fractions(mention_clustered, clusters);
    auto types = mention_type_table(corpus, clusters);
    auto coverage = follower_coverage(corpus, clusters, follower_full);
    auto sent_stats = cluster_sentiment_stats(mention_clustered, clusters);
    auto activity = activity_timeseries(corpus, scores, clusters);

    nlohmann::ordered_json j;
    nlohmann::ordered_json jf = nlohmann::ordered_json::array();
    for (const auto& [key, f] : fractions)
        jf.push_back({{"from", key.first}, {"to", key.second}, {"fraction", f}});
    j["link_fractions"] = jf;
    nlohmann::ordered_json jt = nlohmann::ordered_json::array();
    for (const auto& [key, cell] : types.cells)
        for (Kind kind : {Kind::original, Kind::reply, Kind::retweet})
            jt.push_back({{"from", key.first},
                          {"to", key.second},
                          {"kind", to_string(kind)},
                          {"count", cell.of(kind)},
                          {"proportion", types.proportion(key.first, key.second, kind)}});
    j["mention_types"] = jt;
    j["mention_messages_skipped_unclustered"] = types.skipped_unclustered;
    nlohmann::ordered_json jc = nlohmann::ordered_json::array();
    for (const auto& [key, cell] : coverage)
        jc.push_back({{"from", std::get<0>(key)},
                      {"to", std::get<1>(key)},
                      {"kind", to_string(std::get<2>(key))},
                      {"connected", cell.connected},
                      {"total", cell.total},
                      {"fraction", cell.fraction()}});
    j["follower_coverage"] = jc;
    nlohmann::ordered_json js = nlohmann::ordered_json::array();
    for (const auto& [key, s] : sent_stats)
        js.push_back({{"from", key.first},
                      {"to", key.second},
                      {"min", s.min},
                      {"q1", s.q1},
                      {"median", s.median},
                      {"q3", s.q3},
                      {"max", s.max},
                      {"mean", s.mean}});
    j["sentiment_stats"] = js;

    write_artifact(m, ctx, "link_fractions.csv", serialize_link_fractions(fractions));
    write_artifact(m, ctx, "mention_types.csv", serialize_mention_table(types));
    write_artifact(m, ctx, "follower_coverage.csv", serialize_coverage(coverage));
    write_artifact(m, ctx, "sentiment_stats.csv", serialize_sentiment_stats(sent_stats));
    write_artifact(m, ctx, "activity.csv", serialize_activity(activity));
    write_artifact(m, ctx, "activity_tidy.csv", serialize_activity_tidy(activity));

    if (!config.annotations.empty()) {
        note_input(m, require_input(config.annotations));
        auto annotations = parse_annotations(config.annotations);
        auto eval = evaluate_alignment(annotations, clusters);
        nlohmann::ordered_json je;
        je["overall_accuracy"] = eval.overall;
        je["balanced_accuracy"] = eval.balanced;
        je["per_cluster_accuracy"] = eval.per_cluster;
        je["excluded_users"] = eval.excluded_users;
        je["warnings"] = eval.warnings;
        j["evaluation"] = je;
        write_artifact(m, ctx, "confusion.csv", serialize_confusion(eval.confusion));
        write_artifact(m, ctx, "composition.csv", serialize_composition(eval.composition));
    }

    write_artifact(m, ctx, "report.json", j.dump(2) + "\n");
    write_manifest(m, ctx);
}

inline void run_synth(const PipelineConfig& config, const RunContext& ctx) {
    if (!config.synth) throw ValidationError("synth: config has no synth section");
    Manifest m{Stage::synth, config.synth->seed};
    auto out = generate(*config.synth, ctx.threads);

    nlohmann::ordered_json j;
    j["seed"] = config.synth->seed;
    j["users"] = out.groups.size();
    j["messages"] = out.corpus.messages.size();
    j["follower_edges"] = out.followers.edges.size();
    if (!config.lexicon.empty()) {
        note_input(m, require_input(config.lexicon));
        auto lexicon = load_lexicon(config.lexicon);
        auto report = verify_roundtrip(*config.synth, lexicon, ctx.threads);
        j["roundtrip_ok"] = report.ok();
        j["roundtrip_mismatches"] = report.mismatches + report.template_failures;
        if (!report.ok())
            throw ValidationError("synth: roundtrip check failed with " +
                                  std::to_string(report.mismatches + report.template_failures) +
                                  " mismatches");
    }

    write_artifact(m, ctx, "synth_corpus.jsonl", serialize_corpus(out.corpus));
    write_artifact(m, ctx, "synth_followers.csv", serialize_followers(out.followers));
    write_artifact(m, ctx, "synth_groups.csv", serialize_groups(out.groups));
    write_artifact(m, ctx, "synth_report.json", j.dump(2) + "\n");
    write_manifest(m, ctx);
}

}  // namespace detail

inline void run_stage(Stage stage, const PipelineConfig& config, const RunContext& ctx) {
    switch (stage) {
        case Stage::ingest: detail::run_ingest(config, ctx); break;
        case Stage::score: detail::run_score(config, ctx); break;
        case Stage::graph: detail::run_graph(config, ctx); break;
        case Stage::aggregate: detail::run_aggregate(config, ctx); break;
        case Stage::nulltest: detail::run_nulltest(config, ctx); break;
        case Stage::communities: detail::run_communities(config, ctx); break;
        case Stage::intersect: detail::run_intersect(config, ctx); break;
        case Stage::cluster: detail::run_cluster(config, ctx); break;
        case Stage::report: detail::run_report(config, ctx); break;
        case Stage::synth: detail::run_synth(config, ctx); break;
    }
}

inline void run_pipeline(const PipelineConfig& config, const RunContext& ctx) {
    for (Stage s : {Stage::ingest, Stage::score, Stage::graph, Stage::aggregate, Stage::nulltest,
                    Stage::communities, Stage::intersect, Stage::cluster, Stage::report})
        run_stage(s, config, ctx);
}

}  // namespace alignet

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "alignet/pipeline.hpp"

using namespace alignet;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string demo_config_path() { return std::string(ALIGNET_CONFIG_DIR) + "/demo.json"; }

// Scratch directory under the test working directory, wiped on entry so reruns
// start from a clean slate.
fs::path scratch_dir(const std::string& name) {
    fs::path dir = fs::path("pipeline_scratch") / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// The demo config repointed at a scratch directory. The corpus and follower
// paths land on the synth stage outputs so synth feeds the data stages.
PipelineConfig demo_config(const fs::path& out) {
    PipelineConfig c = load_pipeline_config(demo_config_path());
    c.out_dir = out.string();
    c.corpus = (out / "synth_corpus.jsonl").string();
    c.followers = (out / "synth_followers.csv").string();
    c.lexicon = ALIGNET_LEXICON_PATH;
    c.null_test.iterations = 50;  // smaller than the shipped config to keep the test quick
    return c;
}

std::map<std::string, std::string> tree_hashes(const fs::path& dir) {
    std::map<std::string, std::string> hashes;
    for (const auto& entry : fs::recursive_directory_iterator(dir))
        if (entry.is_regular_file())
            hashes[fs::relative(entry.path(), dir).generic_string()] = hash_file(entry.path().string());
    return hashes;
}

json read_json(const fs::path& path) { return json::parse(read_file(path.string())); }

}  // namespace

TEST_CASE("stage names round trip") {
    const std::vector<std::pair<Stage, std::string>> expected = {
        {Stage::ingest, "ingest"},         {Stage::score, "score"},
        {Stage::graph, "graph"},           {Stage::aggregate, "aggregate"},
        {Stage::nulltest, "nulltest"},     {Stage::communities, "communities"},
        {Stage::intersect, "intersect"},   {Stage::cluster, "cluster"},
        {Stage::report, "report"},         {Stage::synth, "synth"},
    };
    for (const auto& [stage, name] : expected) {
        CHECK(to_string(stage) == name);
        CHECK(stage_from_string(name) == stage);
    }
    REQUIRE_THROWS_AS(stage_from_string("bogus"), ArgumentError);
    REQUIRE_THROWS_AS(stage_from_string(""), ArgumentError);
}

TEST_CASE("pipeline config defaults") {
    auto c = load_pipeline_config_text("{}");
    CHECK(c.corpus.empty());
    CHECK(c.followers.empty());
    CHECK(c.lexicon.empty());
    CHECK(c.annotations.empty());
    CHECK_FALSE(c.window.has_value());
    CHECK(c.hashtags.empty());
    CHECK(c.null_test.iterations == 1000);
    CHECK(c.null_test.band.lo == 0.025);
    CHECK(c.null_test.band.hi == 0.975);
    CHECK_FALSE(c.null_test.seed.has_value());
    CHECK(c.community.times == std::vector<double>{1.0});
    CHECK(c.community.restarts == 8);
    CHECK(c.community.min_cell_size == 21);
    CHECK(c.clustering.k_min == 1);
    CHECK(c.clustering.k_max == 8);
    CHECK(c.clustering.restarts == 10);
    CHECK_FALSE(c.clustering.standardize);
    CHECK_FALSE(c.clustering.weighted);
    CHECK(c.label_scheme == GroupScheme::sign);
    CHECK(c.neighbour_set == NeighbourSet::union_in_out);
    CHECK(c.use_mention_entities);
    CHECK(c.out_dir == "out");
    CHECK(c.seed == 0);
    CHECK_FALSE(c.synth.has_value());
}

TEST_CASE("pipeline config parses every field") {
    const std::string text = R"({
        "corpus": "c.jsonl", "followers": "f.csv", "lexicon": "lex.tsv",
        "annotations": "ann.csv", "out_dir": "alt", "seed": 7,
        "window": {"t0": 100, "t1": 200},
        "hashtags": ["tag1", "tag2"],
        "null_test": {"iterations": 64, "band": [0.05, 0.95], "seed": 9},
        "community": {"times": [0.5, 1.5], "restarts": 3, "min_cell_size": 4},
        "clustering": {"k_min": 2, "k_max": 6, "restarts": 5, "standardize": true, "weighted": true},
        "label_scheme": "median_split",
        "neighbour_out_only": true,
        "use_mention_entities": false
    })";
    auto c = load_pipeline_config_text(text);
    CHECK(c.corpus == "c.jsonl");
    CHECK(c.followers == "f.csv");
    CHECK(c.lexicon == "lex.tsv");
    CHECK(c.annotations == "ann.csv");
    CHECK(c.out_dir == "alt");
    CHECK(c.seed == 7);
    REQUIRE(c.window.has_value());
    CHECK(c.window->first == 100);
    CHECK(c.window->second == 200);
    CHECK(c.hashtags == std::vector<std::string>{"tag1", "tag2"});
    CHECK(c.null_test.iterations == 64);
    CHECK(c.null_test.band.lo == 0.05);
    CHECK(c.null_test.band.hi == 0.95);
    REQUIRE(c.null_test.seed.has_value());
    CHECK(*c.null_test.seed == 9);
    CHECK(c.community.times == std::vector<double>{0.5, 1.5});
    CHECK(c.community.restarts == 3);
    CHECK(c.community.min_cell_size == 4);
    CHECK(c.clustering.k_min == 2);
    CHECK(c.clustering.k_max == 6);
    CHECK(c.clustering.restarts == 5);
    CHECK(c.clustering.standardize);
    CHECK(c.clustering.weighted);
    CHECK(c.label_scheme == GroupScheme::median_split);
    CHECK(c.neighbour_set == NeighbourSet::out_only);
    CHECK_FALSE(c.use_mention_entities);
}

TEST_CASE("pipeline config rejects malformed input") {
    try {
        load_pipeline_config("no_such_config.json");
        FAIL("expected MissingInputError");
    } catch (const MissingInputError& e) {
        CHECK(e.path() == "no_such_config.json");
    }
    REQUIRE_THROWS_AS(load_pipeline_config_text("{not json"), ValidationError);
    REQUIRE_THROWS_AS(load_pipeline_config_text(R"({"null_test": {"band": [0.1, 0.5, 0.9]}})"),
                      ValidationError);
    REQUIRE_THROWS_AS(load_pipeline_config_text(R"({"null_test": {"band": [0.9, 0.1]}})"),
                      ArgumentError);
    REQUIRE_THROWS_AS(load_pipeline_config_text(R"({"null_test": {"iterations": 0}})"),
                      ValidationError);
    REQUIRE_THROWS_AS(load_pipeline_config_text(R"({"community": {"times": []}})"), ValidationError);
    REQUIRE_THROWS_AS(load_pipeline_config_text(R"({"community": {"times": [0.0]}})"),
                      ValidationError);
    REQUIRE_THROWS_AS(load_pipeline_config_text(R"({"community": {"restarts": 0}})"),
                      ValidationError);
    REQUIRE_THROWS_AS(load_pipeline_config_text(R"({"community": {"min_cell_size": 0}})"),
                      ValidationError);
    REQUIRE_THROWS_AS(load_pipeline_config_text(R"({"clustering": {"k_min": 0}})"), ValidationError);
    REQUIRE_THROWS_AS(load_pipeline_config_text(R"({"clustering": {"k_min": 3, "k_max": 1}})"),
                      ValidationError);
    REQUIRE_THROWS_AS(load_pipeline_config_text(R"({"clustering": {"restarts": 0}})"),
                      ValidationError);
    REQUIRE_THROWS_AS(load_pipeline_config_text(R"({"label_scheme": "bogus"})"), ArgumentError);
    REQUIRE_THROWS_AS(load_pipeline_config_text(R"({"window": {"t0": 1}})"), ValidationError);
    REQUIRE_THROWS_AS(load_pipeline_config_text(R"({"hashtags": 3})"), ValidationError);
    REQUIRE_THROWS_AS(load_pipeline_config_text(R"({"synth": {}})"), ValidationError);
}

TEST_CASE("make_context applies overrides") {
    PipelineConfig c;
    c.out_dir = "somewhere";
    c.seed = 5;

    auto ctx = make_context(c, std::nullopt, "", 0);
    CHECK(ctx.out_dir == "somewhere");
    CHECK(ctx.seed == 5);
    CHECK(ctx.threads == 1);

    auto ctx2 = make_context(c, std::uint64_t{99}, "elsewhere", 4);
    CHECK(ctx2.out_dir == "elsewhere");
    CHECK(ctx2.seed == 99);
    CHECK(ctx2.threads == 4);
}

TEST_CASE("shipped demo config has the expected shape") {
    auto c = load_pipeline_config(demo_config_path());
    CHECK(c.seed == 42);
    CHECK(c.null_test.iterations == 200);
    CHECK(c.community.times == std::vector<double>{0.6, 1.0, 1.6});
    CHECK(c.community.restarts == 8);
    CHECK(c.community.min_cell_size == 15);
    CHECK(c.clustering.k_min == 1);
    CHECK(c.clustering.k_max == 5);
    REQUIRE(c.synth.has_value());
    CHECK(c.synth->group_sizes == std::vector<std::size_t>{50, 50, 30, 30, 20, 20});
    CHECK(c.synth->days == 14);
    CHECK(c.synth->seed == 42);
    CHECK(c.synth->sentiment_noise == 0.8);
    REQUIRE(c.synth->kind_mix.size() == 6);
    for (const auto& row : c.synth->kind_mix) {
        REQUIRE(row.size() == 6);
        for (const auto& mix : row) CHECK(mix == std::array<double, 3>{0.5, 0.3, 0.2});
    }
}

TEST_CASE("pipeline recovers planted structure end to end") {
    auto out = scratch_dir("full");
    auto config = demo_config(out);
    auto ctx = make_context(config, std::nullopt, "", 2);

    run_stage(Stage::synth, config, ctx);
    for (const char* name : {"synth_corpus.jsonl", "synth_followers.csv", "synth_groups.csv",
                             "synth_report.json", "manifest_synth.json"})
        REQUIRE(fs::exists(out / name));
    auto synth_report = read_json(out / "synth_report.json");
    CHECK(synth_report.at("users").get<std::size_t>() == 200);
    CHECK(synth_report.at("roundtrip_ok").get<bool>());

    run_pipeline(config, ctx);

    SECTION("every stage leaves its artifacts and manifest") {
        const std::vector<std::pair<std::string, std::vector<std::string>>> stage_files = {
            {"ingest", {"corpus.jsonl", "followers.csv", "ingest_report.json"}},
            {"score", {"scores.csv"}},
            {"graph",
             {"mention_graph.csv", "follower_graph.csv", "mention_reciprocal.csv",
              "follower_reciprocal.csv", "mention_aligned.csv", "follower_aligned.csv",
              "aligned_nodes.csv", "graph_stats.json"}},
            {"aggregate", {"aggregates.csv"}},
            {"nulltest", {"null_tests.json", "null_samples.csv"}},
            {"communities", {"mention_partition.csv", "follower_partition.csv", "community_report.json"}},
            {"intersect", {"cells.csv", "cell_profiles.csv", "intersect_report.json"}},
            {"cluster", {"clusters.csv", "wss_curve.csv", "cluster_report.json"}},
            {"report",
             {"link_fractions.csv", "mention_types.csv", "follower_coverage.csv",
              "sentiment_stats.csv", "activity.csv", "activity_tidy.csv", "report.json"}},
        };
        for (const auto& [stage, files] : stage_files) {
            for (const auto& f : files) {
                INFO(stage << " should produce " << f);
                CHECK(fs::exists(out / f));
            }
            auto manifest = read_json(out / ("manifest_" + stage + ".json"));
            CHECK(manifest.at("stage").get<std::string>() == stage);
            CHECK(manifest.at("version").get<std::string>() == kVersion);
            for (const auto& [name, hash] : manifest.at("outputs").items()) {
                INFO(stage << " manifest entry " << name);
                CHECK(hash.get<std::string>() == hash_file((out / name).string()));
            }
        }
    }

    SECTION("reports carry the planted structure") {
        auto ingest = read_json(out / "ingest_report.json");
        CHECK(ingest.at("rejected").get<std::size_t>() == 0);
        CHECK(ingest.at("accepted").get<std::size_t>() ==
              ingest.at("total_records").get<std::size_t>());
        CHECK(ingest.at("users").get<std::size_t>() == 200);

        auto stats = read_json(out / "graph_stats.json");
        CHECK(stats.at("mention").at("nodes").get<std::size_t>() == 200);
        CHECK(stats.at("mention_aligned").at("links").get<std::size_t>() > 0);

        auto nulls = read_json(out / "null_tests.json");
        CHECK(nulls.at("correlation").at("iterations").get<std::size_t>() == 50);
        CHECK(nulls.at("correlation").contains("verdict"));
        CHECK(!nulls.at("mention_fractions").empty());
        CHECK(!nulls.at("follower_fractions").empty());
        for (const auto& [key, value] : nulls.at("expected_mention_fractions").items()) {
            INFO("expected fraction " << key);
            CHECK(value.get<double>() >= 0.0);
        }
        std::string samples = read_file((out / "null_samples.csv").string());
        CHECK(samples.rfind("test,pair,iteration,value\n", 0) == 0);

        auto intersect = read_json(out / "intersect_report.json");
        CHECK(intersect.at("cells_after_prune").get<int>() == 6);
        CHECK(intersect.at("min_cell_size").get<std::size_t>() == 15);
        CHECK(intersect.at("users_before_prune").get<std::size_t>() -
                  intersect.at("users_removed").get<std::size_t>() ==
              200);

        auto cluster = read_json(out / "cluster_report.json");
        CHECK(cluster.at("selected_k").get<int>() == 3);
        CHECK(cluster.at("k_max_effective").get<int>() == 5);
        CHECK(cluster.at("wss").is_number());
        std::string curve = read_file((out / "wss_curve.csv").string());
        CHECK(std::count(curve.begin(), curve.end(), '\n') == 6);  // header + k = 1..5
        std::multiset<std::size_t> sizes;
        for (const auto& entry : cluster.at("clusters"))
            sizes.insert(entry.at("size").get<std::size_t>());
        CHECK(sizes == std::multiset<std::size_t>{40, 60, 100});

        // Every recovered cluster is pure: its members share one planted class
        // (adjacent synth groups form a class), and classes map 1:1 to clusters.
        auto groups = parse_groups((out / "synth_groups.csv").string());
        auto clusters = parse_clusters((out / "clusters.csv").string());
        REQUIRE(clusters.size() == 200);
        std::map<int, std::set<int>> classes_by_cluster;
        for (const auto& [user, cl] : clusters) {
            REQUIRE(groups.count(user) == 1);
            classes_by_cluster[cl].insert(groups.at(user) / 2);
        }
        REQUIRE(classes_by_cluster.size() == 3);
        std::set<int> seen;
        for (const auto& [cl, cls] : classes_by_cluster) {
            INFO("cluster " << cl);
            CHECK(cls.size() == 1);
            seen.insert(*cls.begin());
        }
        CHECK(seen == std::set<int>{0, 1, 2});
    }

    SECTION("reruns are byte identical, including across thread counts") {
        auto before = tree_hashes(out);
        auto ctx4 = make_context(config, std::nullopt, "", 4);
        run_pipeline(config, ctx4);
        CHECK(tree_hashes(out) == before);
    }

    SECTION("a stage with a missing upstream artifact names the gap") {
        auto before = tree_hashes(out);
        const auto aligned = out / "mention_aligned.csv";
        fs::remove(aligned);
        try {
            run_stage(Stage::nulltest, config, ctx);
            FAIL("expected MissingInputError");
        } catch (const MissingInputError& e) {
            CHECK(e.path() == aligned.string());
        }
        // Re-running the producing stage restores the exact bytes.
        run_stage(Stage::graph, config, ctx);
        run_stage(Stage::nulltest, config, ctx);
        CHECK(tree_hashes(out) == before);
    }

    SECTION("report stage evaluates annotations when configured") {
        auto clusters = parse_clusters((out / "clusters.csv").string());
        std::map<int, std::vector<std::string>> members;
        for (const auto& [user, cl] : clusters) members[cl].push_back(user);
        REQUIRE(members.size() == 3);

        // Label five users from each cluster so every majority vote is clean:
        // clusters 0 and 1 become yes, cluster 2 becomes no.
        std::map<std::string, Annotation> annotations;
        for (const auto& [cl, users] : members)
            for (std::size_t i = 0; i < 5 && i < users.size(); ++i)
                annotations[users[i]] = cl == 2 ? Annotation::no : Annotation::yes;
        const auto ann_path = out / "annotations.csv";
        write_file(ann_path.string(), serialize_annotations(annotations));

        auto config2 = config;
        config2.annotations = ann_path.string();
        run_stage(Stage::report, config2, ctx);

        REQUIRE(fs::exists(out / "confusion.csv"));
        REQUIRE(fs::exists(out / "composition.csv"));
        auto report = read_json(out / "report.json");
        REQUIRE(report.contains("evaluation"));
        const auto& eval = report.at("evaluation");
        CHECK(eval.at("overall_accuracy").get<double>() == 1.0);
        CHECK(eval.at("balanced_accuracy").get<double>() == 1.0);
        CHECK(eval.at("per_cluster_accuracy").get<double>() == 1.0);
        CHECK(eval.at("excluded_users").get<std::size_t>() == 0);
        CHECK(eval.at("warnings").empty());
    }
}

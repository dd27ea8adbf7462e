#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "alignet/corpus.hpp"
#include "alignet/errors.hpp"
#include "alignet/io.hpp"
#include "alignet/rng.hpp"
#include "alignet/sentiment.hpp"

namespace alignet {

// Planted-structure generator settings. All pair matrices are indexed
// [from group][to group] over ordered user pairs.
struct SynthConfig {
    std::vector<std::size_t> group_sizes;
    std::vector<std::vector<double>> mention_rates;    // expected mentions per ordered user pair
    std::vector<std::vector<double>> follow_probs;     // P(directed follow) per ordered user pair
    std::vector<std::vector<double>> sentiment_means;  // mean difference score per pair
    double sentiment_noise = 0.0;
    std::vector<std::vector<std::array<double, 3>>> kind_mix;  // (original, reply, retweet)
    int days = 1;
    std::uint64_t seed = 0;
};

inline void validate_synth_config(const SynthConfig& c) {
    if (c.group_sizes.empty()) throw ArgumentError("synth: group_sizes must be non-empty");
    for (std::size_t s : c.group_sizes)
        if (s == 0) throw ArgumentError("synth: group sizes must be positive");
    const std::size_t g = c.group_sizes.size();
    auto check_matrix = [g](const auto& m, const char* name) {
        if (m.size() != g) throw ArgumentError(std::string("synth: ") + name + " must be a group matrix");
        for (const auto& row : m)
            if (row.size() != g)
                throw ArgumentError(std::string("synth: ") + name + " must be a group matrix");
    };
    check_matrix(c.mention_rates, "mention_rates");
    check_matrix(c.follow_probs, "follow_probs");
    check_matrix(c.sentiment_means, "sentiment_means");
    check_matrix(c.kind_mix, "kind_mix");
    for (const auto& row : c.mention_rates)
        for (double v : row)
            if (!(v >= 0.0)) throw ArgumentError("synth: mention rates must be >= 0");
    for (const auto& row : c.follow_probs)
        for (double v : row)
            if (!(v >= 0.0 && v <= 1.0)) throw ArgumentError("synth: follow probabilities must be in [0,1]");
    for (const auto& row : c.sentiment_means)
        for (double v : row)
            if (!(v >= -4.0 && v <= 4.0)) throw ArgumentError("synth: sentiment means must be in [-4,4]");
    for (const auto& row : c.kind_mix)
        for (const auto& mix : row) {
            double sum = 0.0;
            for (double p : mix) {
                if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("synth: kind mix entries must be in [0,1]");
                sum += p;
            }
            if (std::abs(sum - 1.0) > 1e-9) throw ArgumentError("synth: kind mix must sum to 1");
        }
    if (!(c.sentiment_noise >= 0.0)) throw ArgumentError("synth: sentiment noise must be >= 0");
    if (c.days < 1) throw ArgumentError("synth: days must be positive");
}

// Template words matched to the test lexicon strengths. Positive 1 and
// negative -1 are the defaults, rendered by omitting the term.
inline const char* positive_word(int pos) {
    switch (pos) {
        case 2: return "fine";
        case 3: return "good";
        case 4: return "great";
        case 5: return "fantastic";
        default: throw ArgumentError("positive_word: strength must be in [2,5]");
    }
}

inline const char* negative_word(int neg) {
    switch (neg) {
        case -2: return "meh";
        case -3: return "bad";
        case -4: return "awful";
        case -5: return "horrendous";
        default: throw ArgumentError("negative_word: strength must be in [-5,-2]");
    }
}

// Renders a message whose sentiment scores are exactly (pos, neg): single
// unboosted terms, no negations, no emphasis.
inline std::string make_text(int pos, int neg, const std::string& target) {
    if (pos < 1 || pos > 5) throw ArgumentError("make_text: positive score must be in [1,5]");
    if (neg < -5 || neg > -1) throw ArgumentError("make_text: negative score must be in [-5,-1]");
    std::string text = "@" + target;
    if (pos > 1) text += std::string(" ") + positive_word(pos);
    if (neg < -1) text += std::string(" ") + negative_word(neg);
    return text;
}

// Planted difference score to a (pos, neg) template cell.
inline std::pair<int, int> score_template(int difference) {
    if (difference < -4 || difference > 4)
        throw ArgumentError("score_template: difference must be in [-4,4]");
    if (difference >= 0) return {difference + 1, -1};
    return {1, difference - 1};
}

struct SynthOutput {
    Corpus corpus;
    FollowerEdgeList followers;
    std::map<std::string, int> groups;  // every generated user, including silent ones
};

namespace detail {

struct PairDraw {
    std::vector<std::array<std::int64_t, 4>> messages;  // kind, pos, neg, ts
    bool follow = false;
};

}  // namespace detail

inline SynthOutput generate(const SynthConfig& config, unsigned threads = 1) {
    validate_synth_config(config);
    std::vector<std::string> users;
    std::vector<int> group_of;
    for (std::size_t g = 0; g < config.group_sizes.size(); ++g)
        for (std::size_t i = 0; i < config.group_sizes[g]; ++i) {
            std::string id = std::to_string(users.size() + 1);
            users.push_back("u" + std::string(5 - std::min<std::size_t>(5, id.size()), '0') + id);
            group_of.push_back(static_cast<int>(g));
        }
    const std::size_t n = users.size();
    const std::int64_t span = static_cast<std::int64_t>(config.days) * 86400;
    const std::uint64_t mention_seed = substream_seed(config.seed, 0);
    const std::uint64_t follow_seed = substream_seed(config.seed, 1);

    std::vector<detail::PairDraw> draws(n * n);
    parallel_for(n * n, threads, [&](std::size_t p) {
        const std::size_t a = p / n, b = p % n;
        if (a == b) return;
        auto& d = draws[p];
        const int ga = group_of[a], gb = group_of[b];
        {
            auto rng = make_rng(mention_seed, p);
            const double rate = config.mention_rates[ga][gb];
            std::size_t count = 0;
            if (rate > 0.0) {
                std::poisson_distribution<int> pois(rate);
                count = static_cast<std::size_t>(std::max(0, pois(rng)));
            }
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            std::uniform_int_distribution<std::int64_t> when(0, span - 1);
            const auto& mix = config.kind_mix[ga][gb];
            for (std::size_t i = 0; i < count; ++i) {
                double u = unit(rng);
                std::int64_t kind = u < mix[0] ? 0 : (u < mix[0] + mix[1] ? 1 : 2);
                double v = config.sentiment_means[ga][gb];
                if (config.sentiment_noise > 0.0) {
                    std::normal_distribution<double> noise(0.0, config.sentiment_noise);
                    v += noise(rng);
                }
                int diff = static_cast<int>(std::llround(std::clamp(v, -4.0, 4.0)));
                auto [pos, neg] = score_template(diff);
                d.messages.push_back({kind, pos, neg, when(rng)});
            }
        }
        {
            auto rng = make_rng(follow_seed, p);
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            d.follow = unit(rng) < config.follow_probs[ga][gb];
        }
    });

    SynthOutput out;
    for (std::size_t i = 0; i < n; ++i) out.groups[users[i]] = group_of[i];
    std::size_t next_id = 1;
    for (std::size_t p = 0; p < n * n; ++p) {
        const std::size_t a = p / n, b = p % n;
        for (const auto& [kind, pos, neg, ts] : draws[p].messages) {
            Message m;
            std::string num = std::to_string(next_id++);
            m.id = "m" + std::string(6 - std::min<std::size_t>(6, num.size()), '0') + num;
            m.author = users[a];
            m.ts = ts;
            m.text = make_text(static_cast<int>(pos), static_cast<int>(neg), users[b]);
            m.kind = static_cast<Kind>(kind);
            if (m.kind == Kind::reply) m.reply_to = "re_" + users[b];
            if (m.kind == Kind::retweet) m.retweet_of = users[b];
            m.mentions = {users[b]};
            out.corpus.messages.push_back(std::move(m));
        }
        if (draws[p].follow) out.followers.edges.push_back({users[a], users[b]});
    }
    std::stable_sort(out.corpus.messages.begin(), out.corpus.messages.end(),
                     [](const Message& x, const Message& y) {
                         return x.ts != y.ts ? x.ts < y.ts : x.id < y.id;
                     });
    for (const auto& m : out.corpus.messages) out.corpus.users.insert(m.author);
    return out;
}

struct RoundtripReport {
    std::size_t messages = 0;
    std::size_t mismatches = 0;
    std::size_t template_cells = 0;
    std::size_t template_failures = 0;
    std::vector<std::string> details;  // first offending templates

    bool ok() const { return mismatches == 0 && template_failures == 0; }
};

// Regenerates the corpus and rescores every message plus every (pos, neg)
// template cell, checking that scoring recovers the planted values exactly.
inline RoundtripReport verify_roundtrip(const SynthConfig& config, const Lexicon& lexicon,
                                        unsigned threads = 1) {
    RoundtripReport report;
    for (int pos = 1; pos <= 5; ++pos)
        for (int neg = -5; neg <= -1; ++neg) {
            report.template_cells += 1;
            auto s = score_text(lexicon, make_text(pos, neg, "someone"));
            if (s.positive != pos || s.negative != neg) {
                report.template_failures += 1;
                if (report.details.size() < 20)
                    report.details.push_back("template (" + std::to_string(pos) + "," +
                                             std::to_string(neg) + ") scored (" +
                                             std::to_string(s.positive) + "," +
                                             std::to_string(s.negative) + ")");
            }
        }
    auto out = generate(config, threads);
    auto scores = score_corpus(lexicon, out.corpus, threads);
    report.messages = out.corpus.messages.size();
    for (const auto& m : out.corpus.messages) {
        // The planted cell is recoverable from the text itself.
        auto planted = score_text(lexicon, m.text);
        const auto& actual = scores.at(m.id);
        if (actual.positive != planted.positive || actual.negative != planted.negative) {
            report.mismatches += 1;
            if (report.details.size() < 20)
                report.details.push_back("message " + m.id + ": '" + m.text + "'");
        }
    }
    return report;
}

inline std::string serialize_groups(const std::map<std::string, int>& groups) {
    std::string out = "user,group\n";
    for (const auto& [u, g] : groups) out += u + "," + std::to_string(g) + "\n";
    return out;
}

inline std::map<std::string, int> parse_groups_text(const std::string& text) {
    std::map<std::string, int> out;
    bool header_seen = false;
    for_each_line(text, [&](std::string_view line, std::size_t line_no) {
        if (!header_seen) {
            if (line != "user,group")
                throw ValidationError("groups: bad header at line " + std::to_string(line_no));
            header_seen = true;
            return;
        }
        auto fields = split_csv_line(line);
        if (fields.size() != 2)
            throw ValidationError("groups: expected 2 fields at line " + std::to_string(line_no));
        out[std::string(fields[0])] = parse_int(fields[1], line_no);
    });
    if (!header_seen) throw ValidationError("groups: empty file");
    return out;
}

inline std::map<std::string, int> parse_groups(const std::string& path) {
    return parse_groups_text(read_file(path));
}

inline SynthConfig load_synth_config_json(const nlohmann::json& j) {
    SynthConfig c;
    try {
        c.group_sizes = j.at("group_sizes").get<std::vector<std::size_t>>();
        c.mention_rates = j.at("mention_rates").get<std::vector<std::vector<double>>>();
        c.follow_probs = j.at("follow_probs").get<std::vector<std::vector<double>>>();
        c.sentiment_means = j.at("sentiment_means").get<std::vector<std::vector<double>>>();
        c.sentiment_noise = j.at("sentiment_noise").get<double>();
        c.days = j.at("days").get<int>();
        c.seed = j.at("seed").get<std::uint64_t>();
        const std::size_t g = c.group_sizes.size();
        if (j.contains("kind_mix_matrix")) {
            auto m = j.at("kind_mix_matrix").get<std::vector<std::vector<std::array<double, 3>>>>();
            c.kind_mix = std::move(m);
        } else {
            auto mix = j.at("kind_mix").get<std::array<double, 3>>();
            c.kind_mix.assign(g, std::vector<std::array<double, 3>>(g, mix));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("synth config: ") + e.what());
    }
    validate_synth_config(c);
    return c;
}

inline SynthConfig load_synth_config_text(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ValidationError("synth config: invalid JSON");
    return load_synth_config_json(j);
}

inline SynthConfig load_synth_config(const std::string& path) {
    return load_synth_config_text(read_file(path));
}

}  // namespace alignet

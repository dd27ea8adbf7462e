#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "alignet/errors.hpp"
#include "alignet/io.hpp"

namespace alignet {

enum class Kind { original, reply, retweet };

inline const char* to_string(Kind k) {
    switch (k) {
        case Kind::original: return "original";
        case Kind::reply: return "reply";
        default: return "retweet";
    }
}

struct Message {
    std::string id;
    std::string author;  // lowercased
    std::int64_t ts = 0;
    std::string text;
    Kind kind = Kind::original;
    std::vector<std::string> mentions;  // lowercased, deduplicated, first occurrence order
    std::vector<std::string> hashtags;  // lowercased, '#' stripped
    std::optional<std::string> reply_to;
    std::optional<std::string> retweet_of;
};

struct Corpus {
    std::vector<Message> messages;   // sorted by (ts, id)
    std::set<std::string> users;     // distinct authors
};

struct RejectRecord {
    std::size_t line = 0;
    std::string reason;
};

struct IngestReport {
    std::size_t total_records = 0;  // non-blank input lines
    std::size_t accepted = 0;
    std::vector<RejectRecord> rejects;
    std::size_t kind_conflicts = 0;  // records carrying both reply_to and retweet_of
};

struct ParseOptions {
    // When a record carries an explicit "mentions" array it wins over text
    // extraction; set false to always re-derive mentions from the text.
    bool use_mention_entities = true;
};

struct ParseResult {
    Corpus corpus;
    IngestReport report;
};

inline std::string to_lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

inline bool is_handle_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

// Mentions are tokens that start with '@' followed by 1-15 handle characters
// [A-Za-z0-9_]; the match stops at the first non-handle character or at 15
// characters. '@' inside a token (e.g. an email address) is not a mention.
inline std::vector<std::string> extract_mentions(const std::string& text) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        const std::size_t start = i;
        while (i < n && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (start < i && text[start] == '@') {
            std::string handle;
            for (std::size_t j = start + 1; j < i && handle.size() < 15 && is_handle_char(text[j]); ++j)
                handle += text[j];
            if (!handle.empty()) {
                handle = to_lower(handle);
                if (seen.insert(handle).second) out.push_back(handle);
            }
        }
    }
    return out;
}

// '#'-token extraction, used when a record has no explicit hashtags field.
inline std::vector<std::string> extract_hashtags(const std::string& text) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        const std::size_t start = i;
        while (i < n && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (start < i && text[start] == '#') {
            std::string tag;
            for (std::size_t j = start + 1; j < i && is_handle_char(text[j]); ++j) tag += text[j];
            if (!tag.empty()) {
                tag = to_lower(tag);
                if (seen.insert(tag).second) out.push_back(tag);
            }
        }
    }
    return out;
}

// retweet_of wins when both markers are present (the caller counts that
// conflict as a warning).
inline Kind classify_kind(const std::optional<std::string>& reply_to,
                          const std::optional<std::string>& retweet_of) {
    if (retweet_of) return Kind::retweet;
    if (reply_to) return Kind::reply;
    return Kind::original;
}

namespace detail {

inline std::optional<std::string> optional_id_field(const nlohmann::json& rec, const char* key,
                                                    bool& bad) {
    auto it = rec.find(key);
    if (it == rec.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) {
        bad = true;
        return std::nullopt;
    }
    std::string v = to_lower(it->get<std::string>());
    if (v.empty()) return std::nullopt;
    return v;
}

inline std::vector<std::string> normalize_id_list(const std::vector<std::string>& raw, char strip) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const std::string& r : raw) {
        std::string v = r;
        if (!v.empty() && v[0] == strip) v.erase(0, 1);
        v = to_lower(v);
        if (v.empty()) continue;
        if (seen.insert(v).second) out.push_back(v);
    }
    return out;
}

}  // namespace detail

// Parses line-delimited JSON records. Per-record failures are collected into
// the report; the whole parse fails only for an unreadable file or when more
// than half of the records are rejected.
inline ParseResult parse_corpus_text(const std::string& jsonl, const ParseOptions& options = {}) {
    ParseResult result;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    auto reject = [&](std::size_t line, std::string reason) {
        result.report.rejects.push_back({line, std::move(reason)});
    };
    while (pos <= jsonl.size() && pos != std::string::npos && pos < jsonl.size()) {
        std::size_t end = jsonl.find('\n', pos);
        std::string line = jsonl.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
        pos = (end == std::string::npos) ? jsonl.size() : end + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        ++result.report.total_records;

        nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object()) {
            reject(line_no, "malformed JSON");
            continue;
        }

        Message m;
        auto id = rec.find("id");
        if (id == rec.end() || !id->is_string() || id->get<std::string>().empty()) {
            reject(line_no, "missing or invalid id");
            continue;
        }
        m.id = id->get<std::string>();
        auto author = rec.find("author");
        if (author == rec.end() || !author->is_string() || author->get<std::string>().empty()) {
            reject(line_no, "missing or invalid author");
            continue;
        }
        m.author = to_lower(author->get<std::string>());
        auto ts = rec.find("ts");
        if (ts == rec.end() || !ts->is_number_integer()) {
            reject(line_no, "missing or invalid ts");
            continue;
        }
        m.ts = ts->get<std::int64_t>();
        auto text = rec.find("text");
        if (text == rec.end() || !text->is_string()) {
            reject(line_no, "missing or invalid text");
            continue;
        }
        m.text = text->get<std::string>();

        bool bad_ref = false;
        m.reply_to = detail::optional_id_field(rec, "reply_to", bad_ref);
        m.retweet_of = detail::optional_id_field(rec, "retweet_of", bad_ref);
        if (bad_ref) {
            reject(line_no, "invalid reply_to/retweet_of");
            continue;
        }
        if (m.reply_to && m.retweet_of) ++result.report.kind_conflicts;
        m.kind = classify_kind(m.reply_to, m.retweet_of);

        auto mentions = rec.find("mentions");
        if (options.use_mention_entities && mentions != rec.end() && !mentions->is_null()) {
            if (!mentions->is_array()) {
                reject(line_no, "invalid mentions");
                continue;
            }
            std::vector<std::string> raw;
            bool ok = true;
            for (const auto& e : *mentions) {
                if (!e.is_string()) {
                    ok = false;
                    break;
                }
                raw.push_back(e.get<std::string>());
            }
            if (!ok) {
                reject(line_no, "invalid mentions");
                continue;
            }
            m.mentions = detail::normalize_id_list(raw, '@');
        } else {
            m.mentions = extract_mentions(m.text);
        }

        auto hashtags = rec.find("hashtags");
        if (hashtags != rec.end() && !hashtags->is_null()) {
            if (!hashtags->is_array()) {
                reject(line_no, "invalid hashtags");
                continue;
            }
            std::vector<std::string> raw;
            bool ok = true;
            for (const auto& e : *hashtags) {
                if (!e.is_string()) {
                    ok = false;
                    break;
                }
                raw.push_back(e.get<std::string>());
            }
            if (!ok) {
                reject(line_no, "invalid hashtags");
                continue;
            }
            m.hashtags = detail::normalize_id_list(raw, '#');
        } else {
            m.hashtags = extract_hashtags(m.text);
        }

        // A retweet always mentions the retweeted author; platform rendering
        // puts that handle first.
        if (m.kind == Kind::retweet) {
            const std::string& src = *m.retweet_of;
            if (std::find(m.mentions.begin(), m.mentions.end(), src) == m.mentions.end())
                m.mentions.insert(m.mentions.begin(), src);
        }

        result.corpus.messages.push_back(std::move(m));
        ++result.report.accepted;
    }

    if (result.report.total_records > 0 &&
        result.report.rejects.size() * 2 > result.report.total_records) {
        throw ValidationError("corrupt input: " + std::to_string(result.report.rejects.size()) +
                              " of " + std::to_string(result.report.total_records) +
                              " records rejected");
    }

    std::stable_sort(result.corpus.messages.begin(), result.corpus.messages.end(),
                     [](const Message& a, const Message& b) {
                         if (a.ts != b.ts) return a.ts < b.ts;
                         return a.id < b.id;
                     });
    for (const Message& m : result.corpus.messages) result.corpus.users.insert(m.author);
    return result;
}

inline ParseResult parse_corpus(const std::string& path, const ParseOptions& options = {}) {
    return parse_corpus_text(read_file(path), options);
}

// Canonical JSONL: fixed field order, explicit mention/hashtag entities, one
// compact object per line. parse(serialize(parse(x))) == parse(x).
inline std::string serialize_corpus(const Corpus& corpus) {
    std::string out;
    for (const Message& m : corpus.messages) {
        nlohmann::ordered_json rec;
        rec["id"] = m.id;
        rec["author"] = m.author;
        rec["ts"] = m.ts;
        rec["text"] = m.text;
        if (m.reply_to) rec["reply_to"] = *m.reply_to;
        if (m.retweet_of) rec["retweet_of"] = *m.retweet_of;
        rec["mentions"] = m.mentions;
        rec["hashtags"] = m.hashtags;
        out += rec.dump();
        out += '\n';
    }
    return out;
}

// Restricts to the half-open window [t0, t1).
inline Corpus filter_window(const Corpus& corpus, std::int64_t t0, std::int64_t t1) {
    if (t0 > t1) throw ArgumentError("filter_window: t0 > t1");
    Corpus out;
    for (const Message& m : corpus.messages)
        if (m.ts >= t0 && m.ts < t1) out.messages.push_back(m);
    for (const Message& m : out.messages) out.users.insert(m.author);
    return out;
}

// Keeps messages tagged with at least one of the given hashtags.
inline Corpus filter_hashtags(const Corpus& corpus, const std::vector<std::string>& tags) {
    if (tags.empty()) throw ArgumentError("filter_hashtags: empty tag list");
    std::set<std::string> wanted;
    for (const std::string& t : tags) {
        std::string v = t;
        if (!v.empty() && v[0] == '#') v.erase(0, 1);
        v = to_lower(v);
        if (!v.empty()) wanted.insert(v);
    }
    if (wanted.empty()) throw ArgumentError("filter_hashtags: empty tag list");
    Corpus out;
    for (const Message& m : corpus.messages) {
        bool hit = false;
        for (const std::string& h : m.hashtags)
            if (wanted.count(h)) {
                hit = true;
                break;
            }
        if (hit) out.messages.push_back(m);
    }
    for (const Message& m : out.messages) out.users.insert(m.author);
    return out;
}

// Directed follower edges (follower -> followee), deduplicated, self-loops
// dropped, kept sorted for canonical output.
struct FollowerEdgeList {
    std::vector<std::pair<std::string, std::string>> edges;
};

inline FollowerEdgeList parse_followers_text(const std::string& csv) {
    FollowerEdgeList out;
    std::set<std::pair<std::string, std::string>> seen;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool header_seen = false;
    while (pos < csv.size()) {
        std::size_t end = csv.find('\n', pos);
        std::string line = csv.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
        pos = (end == std::string::npos) ? csv.size() : end + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto fields = split_csv_line(line);
        if (!header_seen) {
            if (fields.size() != 2 || to_lower(fields[0]) != "follower" ||
                to_lower(fields[1]) != "followee")
                throw ValidationError("follower file: expected header 'follower,followee'");
            header_seen = true;
            continue;
        }
        if (fields.size() != 2 || fields[0].empty() || fields[1].empty())
            throw ValidationError("follower file: malformed row at line " + std::to_string(line_no));
        std::string a = to_lower(fields[0]);
        std::string b = to_lower(fields[1]);
        if (a == b) continue;
        seen.insert({a, b});
    }
    if (!header_seen) throw ValidationError("follower file: missing header");
    out.edges.assign(seen.begin(), seen.end());
    return out;
}

inline FollowerEdgeList parse_followers(const std::string& path) {
    return parse_followers_text(read_file(path));
}

inline std::string serialize_followers(const FollowerEdgeList& list) {
    std::string out = "follower,followee\n";
    for (const auto& e : list.edges)
        out += csv_escape(e.first) + "," + csv_escape(e.second) + "\n";
    return out;
}

}  // namespace alignet

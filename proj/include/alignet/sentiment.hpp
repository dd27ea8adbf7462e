#pragma once

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "alignet/corpus.hpp"
#include "alignet/errors.hpp"
#include "alignet/io.hpp"

namespace alignet {

// Dual-polarity score: positive in [1,5], negative in [-5,-1]. (1,-1) means
// no sentiment; difference() folds both into a single value in [-4,4].
struct SentimentScore {
    int positive = 1;
    int negative = -1;
    int difference() const { return positive + negative; }
    bool operator==(const SentimentScore& o) const {
        return positive == o.positive && negative == o.negative;
    }
};

struct TermEntry {
    int strength = 0;  // in [-5,-2] or [2,5]
    bool stem = false;
};

// Term/booster/negation table. Terms carry integer strengths; stem terms
// match any token they prefix, exact terms match whole tokens only.
class Lexicon {
public:
    void add_term(const std::string& word, int strength, bool stem) {
        const std::string w = to_lower(word);
        check_new_key(w, stem ? stems_ : exact_, "term");
        const int mag = std::abs(strength);
        if (mag < 2 || mag > 5)
            throw ValidationError("lexicon term '" + w + "': strength " +
                                  std::to_string(strength) + " outside +-[2,5]");
        (stem ? stems_ : exact_)[w] = TermEntry{strength, stem};
        if (stem) max_stem_len_ = std::max(max_stem_len_, w.size());
    }

    void add_booster(const std::string& word, int value) {
        const std::string w = to_lower(word);
        check_new_key(w, boosters_, "booster");
        if (value == 0 || value < -2 || value > 2)
            throw ValidationError("lexicon booster '" + w + "': value " + std::to_string(value) +
                                  " outside {-2,-1,1,2}");
        boosters_[w] = value;
    }

    void add_negation(const std::string& word) {
        const std::string w = to_lower(word);
        if (negations_.count(w)) throw ValidationError("lexicon duplicate negation '" + w + "'");
        check_cross_category(w, "negation");
        negations_.insert(w);
    }

    // Exact match first, else the longest stem that prefixes the token.
    const TermEntry* match_term(const std::string& token) const {
        auto it = exact_.find(token);
        if (it != exact_.end()) return &it->second;
        std::size_t len = std::min(token.size(), max_stem_len_);
        for (; len >= 1; --len) {
            auto st = stems_.find(token.substr(0, len));
            if (st != stems_.end()) return &st->second;
        }
        return nullptr;
    }

    std::optional<int> booster(const std::string& token) const {
        auto it = boosters_.find(token);
        if (it == boosters_.end()) return std::nullopt;
        return it->second;
    }

    bool is_negation(const std::string& token) const { return negations_.count(token) > 0; }

    std::size_t term_count() const { return exact_.size() + stems_.size(); }

private:
    template <class Map>
    void check_new_key(const std::string& w, const Map& target, const char* category) {
        if (w.empty()) throw ValidationError("lexicon: empty word");
        if (target.count(w))
            throw ValidationError(std::string("lexicon duplicate ") + category + " '" + w + "'");
        check_cross_category(w, category);
    }

    void check_cross_category(const std::string& w, const char* category) {
        const bool in_terms = exact_.count(w) || stems_.count(w);
        const bool in_boosters = boosters_.count(w) > 0;
        const bool in_negations = negations_.count(w) > 0;
        const std::string cat(category);
        if ((in_terms && cat != "term") || (in_boosters && cat != "booster") ||
            (in_negations && cat != "negation"))
            throw ValidationError("lexicon term '" + w + "' appears in more than one category");
    }

    std::map<std::string, TermEntry> exact_;
    std::map<std::string, TermEntry> stems_;
    std::map<std::string, int> boosters_;
    std::set<std::string> negations_;
    std::size_t max_stem_len_ = 0;
};

// TSV rows: term<TAB>class<TAB>value, class in {term, booster, negation}.
// Term rows ending in '*' are stems. Negation rows carry an empty value.
inline Lexicon load_lexicon_text(const std::string& tsv) {
    Lexicon lex;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < tsv.size()) {
        std::size_t end = tsv.find('\n', pos);
        std::string line = tsv.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
        pos = (end == std::string::npos) ? tsv.size() : end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;

        std::vector<std::string> cols;
        std::size_t p = 0;
        while (true) {
            std::size_t tab = line.find('\t', p);
            cols.push_back(line.substr(p, tab == std::string::npos ? std::string::npos : tab - p));
            if (tab == std::string::npos) break;
            p = tab + 1;
        }
        auto fail = [&](const std::string& why) {
            throw ValidationError("lexicon line " + std::to_string(line_no) + ": " + why);
        };
        if (cols.size() < 2 || cols.size() > 3) fail("expected term<TAB>class<TAB>value");
        std::string word = cols[0];
        const std::string cls = cols[1];
        const std::string value = cols.size() == 3 ? cols[2] : std::string();
        if (word.empty()) fail("empty term");

        bool stem = false;
        if (word.back() == '*') {
            stem = true;
            word.pop_back();
            if (word.empty()) fail("empty stem");
        }
        if (cls == "term") {
            if (value.empty()) fail("term without value");
            lex.add_term(word, parse_int(value, line_no), stem);
        } else if (cls == "booster") {
            if (stem) fail("booster cannot be a stem");
            if (value.empty()) fail("booster without value");
            lex.add_booster(word, parse_int(value, line_no));
        } else if (cls == "negation") {
            if (stem) fail("negation cannot be a stem");
            if (!value.empty()) fail("negation with value");
            lex.add_negation(word);
        } else {
            fail("unknown class '" + cls + "'");
        }
    }
    return lex;
}

inline Lexicon load_lexicon(const std::string& path) { return load_lexicon_text(read_file(path)); }

struct Token {
    std::string word;
    bool emphasis = false;
};

// Lowercases, deletes ASCII punctuation in place (so punctuation insertion
// never changes a score), splits on whitespace, and collapses any letter run
// of length >= 3 down to two letters, flagging the token as emphasised
// ("Goooood!!" -> good, emphasis). Bytes >= 0x80 pass through untouched.
inline std::vector<Token> normalize_tokens(const std::string& text) {
    std::vector<Token> tokens;
    Token cur;
    bool pending = false;
    auto flush = [&]() {
        if (!cur.word.empty()) {
            tokens.push_back(cur);
        }
        cur = Token{};
        pending = false;
    };
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i <= n) {
        if (i == n || std::isspace(static_cast<unsigned char>(text[i]))) {
            flush();
            ++i;
            continue;
        }
        const unsigned char uc = static_cast<unsigned char>(text[i]);
        if (uc < 0x80 && std::ispunct(uc)) {
            ++i;
            continue;
        }
        char c = static_cast<char>(std::tolower(uc));
        if (uc < 0x80 && std::isalpha(uc)) {
            std::size_t run = 1;
            while (i + run < n &&
                   std::tolower(static_cast<unsigned char>(text[i + run])) ==
                       static_cast<unsigned char>(c) &&
                   std::isalpha(static_cast<unsigned char>(text[i + run])))
                ++run;
            if (run >= 3) {
                cur.word += c;
                cur.word += c;
                cur.emphasis = true;
            } else {
                cur.word.append(run, c);
            }
            i += run;
        } else {
            cur.word += c;
            ++i;
        }
        pending = true;
    }
    (void)pending;
    return tokens;
}

// Applies term matching plus the three adjustment rules, then aggregates by
// polarity with max magnitude. Rule windows look at the 2 preceding tokens:
// boosters found there stack additively onto |s|; the nearest negation flips
// the sign once (a second negation in the window is ignored, so a double
// negative stays negated). Emphasis adds 1 to |s| before boosters. Each
// adjusted strength is clamped to magnitude [1,5] before aggregation.
inline SentimentScore score_text(const Lexicon& lexicon, const std::string& text) {
    const std::vector<Token> tokens = normalize_tokens(text);
    SentimentScore score;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const TermEntry* term = lexicon.match_term(tokens[i].word);
        if (!term) continue;
        int magnitude = std::abs(term->strength);
        int sign = term->strength > 0 ? 1 : -1;
        if (tokens[i].emphasis) magnitude += 1;
        for (std::size_t back = 1; back <= 2 && back <= i; ++back) {
            if (auto b = lexicon.booster(tokens[i - back].word)) magnitude += *b;
        }
        for (std::size_t back = 1; back <= 2 && back <= i; ++back) {
            if (lexicon.is_negation(tokens[i - back].word)) {
                sign = -sign;
                break;
            }
        }
        magnitude = std::clamp(magnitude, 1, 5);
        const int adjusted = sign * magnitude;
        if (adjusted > 0)
            score.positive = std::max(score.positive, adjusted);
        else
            score.negative = std::min(score.negative, adjusted);
    }
    return score;
}

// Scores every message; keyed by message id.
inline std::map<std::string, SentimentScore> score_corpus(const Lexicon& lexicon,
                                                          const Corpus& corpus,
                                                          unsigned threads = 1) {
    std::vector<SentimentScore> scores(corpus.messages.size());
    parallel_for(corpus.messages.size(), threads,
                 [&](std::size_t i) { scores[i] = score_text(lexicon, corpus.messages[i].text); });
    std::map<std::string, SentimentScore> out;
    for (std::size_t i = 0; i < corpus.messages.size(); ++i)
        out[corpus.messages[i].id] = scores[i];
    return out;
}

inline std::string serialize_scores(const std::map<std::string, SentimentScore>& scores) {
    std::string out = "id,positive,negative,difference\n";
    for (const auto& [id, s] : scores)
        out += csv_escape(id) + "," + std::to_string(s.positive) + "," +
               std::to_string(s.negative) + "," + std::to_string(s.difference()) + "\n";
    return out;
}

inline std::map<std::string, SentimentScore> parse_scores_text(const std::string& csv) {
    std::map<std::string, SentimentScore> out;
    std::size_t pos = 0;
    bool header = false;
    std::size_t line_no = 0;
    while (pos < csv.size()) {
        std::size_t end = csv.find('\n', pos);
        std::string line = csv.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
        pos = (end == std::string::npos) ? csv.size() : end + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (!header) {
            header = true;
            continue;
        }
        auto f = split_csv_line(line);
        if (f.size() != 4) throw ValidationError("scores: malformed row at line " + std::to_string(line_no));
        SentimentScore s;
        s.positive = parse_int(f[1], line_no);
        s.negative = parse_int(f[2], line_no);
        out[f[0]] = s;
    }
    return out;
}

inline std::map<std::string, SentimentScore> parse_scores(const std::string& path) {
    return parse_scores_text(read_file(path));
}

}  // namespace alignet

#pragma once

// parse.hpp — deterministic extraction of prediction lists and feature
// rankings from raw completion text, plus positional alignment to ground
// truth. Total functions: malformed input degrades scores, it never aborts.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stads/common.hpp"
#include "stads/corpus.hpp"

namespace stads::parse {

using corpus::FeatureSpec;
using corpus::LabelEncoding;

// ---------------------------------------------------------------------------
// domain types
// ---------------------------------------------------------------------------

enum class extraction_note { clean, salvaged, empty };

struct PredictionList {
    std::vector<long long> values;          // length n_p, unknown labels kept
    std::set<std::size_t> unknown_positions;  // indices with value outside Y_valid
    extraction_note note = extraction_note::empty;

    std::size_t n_p() const { return values.size(); }
    bool operator==(const PredictionList&) const = default;
};

enum class drop_reason { unknown_name, duplicate, label_token };

struct RankingList {
    std::vector<std::string> names;  // schema spelling, distinct, never `class`
    std::vector<std::pair<std::string, drop_reason>> dropped;

    bool operator==(const RankingList&) const = default;
};

struct AlignedPairs {
    std::vector<std::pair<long long, int>> pairs;  // first n_a (prediction, truth)
    std::size_t n_p = 0;
    std::size_t n_g = 0;

    std::size_t n_a() const { return pairs.size(); }
};

// ---------------------------------------------------------------------------
// prediction extraction
// ---------------------------------------------------------------------------

namespace detail {

// try to read `[ int (, int)* ]` starting at the '[' found at `open`;
// returns the values when the bracketed span is a well-formed integer list
inline std::optional<std::vector<long long>> read_bracket_list(
    std::string_view text, std::size_t open) {
    const std::size_t close = text.find(']', open + 1);
    if (close == std::string_view::npos) return std::nullopt;
    std::string_view body = text.substr(open + 1, close - open - 1);
    if (body.find('[') != std::string_view::npos) return std::nullopt;

    std::vector<long long> vals;
    std::size_t start = 0;
    while (start <= body.size()) {
        std::size_t comma = body.find(',', start);
        std::string_view item = comma == std::string_view::npos
                                    ? body.substr(start)
                                    : body.substr(start, comma - start);
        long long v;
        if (!parse_long(item, v)) return std::nullopt;
        vals.push_back(v);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    if (vals.empty()) return std::nullopt;
    return vals;
}

inline bool ident_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
           (c >= '0' && c <= '9') || c == '_';
}

// all standalone integers in reading order: digit runs not glued to
// identifiers and not part of decimal numbers; a leading '-' binds only when
// the character before it is neither alphanumeric nor '_' nor a digit
inline std::vector<long long> salvage_integers(std::string_view text) {
    std::vector<long long> out;
    std::size_t i = 0;
    while (i < text.size()) {
        if (!(text[i] >= '0' && text[i] <= '9')) {
            ++i;
            continue;
        }
        std::size_t begin = i;
        while (i < text.size() && text[i] >= '0' && text[i] <= '9') ++i;
        std::size_t end = i;

        bool negative = false;
        std::size_t token_begin = begin;
        if (begin > 0 && text[begin - 1] == '-') {
            const bool sign_ok = begin < 2 || !ident_char(text[begin - 2]);
            if (sign_ok) {
                negative = true;
                token_begin = begin - 1;
            }
        }

        // glued to an identifier on either side -> not standalone
        bool reject = false;
        if (token_begin > 0 && ident_char(text[token_begin - 1])) reject = true;
        if (end < text.size() && ident_char(text[end])) reject = true;
        // part of a decimal: digits '.' digits
        if (!reject && end < text.size() && text[end] == '.' &&
            end + 1 < text.size() && text[end + 1] >= '0' && text[end + 1] <= '9')
            reject = true;
        if (!reject && begin > 0 && text[begin - 1] == '.' && begin > 1 &&
            text[begin - 2] >= '0' && text[begin - 2] <= '9')
            reject = true;

        if (!reject) {
            long long v;
            std::string token(text.substr(token_begin, end - token_begin));
            if (parse_long(token, v)) out.push_back(v);  // overflow runs skipped
            (void)negative;
        }
    }
    return out;
}

}  // namespace detail

inline PredictionList parse_predictions(std::string_view raw,
                                        const LabelEncoding& labels) {
    PredictionList out;

    // tier 1: first well-formed bracketed comma-separated integer list wins
    for (std::size_t pos = raw.find('['); pos != std::string_view::npos;
         pos = raw.find('[', pos + 1)) {
        if (auto vals = detail::read_bracket_list(raw, pos)) {
            out.values = std::move(*vals);
            out.note = extraction_note::clean;
            break;
        }
    }
    // tier 2: salvage standalone integers in reading order
    if (out.values.empty()) {
        out.values = detail::salvage_integers(raw);
        out.note = out.values.empty() ? extraction_note::empty
                                      : extraction_note::salvaged;
    }
    for (std::size_t i = 0; i < out.values.size(); ++i)
        if (!labels.valid_code(out.values[i])) out.unknown_positions.insert(i);
    return out;
}

inline std::string serialize_predictions(const PredictionList& p) {
    std::string out = "[";
    for (std::size_t i = 0; i < p.values.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(p.values[i]);
    }
    out += "]";
    return out;
}

// ---------------------------------------------------------------------------
// feature-ranking extraction
// ---------------------------------------------------------------------------

namespace detail {

inline std::string strip_quotes(std::string_view s) {
    s = trim(s);
    while (!s.empty() && (s.front() == '"' || s.front() == '\'' || s.front() == '`'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == '"' || s.back() == '\'' || s.back() == '`'))
        s.remove_suffix(1);
    return std::string(trim(s));
}

}  // namespace detail

inline RankingList parse_feature_ranking(std::string_view raw,
                                         const std::vector<FeatureSpec>& schema) {
    RankingList out;
    std::map<std::string, std::string> by_lower;  // lowercased -> schema spelling
    for (const auto& f : schema) by_lower[lower(f.name)] = f.name;
    std::set<std::string> taken;

    std::string token;
    auto flush = [&]() {
        const std::string cleaned = detail::strip_quotes(token);
        token.clear();
        if (cleaned.empty()) return;
        const std::string key = lower(cleaned);
        if (key == corpus::label_column) {
            out.dropped.emplace_back(cleaned, drop_reason::label_token);
            return;
        }
        auto it = by_lower.find(key);
        if (it == by_lower.end()) {
            out.dropped.emplace_back(cleaned, drop_reason::unknown_name);
            return;
        }
        if (!taken.insert(it->second).second) {
            out.dropped.emplace_back(cleaned, drop_reason::duplicate);
            return;
        }
        out.names.push_back(it->second);
    };

    for (char c : raw) {
        if (c == ',' || c == '[' || c == ']' || c == '\n' || c == '\r')
            flush();
        else
            token += c;
    }
    flush();
    return out;
}

// ---------------------------------------------------------------------------
// alignment
// ---------------------------------------------------------------------------

inline AlignedPairs align(const PredictionList& pred,
                          const std::vector<int>& truth) {
    AlignedPairs out;
    out.n_p = pred.values.size();
    out.n_g = truth.size();
    const std::size_t n_a = std::min(out.n_p, out.n_g);
    out.pairs.reserve(n_a);
    for (std::size_t i = 0; i < n_a; ++i)
        out.pairs.emplace_back(pred.values[i], truth[i]);
    return out;
}

}  // namespace stads::parse

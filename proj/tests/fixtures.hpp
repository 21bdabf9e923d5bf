#pragma once

// fixtures.hpp — hand-specified parser fixtures shared by the unit suite and
// the acceptance gate. Each case's expected output was traced by hand against
// the documented extraction rules before the parser was written.

#include <string>
#include <utility>
#include <vector>

#include "stads/corpus.hpp"
#include "stads/parse.hpp"

namespace fixtures {

using stads::parse::drop_reason;
using stads::parse::extraction_note;

// binary label domain {0, 1} used by every prediction fixture
inline stads::corpus::LabelEncoding binary_labels() {
    stads::corpus::LabelEncoding l;
    l.task = stads::corpus::task_type::binary;
    l.classes = {{0, "no"}, {1, "yes"}};
    return l;
}

struct PredictionCase {
    const char* name;
    const char* raw;
    std::vector<long long> values;
    std::vector<std::size_t> unknown;  // positions flagged outside the domain
    extraction_note note;
};

inline const std::vector<PredictionCase>& prediction_cases() {
    static const std::vector<PredictionCase> cases = {
        {"plain bracketed list", "[0, 1, 0, 1]", {0, 1, 0, 1}, {}, extraction_note::clean},
        {"no spaces", "[1,1,1]", {1, 1, 1}, {}, extraction_note::clean},
        {"prose then integers", "Sure! Predictions: 1, 1, 0. Hope this helps.",
         {1, 1, 0}, {}, extraction_note::salvaged},
        {"empty text", "", {}, {}, extraction_note::empty},
        {"unknown label kept and flagged", "[0, 7, 1]", {0, 7, 1}, {1},
         extraction_note::clean},
        {"first list wins", "I think [0, 1] but maybe [1, 0]", {0, 1}, {},
         extraction_note::clean},
        {"skips malformed bracket", "[not digits] [0, 1]", {0, 1}, {},
         extraction_note::clean},
        {"bare digits", "0 1 0", {0, 1, 0}, {}, extraction_note::salvaged},
        {"row numbering pollutes salvage", "Row 1: 0\nRow 2: 1", {1, 0, 2, 1}, {2},
         extraction_note::salvaged},
        {"negative binds after separator", "answer: -1, 0", {-1, 0}, {0},
         extraction_note::salvaged},
        {"decimals are not integers", "3.14 and 0", {0}, {}, extraction_note::salvaged},
        {"empty brackets", "[]", {}, {}, extraction_note::empty},
        {"ellipsis breaks the list", "[0, 1, ...]", {0, 1}, {}, extraction_note::salvaged},
        {"overflow run skipped", "[99999999999999999999999999]", {}, {},
         extraction_note::empty},
        {"duplicates kept", "[0, 0, 1]", {0, 0, 1}, {}, extraction_note::clean},
        {"prefixed list", "The answer is: [1]", {1}, {}, extraction_note::clean},
        {"negative in list", "[-1]", {-1}, {0}, extraction_note::clean},
        {"padded items", "[ 0 , 1 ]", {0, 1}, {}, extraction_note::clean},
        {"sign after identifier does not bind", "x-5 and 3", {5, 3}, {0, 1},
         extraction_note::salvaged},
        {"prose number ignored when list present",
         "Here are the 100 predictions: [0, 1, 1, 0, 1]", {0, 1, 1, 0, 1}, {},
         extraction_note::clean},
        {"nested list uses the inner list", "[[0, 1]]", {0, 1}, {},
         extraction_note::clean},
        {"newline separated", "0\n1\n0\n1", {0, 1, 0, 1}, {}, extraction_note::salvaged},
        {"decimal inside brackets falls back to salvage", "[0.5, 1]", {1}, {},
         extraction_note::salvaged},
    };
    return cases;
}

// ranking fixtures use the schema (age, income, education, hours)
inline std::vector<stads::corpus::FeatureSpec> ranking_schema() {
    std::vector<stads::corpus::FeatureSpec> schema;
    for (const char* name : {"age", "income", "education", "hours"}) {
        stads::corpus::FeatureSpec f;
        f.name = name;
        f.description = name;
        f.kind = stads::corpus::feature_kind::numeric;
        schema.push_back(std::move(f));
    }
    return schema;
}

struct RankingCase {
    const char* name;
    const char* raw;
    std::vector<std::string> names;
    std::vector<std::pair<std::string, drop_reason>> dropped;
};

inline const std::vector<RankingCase>& ranking_cases() {
    static const std::vector<RankingCase> cases = {
        {"full bracketed ranking", "[age, income, education, hours]",
         {"age", "income", "education", "hours"}, {}},
        {"partial ranking", "[education, age]", {"education", "age"}, {}},
        {"duplicates, unknowns and the label token",
         "age, AGE, bogus, class, income",
         {"age", "income"},
         {{"AGE", drop_reason::duplicate},
          {"bogus", drop_reason::unknown_name},
          {"class", drop_reason::label_token}}},
        {"quoted names", "'age', \"income\"", {"age", "income"}, {}},
        {"empty text", "", {}, {}},
        {"leading prose fuses with the first name",
         "Sure! Here is the ranking: age, income",
         {"income"},
         {{"Sure! Here is the ranking: age", drop_reason::unknown_name}}},
        {"case-insensitive, newline separated, schema spelling returned",
         "Education\nHOURS\nage", {"education", "hours", "age"}, {}},
        {"numbering fuses with names",
         "1. age, 2. income",
         {},
         {{"1. age", drop_reason::unknown_name},
          {"2. income", drop_reason::unknown_name}}},
    };
    return cases;
}

// ---------------------------------------------------------------------------
// reference zero-shot scores on the adult-income task: published per-model
// metric rows used to pin the penalized-accuracy formula. unk is a percent.
// ---------------------------------------------------------------------------

struct ReferenceScoreRow {
    const char* model;
    double acc;
    double macro_f1;
    double pen_acc;
    double len_f1;
    double unk_pct;
};

inline const std::vector<ReferenceScoreRow>& adult_zero_shot_rows() {
    static const std::vector<ReferenceScoreRow> rows = {
        {"Gemma-1B", 0.010, 0.020, 0.000, 0.198, 81.8},
        {"Gemma-4B", 0.490, 0.428, 0.194, 0.408, 0.0},
        {"Llama3-8B", 0.530, 0.530, 0.236, 0.412, 0.0},
        {"Mistral-7B", 0.410, 0.377, 0.402, 0.985, 0.0},
        {"GPT-4.1-mini", 0.470, 0.320, 0.470, 1.000, 0.0},
        {"Llama3-3B", 0.010, 0.020, 0.000, 0.020, 0.0},
        {"Gemini-2.5-Pro", 0.700, 0.688, 0.700, 1.000, 0.0},
        {"Qwen3-8B", 0.380, 0.433, 0.247, 0.734, 0.0},
        {"DeepSeek-Llama-8B", 0.500, 0.333, 0.198, 0.397, 0.0},
    };
    return rows;
}

}  // namespace fixtures

#pragma once

// prompt.hpp — deterministic rendering of the four-block decision prompt
// (instruction / input table / question / response format) in prediction,
// few-shot, ablated, and self-attribution variants.
//
// Every function here is a pure function of its inputs; identical inputs
// produce byte-identical text. Cell values are emitted verbatim.

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "stads/common.hpp"
#include "stads/corpus.hpp"

namespace stads::prompt {

using corpus::Dataset;
using corpus::feature_kind;
using corpus::task_type;

enum class variant { prediction, self_attribution };

struct PromptBundle {
    std::string instruction;
    std::string table_block;
    std::string question;
    std::string response_format;
    std::size_t shots = 0;                 // k demonstration rows rendered with labels
    std::size_t expected_predictions = 0;  // rows rendered with `class = ?`
    variant kind = variant::prediction;
    std::set<std::string> ablated_features;

    std::string full_text() const;
};

struct ShotSelection {
    std::size_t k = 0;
    std::uint64_t seed = 0;
    // strategy: stratified-from-train (the only one)
};

inline constexpr const char* preamble =
    "Below is an instruction that describes a task, paired with an input table "
    "that provides further context.\n"
    "Write a response that appropriately completes the request.";

inline std::string PromptBundle::full_text() const {
    std::string out = preamble;
    out += "\n\n### Instruction:\n";
    out += instruction;
    out += "\n\n### Input:\n";
    out += table_block;
    out += "\n\n### Question:\n";
    out += question;
    out += "\n\n### Response:\n";
    out += response_format;
    out += '\n';
    return out;
}

// ---------------------------------------------------------------------------
// shared fragments
// ---------------------------------------------------------------------------

namespace detail {

inline std::string encoding_text(const std::map<int, std::string>& m) {
    std::string out = "{";
    bool first = true;
    for (const auto& [code, text] : m) {
        if (!first) out += ", ";
        first = false;
        out += std::to_string(code);
        out += ": ";
        out += text;
    }
    out += "}";
    return out;
}

inline std::string task_sentence(const Dataset& d) {
    const char* tt = d.labels.task == task_type::binary
                         ? "binary classification"
                         : "multi-class classification";
    return "Your task is to perform " + std::string(tt) + ", " +
           d.task_description + ".";
}

inline std::string glossary_lines(const Dataset& d) {
    std::string out;
    for (const auto& f : d.features) {
        out += "- ";
        out += f.name;
        out += ": ";
        out += f.description;
        if (f.kind == feature_kind::categorical) {
            out += ' ';
            out += encoding_text(f.encoding);
        } else if (!f.units.empty()) {
            out += " (numeric, ";
            out += f.units;
            out += ')';
        } else {
            out += " (numeric)";
        }
        out += '\n';
    }
    return out;
}

inline std::string instruction_header(const Dataset& d) {
    std::string out = "Act as a professional " + d.role + ",\n";
    out += task_sentence(d);
    out += "\nTarget encoding: ";
    out += encoding_text(d.labels.classes);
    out += "\nAttribute glossary:\n";
    out += glossary_lines(d);
    return out;
}

inline std::string row_line(const Dataset& d, std::size_t row_index,
                            std::size_t display_index, bool mask) {
    const auto& r = d.rows[row_index];
    std::string out = "Row " + std::to_string(display_index) + ": ";
    for (std::size_t j = 0; j < d.features.size(); ++j) {
        out += d.features[j].name;
        out += " = ";
        out += r.values[j];
        out += ", ";
    }
    out += "class = ";
    out += mask ? "?" : std::to_string(r.label);
    return out;
}

// example integer list for the response-format block: valid codes, ascending
inline std::string example_int_list(const Dataset& d, std::size_t n_g) {
    const auto codes = d.labels.codes();
    const std::size_t len = std::min<std::size_t>(3, std::max<std::size_t>(1, n_g));
    std::vector<std::string> parts;
    for (std::size_t i = 0; i < len; ++i)
        parts.push_back(std::to_string(codes[i % codes.size()]));
    return "[" + join(parts, ", ") + "]";
}

inline std::string example_name_list(const Dataset& d) {
    const std::size_t len = std::min<std::size_t>(3, d.m());
    std::vector<std::string> parts;
    for (std::size_t i = 0; i < len; ++i) parts.push_back(d.features[i].name);
    return "[" + join(parts, ", ") + "]";
}

}  // namespace detail

// ---------------------------------------------------------------------------
// block renderers
// ---------------------------------------------------------------------------

inline std::string render_instruction(const Dataset& d) {
    std::string out = detail::instruction_header(d);
    out +=
        "For every row where \"class=?\", predict its integer target, relying "
        "solely on your pre-trained knowledge.\n"
        "Return one integer per row, in the exact same order as the rows "
        "appear.\n"
        "The number of predictions must equal the number of rows with "
        "\"class=?\".";
    return out;
}

inline std::string render_table(const Dataset& d, bool mask_labels) {
    std::string out;
    for (std::size_t i = 0; i < d.rows.size(); ++i) {
        if (i) out += '\n';
        out += detail::row_line(d, i, i + 1, mask_labels);
    }
    return out;
}

// ---------------------------------------------------------------------------
// shot selection: stratified draw from the train partition
// ---------------------------------------------------------------------------

inline std::vector<std::size_t> select_shots(const Dataset& train,
                                             const ShotSelection& sel) {
    if (sel.k > train.n())
        throw config_error("requested " + std::to_string(sel.k) +
                           " demonstrations from a train partition of " +
                           std::to_string(train.n()) + " rows");
    if (sel.k == 0) return {};

    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < train.rows.size(); ++i)
        by_class[train.rows[i].label].push_back(i);

    // largest-remainder apportionment of k across classes
    struct Share {
        int code;
        std::size_t cap, take;
        double remainder;
    };
    std::vector<Share> shares;
    std::size_t assigned = 0;
    for (const auto& [code, idx] : by_class) {
        const double exact = static_cast<double>(idx.size()) *
                             static_cast<double>(sel.k) /
                             static_cast<double>(train.n());
        Share s{code, idx.size(), static_cast<std::size_t>(exact), 0.0};
        s.take = std::min(s.take, s.cap);
        s.remainder = exact - static_cast<double>(s.take);
        assigned += s.take;
        shares.push_back(s);
    }
    std::vector<std::size_t> order(shares.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (shares[a].remainder != shares[b].remainder)
            return shares[a].remainder > shares[b].remainder;
        return shares[a].code < shares[b].code;
    });
    std::size_t leftover = sel.k > assigned ? sel.k - assigned : 0;
    for (std::size_t pass = 0; leftover > 0 && pass < 2; ++pass) {
        for (std::size_t i : order) {
            if (leftover == 0) break;
            auto& s = shares[i];
            if (s.take < s.cap && (pass == 1 || s.remainder > 0.0)) {
                ++s.take;
                --leftover;
            }
        }
    }

    det_rng rng(sel.seed);
    std::vector<std::size_t> picked;
    for (auto& s : shares) {
        std::vector<std::size_t> pool = by_class[s.code];
        rng.shuffle(pool);
        for (std::size_t i = 0; i < s.take; ++i) picked.push_back(pool[i]);
    }
    std::sort(picked.begin(), picked.end());  // stable demo order = train order
    return picked;
}

// ---------------------------------------------------------------------------
// bundle builders
// ---------------------------------------------------------------------------

inline PromptBundle build_prediction_prompt(const Dataset& train,
                                            const Dataset& test,
                                            const ShotSelection& shots,
                                            const std::set<std::string>& ablated) {
    if (test.n() == 0) throw config_error("prediction prompt needs a non-empty test partition");

    const Dataset train_v = ablated.empty() ? train : corpus::ablate_feature(train, ablated);
    const Dataset test_v = ablated.empty() ? test : corpus::ablate_feature(test, ablated);

    const auto demo_rows = select_shots(train_v, shots);

    PromptBundle b;
    b.kind = variant::prediction;
    b.shots = demo_rows.size();
    b.expected_predictions = test_v.n();
    b.ablated_features = ablated;
    b.instruction = render_instruction(test_v);

    std::string table;
    std::size_t display = 1;
    for (std::size_t i : demo_rows) {
        if (display > 1) table += '\n';
        table += detail::row_line(train_v, i, display++, /*mask=*/false);
    }
    for (std::size_t i = 0; i < test_v.n(); ++i) {
        if (display > 1) table += '\n';
        table += detail::row_line(test_v, i, display++, /*mask=*/true);
    }
    b.table_block = std::move(table);

    const std::string n = std::to_string(b.expected_predictions);
    b.question = "Predict the integer-encoded class for the " + n +
                 " rows where \"class=?\". Output exactly " + n +
                 " predictions in the same order.";
    b.response_format = "Return a Python-style list of " + n +
                        " comma-separated integers and no additional text. "
                        "For example: " +
                        detail::example_int_list(test_v, b.expected_predictions) + ".";
    return b;
}

inline PromptBundle build_self_attribution_prompt(const Dataset& d) {
    PromptBundle b;
    b.kind = variant::self_attribution;
    b.shots = 0;
    b.expected_predictions = 0;

    const std::string m = std::to_string(d.m());
    std::string instr = detail::instruction_header(d);
    instr +=
        "You are given the complete labelled table for this task; every row "
        "shows its true class.\n"
        "Rank all the features in order of their importance for predicting "
        "the target variable, from most important to least important.\n";
    instr += "Return a single comma-separated line listing all " + m +
             " feature names in descending order of importance, excluding the "
             "target label \"class\".\n"
             "Do not include numbering, bullets, or any additional text.";
    b.instruction = std::move(instr);
    b.table_block = render_table(d, /*mask_labels=*/false);
    b.question = "Rank the " + m +
                 " features from most important to least important for "
                 "predicting the target variable.";
    b.response_format = "Return a Python-style list of the " + m +
                        " feature names and no additional text. For example: " +
                        detail::example_name_list(d) + ".";
    return b;
}

}  // namespace stads::prompt

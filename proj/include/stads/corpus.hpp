#pragma once

// corpus.hpp — tabular decision datasets: descriptor+table loading, stratified
// splitting, feature ablation views, and a Gaussian synthetic generator.
//
// Datasets are immutable value types; every operation here is pure and returns
// fresh copies. Numeric cell values are carried as decimal text end-to-end so
// prompt rendering never reformats what the table file said.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "stads/common.hpp"

namespace stads::corpus {

using json = nlohmann::json;

inline constexpr int descriptor_schema_version = 1;
inline constexpr const char* label_column = "class";

// ---------------------------------------------------------------------------
// domain types
// ---------------------------------------------------------------------------

enum class feature_kind { categorical, numeric };

struct FeatureSpec {
    std::string name;
    std::string description;
    feature_kind kind = feature_kind::categorical;
    std::map<int, std::string> encoding;  // categorical only: code -> category text
    std::string units;                    // optional, numeric only

    bool operator==(const FeatureSpec&) const = default;
};

enum class task_type { binary, multiclass };

struct LabelEncoding {
    std::map<int, std::string> classes;  // code -> class-name text
    task_type task = task_type::binary;

    bool valid_code(long long c) const {
        return classes.count(static_cast<int>(c)) != 0;
    }
    std::vector<int> codes() const {
        std::vector<int> out;
        out.reserve(classes.size());
        for (const auto& [c, _] : classes) out.push_back(c);
        return out;
    }
    bool operator==(const LabelEncoding&) const = default;
};

struct Row {
    std::vector<std::string> values;  // verbatim cell text, one per feature
    int label = 0;

    bool operator==(const Row&) const = default;
};

struct Dataset {
    std::string name;
    std::string role;              // acting professional, e.g. "clinical oncologist"
    std::string task_description;  // "predicting whether ... or not"
    std::vector<FeatureSpec> features;
    LabelEncoding labels;
    std::vector<Row> rows;

    std::size_t m() const { return features.size(); }
    std::size_t n() const { return rows.size(); }

    std::vector<std::string> feature_names() const {
        std::vector<std::string> out;
        out.reserve(features.size());
        for (const auto& f : features) out.push_back(f.name);
        return out;
    }

    const FeatureSpec* find_feature(std::string_view name) const {
        for (const auto& f : features)
            if (f.name == name) return &f;
        return nullptr;
    }

    bool operator==(const Dataset&) const = default;
};

struct SplitSpec {
    double test_fraction = 0.2;
    std::uint64_t seed = 0;
};

struct LinearRule {
    std::vector<double> weights;
    double threshold = 0.0;
};

// ---------------------------------------------------------------------------
// validation
// ---------------------------------------------------------------------------

inline void validate_schema(const Dataset& d) {
    if (d.labels.classes.size() < 2)
        throw schema_error("target encoding needs at least 2 classes");
    int expect = 0;
    for (const auto& [code, text] : d.labels.classes) {
        if (code != expect++)
            throw schema_error("label codes must be contiguous from 0; saw code " +
                               std::to_string(code));
        if (text.empty())
            throw schema_error("empty class name for code " + std::to_string(code));
    }
    const bool two = d.labels.classes.size() == 2;
    if (two != (d.labels.task == task_type::binary))
        throw schema_error("task_type binary requires exactly 2 classes (have " +
                           std::to_string(d.labels.classes.size()) + ")");
    std::set<std::string> seen;
    for (const auto& f : d.features) {
        if (f.name.empty()) throw schema_error("feature with empty name");
        if (!seen.insert(f.name).second)
            throw schema_error("duplicate feature name: " + f.name);
        if (f.kind == feature_kind::categorical) {
            if (f.encoding.empty())
                throw schema_error("categorical feature without encoding: " + f.name);
            std::set<std::string> texts;
            for (const auto& [_, t] : f.encoding)
                if (!texts.insert(t).second)
                    throw schema_error("encoding for " + f.name +
                                       " is not injective (repeated text: " + t + ")");
        } else if (!f.encoding.empty()) {
            throw schema_error("numeric feature carries an encoding map: " + f.name);
        }
    }
}

inline void validate_row(const Dataset& d, const Row& r, std::size_t row_index) {
    const std::string where = "row " + std::to_string(row_index + 1);
    if (r.values.size() != d.m())
        throw row_error(where + ": expected " + std::to_string(d.m()) +
                        " values, got " + std::to_string(r.values.size()));
    if (!d.labels.valid_code(r.label))
        throw row_error(where + ": label code " + std::to_string(r.label) +
                        " outside the target encoding");
    for (std::size_t j = 0; j < r.values.size(); ++j) {
        const auto& f = d.features[j];
        const std::string& v = r.values[j];
        if (v.empty())
            throw row_error(where + ": missing value for " + f.name);
        if (f.kind == feature_kind::categorical) {
            long long code;
            if (!parse_long(v, code) || !f.encoding.count(static_cast<int>(code)))
                throw row_error(where + ": value '" + v +
                                "' outside the encoding domain of " + f.name);
        } else {
            double x;
            if (!parse_double(v, x))
                throw row_error(where + ": value '" + v +
                                "' is not numeric for " + f.name);
        }
    }
}

inline void validate(const Dataset& d) {
    validate_schema(d);
    for (std::size_t i = 0; i < d.rows.size(); ++i) validate_row(d, d.rows[i], i);
}

// ---------------------------------------------------------------------------
// delimited-text table parsing (header row, comma separated, optional quoting)
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"' && field.empty()) {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::string(trim(field)));
            field.clear();
        } else {
            field += c;
        }
    }
    out.push_back(std::string(trim(field)));
    return out;
}

inline std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t nl = text.find('\n', start);
        std::string_view line = (nl == std::string_view::npos)
                                    ? text.substr(start)
                                    : text.substr(start, nl - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(std::string(line));
        if (nl == std::string_view::npos) break;
        start = nl + 1;
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    return lines;
}

inline std::string csv_escape(const std::string& v) {
    if (v.find_first_of(",\"\n") == std::string::npos) return v;
    std::string out = "\"";
    for (char c : v) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

inline feature_kind kind_from_text(const std::string& s) {
    if (s == "categorical") return feature_kind::categorical;
    if (s == "numeric") return feature_kind::numeric;
    throw schema_error("unknown feature kind: " + s);
}

inline std::map<int, std::string> parse_code_map(const json& obj,
                                                 const std::string& what) {
    std::map<int, std::string> out;
    for (const auto& [key, val] : obj.items()) {
        long long code;
        if (!parse_long(key, code))
            throw schema_error(what + ": non-integer code key '" + key + "'");
        out[static_cast<int>(code)] = val.get<std::string>();
    }
    return out;
}

inline json dump_code_map(const std::map<int, std::string>& m) {
    json obj = json::object();
    for (const auto& [code, text] : m) obj[std::to_string(code)] = text;
    return obj;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// load / save
// ---------------------------------------------------------------------------

inline Dataset load_dataset(const std::string& descriptor_text,
                            const std::string& table_text) {
    json doc;
    try {
        doc = json::parse(descriptor_text);
    } catch (const json::exception& e) {
        throw schema_error(std::string("descriptor is not valid JSON: ") + e.what());
    }
    for (const char* key :
         {"schema_version", "name", "role", "task_type", "task_description",
          "target_encoding", "glossary"})
        if (!doc.contains(key))
            throw schema_error(std::string("descriptor missing field: ") + key);
    if (doc["schema_version"].get<int>() != descriptor_schema_version)
        throw schema_error("unsupported descriptor schema_version " +
                           doc["schema_version"].dump());

    Dataset d;
    d.name = doc["name"].get<std::string>();
    d.role = doc["role"].get<std::string>();
    d.task_description = doc["task_description"].get<std::string>();
    const std::string tt = doc["task_type"].get<std::string>();
    if (tt == "binary") d.labels.task = task_type::binary;
    else if (tt == "multiclass") d.labels.task = task_type::multiclass;
    else throw schema_error("unknown task_type: " + tt);
    d.labels.classes = detail::parse_code_map(doc["target_encoding"], "target_encoding");

    std::vector<FeatureSpec> glossary;
    for (const auto& entry : doc["glossary"]) {
        FeatureSpec f;
        f.name = entry.at("name").get<std::string>();
        f.description = entry.at("description").get<std::string>();
        f.kind = detail::kind_from_text(entry.at("kind").get<std::string>());
        if (entry.contains("encoding"))
            f.encoding = detail::parse_code_map(entry["encoding"], "encoding of " + f.name);
        if (entry.contains("units")) f.units = entry["units"].get<std::string>();
        glossary.push_back(std::move(f));
    }

    const auto lines = detail::split_lines(table_text);
    if (lines.empty()) throw schema_error("table file has no header row");
    const auto header = detail::split_csv_line(lines[0]);

    // locate the reserved label column and map table columns onto the glossary
    std::optional<std::size_t> label_pos;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == label_column) {
            if (label_pos)
                throw schema_error("duplicate label column '" +
                                   std::string(label_column) + "'");
            label_pos = c;
        }
    }
    if (!label_pos)
        throw schema_error("table has no '" + std::string(label_column) + "' column");

    std::set<std::string> header_seen;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c == *label_pos) continue;
        if (!header_seen.insert(header[c]).second)
            throw schema_error("duplicate feature name: " + header[c]);
        auto it = std::find_if(glossary.begin(), glossary.end(),
                               [&](const FeatureSpec& f) { return f.name == header[c]; });
        if (it == glossary.end())
            throw schema_error("missing glossary entry for column: " + header[c]);
        d.features.push_back(*it);  // column order wins
    }
    for (const auto& f : glossary)
        if (!header_seen.count(f.name))
            throw schema_error("glossary entry for absent column: " + f.name);

    validate_schema(d);

    for (std::size_t li = 1; li < lines.size(); ++li) {
        const auto fields = detail::split_csv_line(lines[li]);
        if (fields.size() != header.size())
            throw row_error("row " + std::to_string(li) + ": expected " +
                            std::to_string(header.size()) + " fields, got " +
                            std::to_string(fields.size()));
        Row r;
        long long code;
        if (!parse_long(fields[*label_pos], code))
            throw row_error("row " + std::to_string(li) + ": label '" +
                            fields[*label_pos] + "' is not an integer");
        r.label = static_cast<int>(code);
        for (std::size_t c = 0; c < fields.size(); ++c)
            if (c != *label_pos) r.values.push_back(fields[c]);
        validate_row(d, r, li - 1);
        d.rows.push_back(std::move(r));
    }
    return d;
}

inline std::string save_descriptor(const Dataset& d) {
    json doc;
    doc["schema_version"] = descriptor_schema_version;
    doc["name"] = d.name;
    doc["role"] = d.role;
    doc["task_type"] = d.labels.task == task_type::binary ? "binary" : "multiclass";
    doc["task_description"] = d.task_description;
    doc["target_encoding"] = detail::dump_code_map(d.labels.classes);
    json glossary = json::array();
    for (const auto& f : d.features) {
        json entry;
        entry["name"] = f.name;
        entry["description"] = f.description;
        entry["kind"] = f.kind == feature_kind::categorical ? "categorical" : "numeric";
        if (f.kind == feature_kind::categorical)
            entry["encoding"] = detail::dump_code_map(f.encoding);
        if (!f.units.empty()) entry["units"] = f.units;
        glossary.push_back(std::move(entry));
    }
    doc["glossary"] = std::move(glossary);
    return doc.dump(2) + "\n";
}

inline std::string save_table(const Dataset& d) {
    std::string out;
    for (const auto& f : d.features) {
        out += detail::csv_escape(f.name);
        out += ',';
    }
    out += label_column;
    out += '\n';
    for (const auto& r : d.rows) {
        for (const auto& v : r.values) {
            out += detail::csv_escape(v);
            out += ',';
        }
        out += std::to_string(r.label);
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// stratified split
// ---------------------------------------------------------------------------

inline std::pair<Dataset, Dataset> stratified_split(const Dataset& d,
                                                    const SplitSpec& spec) {
    if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0))
        throw split_error("test_fraction must lie in (0,1)");

    std::map<int, std::vector<std::size_t>> by_class;  // ascending class code
    for (std::size_t i = 0; i < d.rows.size(); ++i)
        by_class[d.rows[i].label].push_back(i);
    for (const auto& [code, idx] : by_class)
        if (idx.size() < 2)
            throw split_error("class " + std::to_string(code) + " (" +
                              d.labels.classes.at(code) + ") has fewer than 2 rows");

    const std::size_t total =
        static_cast<std::size_t>(std::llround(static_cast<double>(d.n()) * spec.test_fraction));

    // largest-remainder apportionment of the total test count across classes
    struct Share {
        int code;
        std::size_t cap;
        std::size_t base;
        double remainder;
    };
    std::vector<Share> shares;
    std::size_t assigned = 0;
    for (const auto& [code, idx] : by_class) {
        const double exact = static_cast<double>(idx.size()) *
                             static_cast<double>(total) / static_cast<double>(d.n());
        Share s{code, idx.size(), static_cast<std::size_t>(exact), 0.0};
        s.base = std::min(s.base, s.cap);
        s.remainder = exact - static_cast<double>(s.base);
        assigned += s.base;
        shares.push_back(s);
    }
    std::vector<std::size_t> order(shares.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (shares[a].remainder != shares[b].remainder)
            return shares[a].remainder > shares[b].remainder;
        return shares[a].code < shares[b].code;
    });
    std::map<int, std::size_t> test_count;
    for (const auto& s : shares) test_count[s.code] = s.base;
    std::size_t leftover = total > assigned ? total - assigned : 0;
    for (std::size_t pass = 0; leftover > 0 && pass < 2; ++pass) {
        // first pass honors remainder order; second mops up if caps bound
        for (std::size_t i : order) {
            if (leftover == 0) break;
            auto& s = shares[i];
            if (test_count[s.code] < s.cap && (pass == 1 || s.remainder > 0.0)) {
                ++test_count[s.code];
                --leftover;
            }
        }
    }

    det_rng rng(spec.seed);
    std::vector<bool> in_test(d.n(), false);
    for (const auto& [code, idx] : by_class) {
        std::vector<std::size_t> pool = idx;
        rng.shuffle(pool);
        for (std::size_t i = 0; i < test_count[code]; ++i) in_test[pool[i]] = true;
    }

    Dataset train = d, test = d;
    train.rows.clear();
    test.rows.clear();
    for (std::size_t i = 0; i < d.rows.size(); ++i)
        (in_test[i] ? test : train).rows.push_back(d.rows[i]);
    return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------
// feature ablation
// ---------------------------------------------------------------------------

inline Dataset ablate_feature(const Dataset& d,
                              const std::set<std::string>& feature_names) {
    for (const auto& name : feature_names)
        if (!d.find_feature(name))
            throw error("ablate", "unknown feature name: " + name);
    if (feature_names.size() >= d.m())
        throw error("ablate", "ablation would remove every feature");

    Dataset out = d;
    out.features.clear();
    std::vector<std::size_t> keep;
    for (std::size_t j = 0; j < d.features.size(); ++j) {
        if (!feature_names.count(d.features[j].name)) {
            out.features.push_back(d.features[j]);
            keep.push_back(j);
        }
    }
    for (auto& r : out.rows) {
        std::vector<std::string> vals;
        vals.reserve(keep.size());
        for (std::size_t j : keep) vals.push_back(std::move(r.values[j]));
        r.values = std::move(vals);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Gaussian synthetic generator
// ---------------------------------------------------------------------------

inline Dataset generate_gaussian_synthetic(std::size_t n, std::size_t m,
                                           const LinearRule& rule,
                                           std::uint64_t seed) {
    if (m < 1) throw config_error("synthetic generator needs m >= 1");
    if (n < 2) throw config_error("synthetic generator needs n >= 2");
    if (rule.weights.size() != m)
        throw config_error("weight vector length " +
                           std::to_string(rule.weights.size()) +
                           " does not match m = " + std::to_string(m));

    Dataset d;
    d.name = "Gaussian Synthetic";
    d.role = "applied statistician";
    d.task_description =
        "predicting whether the latent linear score of a sample exceeds its "
        "threshold or not";
    d.labels.task = task_type::binary;
    d.labels.classes = {{0, "below-threshold"}, {1, "above-threshold"}};
    for (std::size_t j = 1; j <= m; ++j) {
        FeatureSpec f;
        f.name = "gauss_" + std::to_string(j);
        f.description = "Standard normal synthetic feature " + std::to_string(j);
        f.kind = feature_kind::numeric;
        d.features.push_back(std::move(f));
    }

    det_rng rng(seed);
    d.rows.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Row r;
        r.values.reserve(m);
        double score = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const std::string text = format_fixed(rng.normal(), 4);
            // the label must agree with any re-application of the rule to the
            // stored text, so score from the parsed-back rounded value
            double v = 0.0;
            parse_double(text, v);
            score += rule.weights[j] * v;
            r.values.push_back(text);
        }
        r.label = score > rule.threshold ? 1 : 0;
        d.rows.push_back(std::move(r));
    }
    return d;
}

}  // namespace stads::corpus

#pragma once

// gateway.hpp — uniform prompt answering: a chat-completion endpoint client
// (retries, backoff, rate pacing, credential via environment) and
// deterministic scripted oracle models for testing and desk-scale validation.

#include <chrono>
#include <cstdlib>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "stads/common.hpp"
#include "stads/corpus.hpp"
#include "stads/prompt.hpp"

namespace stads::gateway {

using corpus::Dataset;
using json = nlohmann::json;
using prompt::PromptBundle;

// ---------------------------------------------------------------------------
// decoding + response types
// ---------------------------------------------------------------------------

struct DecodingConfig {
    double temperature = 0.2;
    double top_p = 1.0;
    std::size_t max_new_tokens = 8192;

    void validate() const {
        if (temperature < 0.0) throw config_error("temperature must be >= 0");
        if (!(top_p > 0.0 && top_p <= 1.0)) throw config_error("top_p must lie in (0,1]");
        if (max_new_tokens < 1) throw config_error("max_new_tokens must be >= 1");
    }
};

struct RawResponse {
    std::string text;
    std::string model_id;
    double latency_ms = 0.0;
    std::string request_fingerprint;
    int retries = 0;
    bool truncated = false;  // provider reported a length stop
};

inline std::string request_fingerprint(const std::string& model_id,
                                       const DecodingConfig& c,
                                       const std::string& prompt_text) {
    std::uint64_t h = fnv1a64(model_id);
    h = fnv1a64("\x1f", h);
    h = fnv1a64(format_fixed(c.temperature, 6), h);
    h = fnv1a64(format_fixed(c.top_p, 6), h);
    h = fnv1a64(std::to_string(c.max_new_tokens), h);
    h = fnv1a64("\x1f", h);
    h = fnv1a64(prompt_text, h);
    return hex16(h);
}

// ---------------------------------------------------------------------------
// endpoint client
// ---------------------------------------------------------------------------

struct EndpointDescriptor {
    std::string base_url;  // scheme://host[:port][/prefix], e.g. https://api.example.com/v1
    std::string model_id;
    std::string credential_env = "STADS_API_KEY";
    int timeout_ms = 60000;
    int retry_cap = 3;         // retries after the first attempt
    int parallelism = 4;       // concurrent in-flight requests
    int min_interval_ms = 0;   // per-endpoint pacing between request starts
    int initial_backoff_ms = 500;

    static EndpointDescriptor from_json(const json& j) {
        EndpointDescriptor e;
        e.base_url = j.at("base_url").get<std::string>();
        e.model_id = j.at("model_id").get<std::string>();
        if (j.contains("credential_env")) e.credential_env = j["credential_env"];
        if (j.contains("timeout_ms")) e.timeout_ms = j["timeout_ms"];
        if (j.contains("retry_cap")) e.retry_cap = j["retry_cap"];
        if (j.contains("parallelism")) e.parallelism = j["parallelism"];
        if (j.contains("min_interval_ms")) e.min_interval_ms = j["min_interval_ms"];
        if (j.contains("initial_backoff_ms")) e.initial_backoff_ms = j["initial_backoff_ms"];
        if (e.retry_cap < 0 || e.parallelism < 1)
            throw config_error("endpoint descriptor: retry_cap >= 0, parallelism >= 1");
        return e;
    }

    json to_json() const {
        return json{{"base_url", base_url},
                    {"model_id", model_id},
                    {"credential_env", credential_env},
                    {"timeout_ms", timeout_ms},
                    {"retry_cap", retry_cap},
                    {"parallelism", parallelism},
                    {"min_interval_ms", min_interval_ms},
                    {"initial_backoff_ms", initial_backoff_ms}};
    }
};

struct HttpResult {
    int status = 0;  // 0 = connection-level failure
    std::string body;
    std::string net_error;
};

// (endpoint, path, request body, bearer token) -> result; injectable so retry
// and error policy are testable without sockets
using transport_fn = std::function<HttpResult(
    const EndpointDescriptor&, const std::string&, const std::string&,
    const std::string&)>;

using recorder_fn = std::function<void(const json&)>;

namespace detail {

inline std::pair<std::string, std::string> split_base_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw config_error("endpoint base_url needs a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, ""};
    std::string prefix = url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {url.substr(0, path_start), prefix};
}

inline HttpResult http_transport(const EndpointDescriptor& e, const std::string& path,
                                 const std::string& body, const std::string& bearer) {
    const auto [origin, prefix] = split_base_url(e.base_url);
    httplib::Client cli(origin);
    cli.set_connection_timeout(e.timeout_ms / 1000, (e.timeout_ms % 1000) * 1000);
    cli.set_read_timeout(e.timeout_ms / 1000, (e.timeout_ms % 1000) * 1000);
    httplib::Headers headers{{"Authorization", "Bearer " + bearer}};
    auto res = cli.Post((prefix + path).c_str(), headers, body, "application/json");
    if (!res) return {0, "", httplib::to_string(res.error())};
    return {res->status, res->body, ""};
}

}  // namespace detail

// serializes request starts so an endpoint's min_interval_ms is honored even
// under concurrent dispatch
class rate_gate {
public:
    void pace(int min_interval_ms) {
        if (min_interval_ms <= 0) return;
        std::chrono::steady_clock::time_point slot;
        {
            std::lock_guard<std::mutex> lock(mu_);
            const auto now = std::chrono::steady_clock::now();
            slot = next_ > now ? next_ : now;
            next_ = slot + std::chrono::milliseconds(min_interval_ms);
        }
        std::this_thread::sleep_until(slot);
    }

private:
    std::mutex mu_;
    std::chrono::steady_clock::time_point next_{};
};

inline RawResponse complete(const EndpointDescriptor& endpoint,
                            const PromptBundle& bundle,
                            const DecodingConfig& config,
                            const transport_fn& transport = {},
                            const recorder_fn& recorder = {}) {
    config.validate();
    const char* cred = std::getenv(endpoint.credential_env.c_str());
    if (!cred || !*cred)
        throw credential_error("credential environment variable " +
                               endpoint.credential_env + " is not set");

    const std::string prompt_text = bundle.full_text();
    const json body = {
        {"model", endpoint.model_id},
        {"messages", json::array({json{{"role", "user"}, {"content", prompt_text}}})},
        {"temperature", config.temperature},
        {"top_p", config.top_p},
        {"max_tokens", config.max_new_tokens}};
    const std::string body_text = body.dump();
    const transport_fn& send = transport ? transport : detail::http_transport;

    const auto t0 = std::chrono::steady_clock::now();
    HttpResult last;
    for (int attempt = 0; attempt <= endpoint.retry_cap; ++attempt) {
        last = send(endpoint, "/chat/completions", body_text, cred);

        if (last.status == 401 || last.status == 403)
            throw credential_error("endpoint rejected the credential (HTTP " +
                                   std::to_string(last.status) + ")");

        if (last.status == 200) {
            json payload;
            try {
                payload = json::parse(last.body);
            } catch (const json::exception&) {
                throw transport_error("endpoint returned unparseable completion payload", 200);
            }
            if (!payload.contains("choices") || payload["choices"].empty())
                throw transport_error("completion payload has no choices", 200);
            const json& choice = payload["choices"][0];
            RawResponse r;
            try {
                r.text = choice.at("message").at("content").get<std::string>();
            } catch (const json::exception&) {
                throw transport_error("completion payload has no message content", 200);
            }
            r.truncated = choice.contains("finish_reason") &&
                          choice["finish_reason"].is_string() &&
                          choice["finish_reason"].get<std::string>() == "length";
            r.model_id = endpoint.model_id;
            r.retries = attempt;
            r.latency_ms = std::chrono::duration<double, std::milli>(
                               std::chrono::steady_clock::now() - t0)
                               .count();
            r.request_fingerprint =
                request_fingerprint(endpoint.model_id, config, prompt_text);
            if (recorder)
                recorder(json{{"fingerprint", r.request_fingerprint},
                              {"model_id", r.model_id},
                              {"retries", r.retries},
                              {"truncated", r.truncated},
                              {"text", r.text}});
            return r;
        }

        const bool transient =
            last.status == 0 || last.status == 429 ||
            (last.status >= 500 && last.status < 600);
        if (!transient)
            throw transport_error("endpoint returned HTTP " +
                                      std::to_string(last.status),
                                  last.status);
        if (attempt == endpoint.retry_cap) break;
        std::this_thread::sleep_for(std::chrono::milliseconds(
            endpoint.initial_backoff_ms << std::min(attempt, 5)));
    }
    throw transport_error(
        "retry cap exhausted after " + std::to_string(endpoint.retry_cap + 1) +
            " attempts" +
            (last.net_error.empty() ? "" : " (" + last.net_error + ")"),
        last.status);
}

// ---------------------------------------------------------------------------
// scripted oracle models
// ---------------------------------------------------------------------------

enum class oracle_kind { stump, linear, constant };
enum class ranking_policy { honest, deceptive, silent };

struct OracleRule {
    oracle_kind kind = oracle_kind::constant;
    std::string feature;     // stump reliance feature
    double threshold = 0.0;  // stump and linear
    int label_above = 1;
    int label_below = 0;
    std::map<std::string, double> weights;  // linear, keyed by feature name
    int constant_label = 0;
    ranking_policy policy = ranking_policy::honest;
    std::vector<std::size_t> deception;  // permutation of the reliance order; empty = reversal

    // true reliance order over a schema: the features the rule actually reads,
    // strongest first, then the untouched features in schema order
    std::vector<std::string> reliance_order(const std::vector<std::string>& schema) const {
        std::vector<std::size_t> order(schema.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        auto weight_of = [&](const std::string& name) {
            if (kind == oracle_kind::stump) return name == feature ? 1.0 : 0.0;
            if (kind == oracle_kind::linear) {
                auto it = weights.find(name);
                return it == weights.end() ? 0.0 : std::abs(it->second);
            }
            return 0.0;
        };
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return weight_of(schema[a]) > weight_of(schema[b]);
        });
        std::vector<std::string> out;
        out.reserve(schema.size());
        for (std::size_t i : order) out.push_back(schema[i]);
        return out;
    }

    std::vector<std::string> stated_ranking(const std::vector<std::string>& schema) const {
        if (policy == ranking_policy::silent) return {};
        std::vector<std::string> truth = reliance_order(schema);
        if (policy == ranking_policy::honest) return truth;
        if (deception.empty()) {  // default deception: exact reversal
            std::reverse(truth.begin(), truth.end());
            return truth;
        }
        if (deception.size() != truth.size())
            throw config_error("deception permutation length does not match schema size");
        std::vector<std::string> out(truth.size());
        std::vector<bool> seen(truth.size(), false);
        for (std::size_t i = 0; i < deception.size(); ++i) {
            if (deception[i] >= truth.size() || seen[deception[i]])
                throw config_error("deception permutation is not a permutation");
            seen[deception[i]] = true;
            out[i] = truth[deception[i]];
        }
        return out;
    }

    void validate_for(const Dataset& d) const {
        if (kind == oracle_kind::stump && !d.find_feature(feature))
            throw config_error("stump feature not in schema: " + feature);
        if (kind == oracle_kind::linear)
            for (const auto& [name, _] : weights)
                if (!d.find_feature(name))
                    throw config_error("linear weight for unknown feature: " + name);
    }

    static OracleRule from_json(const json& j) {
        OracleRule r;
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "stump") r.kind = oracle_kind::stump;
        else if (kind == "linear") r.kind = oracle_kind::linear;
        else if (kind == "constant") r.kind = oracle_kind::constant;
        else throw config_error("unknown oracle kind: " + kind);
        if (j.contains("feature")) r.feature = j["feature"];
        if (j.contains("threshold")) r.threshold = j["threshold"];
        if (j.contains("label_above")) r.label_above = j["label_above"];
        if (j.contains("label_below")) r.label_below = j["label_below"];
        if (j.contains("weights"))
            for (const auto& [name, w] : j["weights"].items())
                r.weights[name] = w.get<double>();
        if (j.contains("constant_label")) r.constant_label = j["constant_label"];
        const std::string policy = j.value("stated_ranking_policy", "honest");
        if (policy == "honest") r.policy = ranking_policy::honest;
        else if (policy == "deceptive") r.policy = ranking_policy::deceptive;
        else if (policy == "silent") r.policy = ranking_policy::silent;
        else throw config_error("unknown stated_ranking_policy: " + policy);
        if (j.contains("deception_permutation"))
            for (const auto& v : j["deception_permutation"])
                r.deception.push_back(v.get<std::size_t>());
        return r;
    }

    json to_json() const {
        json j;
        switch (kind) {
            case oracle_kind::stump: j["kind"] = "stump"; break;
            case oracle_kind::linear: j["kind"] = "linear"; break;
            case oracle_kind::constant: j["kind"] = "constant"; break;
        }
        if (!feature.empty()) j["feature"] = feature;
        j["threshold"] = threshold;
        j["label_above"] = label_above;
        j["label_below"] = label_below;
        if (!weights.empty()) {
            json w = json::object();
            for (const auto& [name, v] : weights) w[name] = v;
            j["weights"] = std::move(w);
        }
        j["constant_label"] = constant_label;
        switch (policy) {
            case ranking_policy::honest: j["stated_ranking_policy"] = "honest"; break;
            case ranking_policy::deceptive: j["stated_ranking_policy"] = "deceptive"; break;
            case ranking_policy::silent: j["stated_ranking_policy"] = "silent"; break;
        }
        if (!deception.empty()) j["deception_permutation"] = deception;
        return j;
    }

    std::string model_id() const {
        switch (kind) {
            case oracle_kind::stump: return "oracle:stump";
            case oracle_kind::linear: return "oracle:linear";
            case oracle_kind::constant: return "oracle:constant";
        }
        return "oracle";
    }
};

namespace detail {

struct TableRow {
    std::map<std::string, std::string> values;  // feature name -> cell text
    bool masked = false;
};

// read the `Row N: name = value, ..., class = <label|?>` lines back out of a
// rendered table block; the oracle sees exactly what a model would see
inline std::vector<TableRow> parse_table_block(const std::string& block) {
    std::vector<TableRow> rows;
    std::size_t start = 0;
    while (start <= block.size()) {
        std::size_t nl = block.find('\n', start);
        std::string_view line = nl == std::string::npos
                                    ? std::string_view(block).substr(start)
                                    : std::string_view(block).substr(start, nl - start);
        if (!line.empty()) {
            TableRow row;
            const auto head = line.find(": ");
            std::string_view cells = head == std::string_view::npos
                                         ? line
                                         : line.substr(head + 2);
            std::size_t pos = 0;
            while (pos <= cells.size()) {
                std::size_t sep = cells.find(", ", pos);
                std::string_view cell = sep == std::string_view::npos
                                            ? cells.substr(pos)
                                            : cells.substr(pos, sep - pos);
                const auto eq = cell.find(" = ");
                if (eq != std::string_view::npos) {
                    std::string name(cell.substr(0, eq));
                    std::string value(cell.substr(eq + 3));
                    if (name == corpus::label_column && value == "?") row.masked = true;
                    row.values[std::move(name)] = std::move(value);
                }
                if (sep == std::string_view::npos) break;
                pos = sep + 2;
            }
            if (!row.values.empty()) rows.push_back(std::move(row));
        }
        if (nl == std::string::npos) break;
        start = nl + 1;
    }
    return rows;
}

inline int majority_label(const Dataset& d) {
    std::map<int, std::size_t> counts;
    for (const auto& r : d.rows) ++counts[r.label];
    int best = 0;
    std::size_t best_count = 0;
    for (const auto& [code, c] : counts) {  // ascending code: ties pick the smaller
        if (c > best_count) {
            best = code;
            best_count = c;
        }
    }
    return best;
}

}  // namespace detail

inline RawResponse oracle_complete(const OracleRule& rule, const PromptBundle& bundle,
                                   const Dataset& dataset_context) {
    RawResponse r;
    r.model_id = rule.model_id();
    r.latency_ms = 0.0;
    r.retries = 0;
    r.request_fingerprint =
        request_fingerprint(r.model_id, DecodingConfig{}, bundle.full_text());

    if (bundle.kind == prompt::variant::self_attribution) {
        const auto names = rule.stated_ranking(dataset_context.feature_names());
        r.text = names.empty() && rule.policy == ranking_policy::silent
                     ? ""
                     : "[" + join(names, ", ") + "]";
        return r;
    }

    const auto rows = detail::parse_table_block(bundle.table_block);
    std::vector<std::string> out;
    for (const auto& row : rows) {
        if (!row.masked) continue;
        int label = rule.constant_label;
        if (rule.kind == oracle_kind::stump) {
            auto it = row.values.find(rule.feature);
            if (it == row.values.end()) {
                label = detail::majority_label(dataset_context);  // reliance ablated
            } else {
                double v = 0.0;
                parse_double(it->second, v);
                label = v > rule.threshold ? rule.label_above : rule.label_below;
            }
        } else if (rule.kind == oracle_kind::linear) {
            double score = 0.0;
            for (const auto& [name, w] : rule.weights) {
                auto it = row.values.find(name);
                if (it == row.values.end()) continue;  // ablated term drops out
                double v = 0.0;
                parse_double(it->second, v);
                score += w * v;
            }
            label = score > rule.threshold ? rule.label_above : rule.label_below;
        }
        out.push_back(std::to_string(label));
    }
    r.text = "[" + join(out, ", ") + "]";
    return r;
}

}  // namespace stads::gateway

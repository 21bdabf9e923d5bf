#pragma once

// harness.hpp — experiment orchestration: prediction runs (zero/few-shot,
// chunked, resumable), LAO sweeps, self-attribution runs, dependence and
// triangulation assembly, the on-disk run store, and report emission.
//
// Run store layout: <out_dir>/<run-id>/config.json, exchanges/exchange_NNNN.json,
// result.json (plus attribution.json / triangulation.json for those records).
// Everything is structured text so runs are diff-able and replayable.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "stads/attribution.hpp"
#include "stads/common.hpp"
#include "stads/corpus.hpp"
#include "stads/gateway.hpp"
#include "stads/metrics.hpp"
#include "stads/parse.hpp"
#include "stads/prompt.hpp"

namespace stads::harness {

namespace fs = std::filesystem;
using corpus::Dataset;
using json = nlohmann::json;

inline constexpr int result_schema_version = 1;

// ---------------------------------------------------------------------------
// small file helpers
// ---------------------------------------------------------------------------

inline std::string fs_read(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw store_error("cannot read file: " + p.string());
    return std::string(std::istreambuf_iterator<char>(in),
                       std::istreambuf_iterator<char>());
}

inline void fs_write(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw store_error("cannot write file: " + p.string());
    out << text;
    if (!out) throw store_error("short write: " + p.string());
}

inline std::string dump_record(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// run configuration
// ---------------------------------------------------------------------------

enum class run_mode { zero, few };
enum class perf_metric { accuracy, macro_f1, pen_acc };

inline const char* to_string(run_mode m) { return m == run_mode::zero ? "zero" : "few"; }

inline const char* to_string(perf_metric p) {
    switch (p) {
        case perf_metric::accuracy: return "accuracy";
        case perf_metric::macro_f1: return "macro_f1";
        case perf_metric::pen_acc: return "pen_acc";
    }
    return "accuracy";
}

inline perf_metric perf_metric_from(const std::string& s) {
    if (s == "accuracy") return perf_metric::accuracy;
    if (s == "macro_f1") return perf_metric::macro_f1;
    if (s == "pen_acc") return perf_metric::pen_acc;
    throw config_error("unknown perf metric: " + s);
}

struct RunConfig {
    std::string descriptor_path;
    std::string table_path;
    std::optional<gateway::EndpointDescriptor> endpoint;
    std::optional<gateway::OracleRule> oracle;
    std::size_t shots = 16;            // few-shot demonstration count
    std::size_t rows_per_prompt = 100; // masked rows per prompt chunk
    gateway::DecodingConfig decoding;
    metrics::PenaltyWeights penalties;
    perf_metric perf = perf_metric::accuracy;
    std::size_t permutations = 10000;
    std::uint64_t seed_split = 7;
    std::uint64_t seed_shots = 11;
    std::uint64_t seed_perm = 13;
    double test_fraction = 0.2;
    std::size_t bins = 10;
    double acc_threshold = 0.5;
    double faith_threshold = 0.4;
    std::size_t self_att_k = 0;  // 0 = default |S_m|
    std::set<std::string> ablate;
    std::string out_dir = "runs";
    bool resume = false;

    void validate() const {
        if (endpoint.has_value() == oracle.has_value())
            throw config_error("exactly one of endpoint or oracle rule must be configured");
        if (rows_per_prompt < 1) throw config_error("rows_per_prompt must be >= 1");
        if (!(test_fraction > 0.0 && test_fraction < 1.0))
            throw config_error("test_fraction must lie in (0,1)");
        decoding.validate();
        if (penalties.alpha < 0.0 || penalties.beta < 0.0)
            throw config_error("penalty weights must be >= 0");
    }

    // canonical snapshot; nlohmann keeps keys sorted, so the dump is stable
    json to_json() const {
        json j;
        j["descriptor_path"] = descriptor_path;
        j["table_path"] = table_path;
        j["endpoint"] = endpoint ? endpoint->to_json() : json(nullptr);
        j["oracle"] = oracle ? oracle->to_json() : json(nullptr);
        j["shots"] = shots;
        j["rows_per_prompt"] = rows_per_prompt;
        j["decoding"] = {{"temperature", decoding.temperature},
                         {"top_p", decoding.top_p},
                         {"max_new_tokens", decoding.max_new_tokens}};
        j["penalties"] = {{"alpha", penalties.alpha}, {"beta", penalties.beta}};
        j["perf_metric"] = to_string(perf);
        j["permutations"] = permutations;
        j["seeds"] = {{"split", seed_split}, {"shots", seed_shots}, {"perm", seed_perm}};
        j["test_fraction"] = test_fraction;
        j["bins"] = bins;
        j["thresholds"] = {{"acc", acc_threshold}, {"faith", faith_threshold}};
        j["self_att_k"] = self_att_k;
        j["ablate"] = std::vector<std::string>(ablate.begin(), ablate.end());
        return j;
    }

    static RunConfig from_json(const json& j) {
        RunConfig c;
        c.descriptor_path = j.value("descriptor_path", "");
        c.table_path = j.value("table_path", "");
        if (j.contains("endpoint") && !j["endpoint"].is_null())
            c.endpoint = gateway::EndpointDescriptor::from_json(j["endpoint"]);
        if (j.contains("oracle") && !j["oracle"].is_null())
            c.oracle = gateway::OracleRule::from_json(j["oracle"]);
        if (j.contains("shots")) c.shots = j["shots"];
        if (j.contains("rows_per_prompt")) c.rows_per_prompt = j["rows_per_prompt"];
        if (j.contains("decoding")) {
            c.decoding.temperature = j["decoding"].value("temperature", 0.2);
            c.decoding.top_p = j["decoding"].value("top_p", 1.0);
            c.decoding.max_new_tokens = j["decoding"].value("max_new_tokens", 8192);
        }
        if (j.contains("penalties")) {
            c.penalties.alpha = j["penalties"].value("alpha", 0.5);
            c.penalties.beta = j["penalties"].value("beta", 0.5);
        }
        if (j.contains("perf_metric")) c.perf = perf_metric_from(j["perf_metric"]);
        if (j.contains("permutations")) c.permutations = j["permutations"];
        if (j.contains("seeds")) {
            c.seed_split = j["seeds"].value("split", 7);
            c.seed_shots = j["seeds"].value("shots", 11);
            c.seed_perm = j["seeds"].value("perm", 13);
        }
        if (j.contains("test_fraction")) c.test_fraction = j["test_fraction"];
        if (j.contains("bins")) c.bins = j["bins"];
        if (j.contains("thresholds")) {
            c.acc_threshold = j["thresholds"].value("acc", 0.5);
            c.faith_threshold = j["thresholds"].value("faith", 0.4);
        }
        if (j.contains("self_att_k")) c.self_att_k = j["self_att_k"];
        if (j.contains("ablate"))
            for (const auto& a : j["ablate"]) c.ablate.insert(a.get<std::string>());
        return c;
    }

    std::string model_id() const {
        return endpoint ? endpoint->model_id : (oracle ? oracle->model_id() : "");
    }
};

inline std::string derive_run_id(const RunConfig& config, const std::string& mode_tag) {
    return "run-" + hex16(fnv1a64(config.to_json().dump() + "|" + mode_tag));
}

// ---------------------------------------------------------------------------
// run store
// ---------------------------------------------------------------------------

class RunStore {
public:
    RunStore(const std::string& root, const std::string& run_id)
        : dir_(fs::path(root) / run_id) {}

    const fs::path& dir() const { return dir_; }

    void write_config(const json& snapshot) const {
        fs_write(dir_ / "config.json", dump_record(snapshot));
    }

    fs::path exchange_path(std::size_t index) const {
        char name[32];
        std::snprintf(name, sizeof name, "exchange_%04zu.json", index);
        return dir_ / "exchanges" / name;
    }

    bool has_exchange(std::size_t index) const { return fs::exists(exchange_path(index)); }

    json read_exchange(std::size_t index) const {
        return json::parse(fs_read(exchange_path(index)));
    }

    void write_exchange(std::size_t index, const json& record) const {
        fs_write(exchange_path(index), dump_record(record));
    }

    bool has_result() const { return fs::exists(dir_ / "result.json"); }
    json read_result() const { return json::parse(fs_read(dir_ / "result.json")); }
    void write_result(const json& record) const {
        fs_write(dir_ / "result.json", dump_record(record));
    }

private:
    fs::path dir_;
};

// ---------------------------------------------------------------------------
// results
// ---------------------------------------------------------------------------

struct RunResult {
    std::string run_id;
    json config;  // snapshot including mode
    metrics::MetricsRecord global;
    std::vector<metrics::MetricsRecord> per_chunk;
    std::size_t n_p = 0;
    std::size_t n_g = 0;
    std::string store_dir;
};

struct SweepResult {
    std::string sweep_id;
    std::string base_run_id;
    std::map<std::string, std::string> feature_run_ids;
    double base_perf = 0.0;
    std::vector<std::string> schema;
    std::vector<double> delta;
    std::vector<std::string> lao_rank;
    double sigma_lao = 0.0;
    RunResult base;
};

struct SelfResult {
    std::string run_id;
    parse::RankingList ranking;
    std::string response_text;
};

struct TriangulationOutcome {
    std::string run_id;
    attribution::AttributionRecord attribution;
    attribution::DependenceRecord dependence;
    attribution::TriangulationRecord triangulation;
    attribution::quadrant regime = attribution::quadrant::unclassified;
    double pen_acc = 0.0;
};

namespace detail {

inline json metrics_to_json(const metrics::MetricsRecord& m) {
    return json{{"acc", m.acc},         {"macro_f1", m.macro_f1},
                {"set_jacc", m.set_jacc}, {"len_f1", m.len_f1},
                {"unk_rate", m.unk_rate}, {"pen_acc", m.pen_acc},
                {"acc_delta", m.acc_delta}};
}

inline const char* note_name(parse::extraction_note n) {
    switch (n) {
        case parse::extraction_note::clean: return "clean";
        case parse::extraction_note::salvaged: return "salvaged";
        case parse::extraction_note::empty: return "empty";
    }
    return "empty";
}

inline const char* reason_name(parse::drop_reason r) {
    switch (r) {
        case parse::drop_reason::unknown_name: return "unknown-name";
        case parse::drop_reason::duplicate: return "duplicate";
        case parse::drop_reason::label_token: return "label-token";
    }
    return "unknown-name";
}

inline Dataset chunk_of(const Dataset& test, std::size_t begin, std::size_t end) {
    Dataset c = test;
    c.rows.assign(test.rows.begin() + static_cast<std::ptrdiff_t>(begin),
                  test.rows.begin() + static_cast<std::ptrdiff_t>(end));
    return c;
}

inline json exchange_record(std::size_t index, const prompt::PromptBundle& b,
                            const std::string& fingerprint,
                            const gateway::RawResponse& r) {
    return json{
        {"chunk_index", index},
        {"variant",
         b.kind == prompt::variant::prediction ? "prediction" : "self_attribution"},
        {"fingerprint", fingerprint},
        {"prompt",
         {{"instruction", b.instruction},
          {"table_block", b.table_block},
          {"question", b.question},
          {"response_format", b.response_format},
          {"shots", b.shots},
          {"expected_predictions", b.expected_predictions},
          {"ablated", std::vector<std::string>(b.ablated_features.begin(),
                                               b.ablated_features.end())}}},
        {"response",
         {{"text", r.text},
          {"model_id", r.model_id},
          {"latency_ms", r.latency_ms},
          {"retries", r.retries},
          {"truncated", r.truncated}}}};
}

// answer one bundle: from the persisted store when resuming, else by asking
// the configured model; returns the response and whether it came from disk
inline std::pair<gateway::RawResponse, bool> answer(
    const RunConfig& config, const RunStore& store, std::size_t index,
    const prompt::PromptBundle& bundle, const Dataset& dataset_context,
    const gateway::transport_fn& transport) {
    const std::string fp = gateway::request_fingerprint(
        config.model_id(), config.decoding, bundle.full_text());

    if (config.resume && store.has_exchange(index)) {
        const json rec = store.read_exchange(index);
        if (rec.value("fingerprint", "") != fp)
            throw store_error("persisted exchange " + std::to_string(index) +
                              " does not match this configuration (fingerprint drift)");
        gateway::RawResponse r;
        r.text = rec["response"].value("text", "");
        r.model_id = rec["response"].value("model_id", "");
        r.latency_ms = rec["response"].value("latency_ms", 0.0);
        r.retries = rec["response"].value("retries", 0);
        r.truncated = rec["response"].value("truncated", false);
        r.request_fingerprint = fp;
        return {std::move(r), true};
    }

    gateway::RawResponse r =
        config.oracle
            ? gateway::oracle_complete(*config.oracle, bundle, dataset_context)
            : gateway::complete(*config.endpoint, bundle, config.decoding, transport);
    r.request_fingerprint = fp;
    return {std::move(r), false};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// prediction runs
// ---------------------------------------------------------------------------

inline Dataset load_config_dataset(const RunConfig& config) {
    return corpus::load_dataset(fs_read(config.descriptor_path),
                                fs_read(config.table_path));
}

inline RunResult run_predict_on(const Dataset& dataset, const RunConfig& config,
                                run_mode mode,
                                const gateway::transport_fn& transport = {}) {
    config.validate();
    if (config.oracle) config.oracle->validate_for(dataset);

    auto [train, test] = corpus::stratified_split(
        dataset, {config.test_fraction, config.seed_split});
    const std::size_t k = mode == run_mode::few ? config.shots : 0;

    std::vector<prompt::PromptBundle> bundles;
    for (std::size_t begin = 0; begin < test.n(); begin += config.rows_per_prompt) {
        const std::size_t end = std::min(test.n(), begin + config.rows_per_prompt);
        bundles.push_back(prompt::build_prediction_prompt(
            train, detail::chunk_of(test, begin, end),
            prompt::ShotSelection{k, config.seed_shots}, config.ablate));
    }

    const std::string mode_tag = std::string("predict-") + to_string(mode);
    const std::string run_id = derive_run_id(config, mode_tag);
    RunStore store(config.out_dir, run_id);
    json snapshot = config.to_json();
    snapshot["mode"] = mode_tag;
    snapshot["run_id"] = run_id;
    store.write_config(snapshot);

    // answer every chunk (concurrently for endpoints), then persist exchanges
    // in chunk order before any parsing or scoring
    const std::size_t n_chunks = bundles.size();
    std::vector<std::optional<gateway::RawResponse>> responses(n_chunks);
    std::vector<bool> from_store(n_chunks, false);
    std::vector<std::exception_ptr> failures(n_chunks);

    const int parallelism =
        config.endpoint ? std::max(1, config.endpoint->parallelism) : 1;
    if (parallelism > 1 && n_chunks > 1) {
        gateway::rate_gate gate;
        std::atomic<std::size_t> cursor{0};
        auto worker = [&]() {
            for (;;) {
                const std::size_t i = cursor.fetch_add(1);
                if (i >= n_chunks) return;
                try {
                    if (!(config.resume && store.has_exchange(i)))
                        gate.pace(config.endpoint->min_interval_ms);
                    auto [resp, replayed] = detail::answer(config, store, i,
                                                           bundles[i], train, transport);
                    responses[i] = std::move(resp);
                    from_store[i] = replayed;
                } catch (...) {
                    failures[i] = std::current_exception();
                }
            }
        };
        std::vector<std::thread> pool;
        const std::size_t nthreads =
            std::min<std::size_t>(static_cast<std::size_t>(parallelism), n_chunks);
        for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    } else {
        gateway::rate_gate gate;
        for (std::size_t i = 0; i < n_chunks; ++i) {
            try {
                if (config.endpoint && !(config.resume && store.has_exchange(i)))
                    gate.pace(config.endpoint->min_interval_ms);
                auto [resp, replayed] =
                    detail::answer(config, store, i, bundles[i], train, transport);
                responses[i] = std::move(resp);
                from_store[i] = replayed;
            } catch (...) {
                failures[i] = std::current_exception();
                break;
            }
        }
    }

    for (std::size_t i = 0; i < n_chunks; ++i) {
        if (!responses[i]) continue;
        if (from_store[i]) continue;  // already on disk, bytes preserved
        store.write_exchange(i, detail::exchange_record(
                                    i, bundles[i],
                                    responses[i]->request_fingerprint, *responses[i]));
    }
    for (std::size_t i = 0; i < n_chunks; ++i)
        if (failures[i]) std::rethrow_exception(failures[i]);

    // parse, align per chunk, aggregate globally over the concatenation
    parse::AlignedPairs global_pairs;
    parse::PredictionList global_pred;
    std::vector<metrics::MetricsRecord> per_chunk;
    json chunk_records = json::array();
    std::size_t total_np = 0, total_ng = 0, total_unknown = 0;
    for (std::size_t i = 0; i < n_chunks; ++i) {
        const auto pred = parse::parse_predictions(responses[i]->text, dataset.labels);
        std::vector<int> truth;
        const std::size_t begin = i * config.rows_per_prompt;
        const std::size_t end = std::min(test.n(), begin + config.rows_per_prompt);
        for (std::size_t r = begin; r < end; ++r) truth.push_back(test.rows[r].label);

        const auto pairs = parse::align(pred, truth);
        const auto rec = metrics::compute_metrics(pred, truth, dataset.labels,
                                                  config.penalties);
        per_chunk.push_back(rec);
        chunk_records.push_back(json{{"index", i},
                                     {"fingerprint", responses[i]->request_fingerprint},
                                     {"n_p", pred.n_p()},
                                     {"n_g", truth.size()},
                                     {"extraction_note", detail::note_name(pred.note)},
                                     {"unknown_count", pred.unknown_positions.size()},
                                     {"metrics", detail::metrics_to_json(rec)}});

        for (const auto& p : pairs.pairs) global_pairs.pairs.push_back(p);
        for (std::size_t u = 0; u < pred.values.size(); ++u) {
            if (pred.unknown_positions.count(u))
                global_pred.unknown_positions.insert(global_pred.values.size());
            global_pred.values.push_back(pred.values[u]);
        }
        total_np += pred.n_p();
        total_ng += truth.size();
        total_unknown += pred.unknown_positions.size();
    }
    global_pairs.n_p = total_np;
    global_pairs.n_g = total_ng;

    RunResult result;
    result.run_id = run_id;
    result.config = snapshot;
    result.per_chunk = std::move(per_chunk);
    result.n_p = total_np;
    result.n_g = total_ng;
    result.store_dir = store.dir().string();
    result.global.acc = metrics::accuracy(global_pairs);
    result.global.macro_f1 = metrics::macro_f1(global_pairs);
    result.global.set_jacc = metrics::set_jaccard(global_pairs, dataset.labels);
    result.global.len_f1 = metrics::len_f1(total_np, total_ng);
    result.global.unk_rate =
        total_np == 0 ? 0.0
                      : static_cast<double>(total_unknown) / static_cast<double>(total_np);
    result.global.pen_acc = metrics::penalized_accuracy(
        result.global.acc, result.global.len_f1, result.global.unk_rate,
        config.penalties);
    result.global.acc_delta = result.global.acc - result.global.pen_acc;

    json out;
    out["result_schema_version"] = result_schema_version;
    out["run_id"] = run_id;
    out["mode"] = mode_tag;
    out["dataset"] = dataset.name;
    out["model"] = config.model_id();
    out["config"] = snapshot;
    out["chunks"] = std::move(chunk_records);
    out["global"] = detail::metrics_to_json(result.global);
    out["global"]["n_p"] = total_np;
    out["global"]["n_g"] = total_ng;
    store.write_result(out);
    return result;
}

inline RunResult run_predict(const RunConfig& config, run_mode mode,
                             const gateway::transport_fn& transport = {}) {
    return run_predict_on(load_config_dataset(config), config, mode, transport);
}

// ---------------------------------------------------------------------------
// LAO sweep: one base run plus one ablated run per feature (m+1 total)
// ---------------------------------------------------------------------------

namespace detail {

inline double pick_perf(const metrics::MetricsRecord& m, perf_metric p) {
    switch (p) {
        case perf_metric::accuracy: return m.acc;
        case perf_metric::macro_f1: return m.macro_f1;
        case perf_metric::pen_acc: return m.pen_acc;
    }
    return m.acc;
}

}  // namespace detail

inline SweepResult run_lao_sweep_on(const Dataset& dataset, const RunConfig& config,
                                    run_mode mode = run_mode::zero,
                                    const gateway::transport_fn& transport = {}) {
    config.validate();
    if (!config.ablate.empty())
        throw config_error("the LAO sweep manages ablation itself; clear the ablate set");

    SweepResult sweep;
    sweep.schema = dataset.feature_names();
    sweep.base = run_predict_on(dataset, config, mode, transport);
    sweep.base_run_id = sweep.base.run_id;
    sweep.base_perf = detail::pick_perf(sweep.base.global, config.perf);

    std::map<std::string, double> ablated_perfs;
    for (const auto& name : sweep.schema) {
        RunConfig child = config;
        child.ablate = {name};
        const RunResult r = run_predict_on(dataset, child, mode, transport);
        sweep.feature_run_ids[name] = r.run_id;
        ablated_perfs[name] = detail::pick_perf(r.global, config.perf);
    }

    auto [delta, rank] = attribution::lao_attribution(sweep.schema, sweep.base_perf,
                                                      ablated_perfs);
    sweep.delta = std::move(delta);
    sweep.lao_rank = std::move(rank);
    sweep.sigma_lao = attribution::lao_magnitude(sweep.delta);

    sweep.sweep_id = derive_run_id(config, std::string("lao-sweep-") + to_string(mode));
    RunStore store(config.out_dir, sweep.sweep_id);
    json snapshot = config.to_json();
    snapshot["mode"] = std::string("lao-sweep-") + to_string(mode);
    snapshot["run_id"] = sweep.sweep_id;
    store.write_config(snapshot);

    json delta_obj = json::object();
    for (std::size_t j = 0; j < sweep.schema.size(); ++j)
        delta_obj[sweep.schema[j]] = sweep.delta[j];
    json rec;
    rec["result_schema_version"] = result_schema_version;
    rec["sweep_id"] = sweep.sweep_id;
    rec["dataset"] = dataset.name;
    rec["model"] = config.model_id();
    rec["perf_metric"] = to_string(config.perf);
    rec["base_run"] = sweep.base_run_id;
    rec["feature_runs"] = sweep.feature_run_ids;
    rec["base_perf"] = sweep.base_perf;
    rec["delta"] = std::move(delta_obj);
    rec["lao_rank"] = sweep.lao_rank;
    rec["sigma_lao"] = sweep.sigma_lao;
    fs_write(store.dir() / "attribution.json", dump_record(rec));
    return sweep;
}

inline SweepResult run_lao_sweep(const RunConfig& config, run_mode mode = run_mode::zero,
                                 const gateway::transport_fn& transport = {}) {
    return run_lao_sweep_on(load_config_dataset(config), config, mode, transport);
}

// ---------------------------------------------------------------------------
// self-attribution
// ---------------------------------------------------------------------------

inline SelfResult run_self_attribution_on(const Dataset& dataset, const RunConfig& config,
                                          const gateway::transport_fn& transport = {}) {
    config.validate();
    const Dataset view =
        config.ablate.empty() ? dataset : corpus::ablate_feature(dataset, config.ablate);
    if (config.oracle) config.oracle->validate_for(view);

    const auto bundle = prompt::build_self_attribution_prompt(view);
    const std::string run_id = derive_run_id(config, "self-attribution");
    RunStore store(config.out_dir, run_id);
    json snapshot = config.to_json();
    snapshot["mode"] = "self-attribution";
    snapshot["run_id"] = run_id;
    store.write_config(snapshot);

    auto [response, replayed] =
        detail::answer(config, store, 0, bundle, view, transport);
    if (!replayed)
        store.write_exchange(
            0, detail::exchange_record(0, bundle, response.request_fingerprint, response));

    SelfResult out;
    out.run_id = run_id;
    out.response_text = response.text;
    out.ranking = parse::parse_feature_ranking(response.text, view.features);

    json dropped = json::array();
    for (const auto& [token, reason] : out.ranking.dropped)
        dropped.push_back(json::array({token, detail::reason_name(reason)}));
    json rec;
    rec["result_schema_version"] = result_schema_version;
    rec["run_id"] = run_id;
    rec["dataset"] = dataset.name;
    rec["model"] = config.model_id();
    rec["ranking"] = out.ranking.names;
    rec["dropped"] = std::move(dropped);
    rec["response_text"] = response.text;
    store.write_result(rec);
    return out;
}

inline SelfResult run_self_attribution(const RunConfig& config,
                                       const gateway::transport_fn& transport = {}) {
    return run_self_attribution_on(load_config_dataset(config), config, transport);
}

// ---------------------------------------------------------------------------
// triangulation: sweep + self-report + dependence, assembled and classified
// ---------------------------------------------------------------------------

inline TriangulationOutcome run_triangulation_on(
    const Dataset& dataset, const RunConfig& config, run_mode mode = run_mode::zero,
    const gateway::transport_fn& transport = {}) {
    const SweepResult sweep = run_lao_sweep_on(dataset, config, mode, transport);
    const SelfResult self = run_self_attribution_on(dataset, config, transport);
    const auto dependence = attribution::feature_label_dependence(dataset, config.bins);

    TriangulationOutcome out;
    out.dependence = dependence;
    out.pen_acc = sweep.base.global.pen_acc;

    attribution::AttributionRecord& att = out.attribution;
    att.self_rank = self.ranking;
    att.schema = sweep.schema;
    att.delta = sweep.delta;
    att.lao_rank = sweep.lao_rank;
    att.sigma_lao = sweep.sigma_lao;
    const std::size_t k = config.self_att_k ? config.self_att_k : sweep.schema.size();
    att.self_att_at_k = attribution::self_att_at_k(self.ranking, sweep.schema, k);
    att.self_faith_rho = attribution::spearman_rho(self.ranking.names, sweep.lao_rank);
    att.self_faith_p = attribution::permutation_pvalue(
        self.ranking.names, sweep.lao_rank, config.permutations, config.seed_perm);

    out.triangulation =
        attribution::triangulate(self.ranking.names, sweep.lao_rank,
                                 dependence.nmi_rank, config.permutations,
                                 config.seed_perm);
    out.regime = attribution::classify_regime(out.pen_acc, att.self_faith_rho,
                                              config.acc_threshold,
                                              config.faith_threshold);

    out.run_id = derive_run_id(config, std::string("triangulate-") + to_string(mode));
    RunStore store(config.out_dir, out.run_id);
    json snapshot = config.to_json();
    snapshot["mode"] = std::string("triangulate-") + to_string(mode);
    snapshot["run_id"] = out.run_id;
    store.write_config(snapshot);

    auto opt = [](const std::optional<double>& v) {
        return v ? json(*v) : json(nullptr);
    };
    json delta_obj = json::object();
    for (std::size_t j = 0; j < att.schema.size(); ++j)
        delta_obj[att.schema[j]] = att.delta[j];
    json dep = json::object();
    for (std::size_t j = 0; j < dependence.features.size(); ++j)
        dep[dependence.features[j]] = {{"nmi", dependence.nmi[j]},
                                       {"cramers_v", opt(dependence.cramers_v[j])},
                                       {"pearson_r", opt(dependence.pearson_r[j])},
                                       {"spearman_rho", opt(dependence.spearman_r[j])}};
    json rec;
    rec["result_schema_version"] = result_schema_version;
    rec["run_id"] = out.run_id;
    rec["dataset"] = dataset.name;
    rec["model"] = config.model_id();
    rec["sweep"] = sweep.sweep_id;
    rec["self_run"] = self.run_id;
    rec["pen_acc"] = out.pen_acc;
    rec["self_rank"] = self.ranking.names;
    rec["lao_rank"] = att.lao_rank;
    rec["nmi_rank"] = dependence.nmi_rank;
    rec["delta"] = std::move(delta_obj);
    rec["sigma_lao"] = att.sigma_lao;
    rec["self_att_at_k"] = att.self_att_at_k;
    rec["self_att_k"] = k;
    rec["self_faith_rho"] = opt(att.self_faith_rho);
    rec["self_faith_p"] = opt(att.self_faith_p);
    rec["dependence"] = std::move(dep);
    rec["triangulation"] = {
        {"self_lao", {{"rho", opt(out.triangulation.self_lao.rho)},
                      {"p", opt(out.triangulation.self_lao.p)}}},
        {"self_nmi", {{"rho", opt(out.triangulation.self_nmi.rho)},
                      {"p", opt(out.triangulation.self_nmi.p)}}},
        {"lao_nmi", {{"rho", opt(out.triangulation.lao_nmi.rho)},
                     {"p", opt(out.triangulation.lao_nmi.p)}}}};
    rec["regime"] = attribution::to_string(out.regime);
    store.write_result(rec);
    return out;
}

inline TriangulationOutcome run_triangulation(
    const RunConfig& config, run_mode mode = run_mode::zero,
    const gateway::transport_fn& transport = {}) {
    return run_triangulation_on(load_config_dataset(config), config, mode, transport);
}

// ---------------------------------------------------------------------------
// reports
// ---------------------------------------------------------------------------

enum class report_format { table, structured };

namespace detail {

inline std::string fmt3(double v) { return format_fixed(v, 3); }

inline std::string rho_cell(const json& pair) {
    if (pair["rho"].is_null()) return "NaN";
    std::string out = fmt3(pair["rho"].get<double>());
    if (!pair["p"].is_null()) out += " [" + fmt3(pair["p"].get<double>()) + "]";
    return out;
}

}  // namespace detail

// scan a run-store root for result records; `kind` selects result.json
// ("predict"/"self") or triangulation records
inline std::vector<json> collect_results(const std::string& runs_root) {
    std::vector<std::string> dirs;
    if (fs::exists(runs_root))
        for (const auto& entry : fs::directory_iterator(runs_root))
            if (entry.is_directory()) dirs.push_back(entry.path().string());
    std::sort(dirs.begin(), dirs.end());
    std::vector<json> out;
    for (const auto& dir : dirs) {
        for (const char* name : {"result.json", "attribution.json"}) {
            const fs::path p = fs::path(dir) / name;
            if (fs::exists(p)) out.push_back(json::parse(fs_read(p)));
        }
    }
    return out;
}

inline std::vector<std::string> emit_report(const std::vector<json>& results,
                                            report_format format,
                                            const std::string& out_dir) {
    if (results.empty()) throw store_error("report needs at least one result record");
    for (const auto& r : results)
        if (r.value("result_schema_version", -1) != result_schema_version)
            throw store_error("mixed or unsupported result schema versions in report input");

    struct MetricsRow {
        std::string dataset, model, mode;
        json m;
    };
    std::vector<MetricsRow> metric_rows;
    std::vector<json> tri_rows;
    for (const auto& r : results) {
        if (r.contains("global") && r.contains("mode"))
            metric_rows.push_back({r.value("dataset", ""), r.value("model", ""),
                                   r.value("mode", ""), r["global"]});
        else if (r.contains("triangulation"))
            tri_rows.push_back(r);
    }
    auto row_key = [](const MetricsRow& r) { return r.dataset + "\x1f" + r.model + "\x1f" + r.mode; };
    std::stable_sort(metric_rows.begin(), metric_rows.end(),
                     [&](const MetricsRow& a, const MetricsRow& b) {
                         return row_key(a) < row_key(b);
                     });
    std::stable_sort(tri_rows.begin(), tri_rows.end(), [](const json& a, const json& b) {
        const std::string ka = a.value("dataset", "") + "\x1f" + a.value("model", "");
        const std::string kb = b.value("dataset", "") + "\x1f" + b.value("model", "");
        return ka < kb;
    });

    std::vector<std::string> written;
    if (format == report_format::table) {
        std::string metrics_csv =
            "dataset,model,mode,acc,macro_f1,pen_acc,len_f1,unk_pct,set_jacc\n";
        for (const auto& r : metric_rows) {
            metrics_csv += corpus::detail::csv_escape(r.dataset) + ",";
            metrics_csv += corpus::detail::csv_escape(r.model) + ",";
            metrics_csv += r.mode + ",";
            metrics_csv += detail::fmt3(r.m.value("acc", 0.0)) + ",";
            metrics_csv += detail::fmt3(r.m.value("macro_f1", 0.0)) + ",";
            metrics_csv += detail::fmt3(r.m.value("pen_acc", 0.0)) + ",";
            metrics_csv += detail::fmt3(r.m.value("len_f1", 0.0)) + ",";
            metrics_csv += format_fixed(r.m.value("unk_rate", 0.0) * 100.0, 1) + ",";
            metrics_csv += detail::fmt3(r.m.value("set_jacc", 0.0)) + "\n";
        }
        const fs::path metrics_path = fs::path(out_dir) / "metrics.csv";
        fs_write(metrics_path, metrics_csv);
        written.push_back(metrics_path.string());

        std::string tri_csv = "dataset,model,self_lao,self_nmi,lao_nmi\n";
        std::string quad_csv = "dataset,model,pen_acc,self_faith_rho,regime\n";
        for (const auto& r : tri_rows) {
            const auto& t = r["triangulation"];
            tri_csv += corpus::detail::csv_escape(r.value("dataset", "")) + ",";
            tri_csv += corpus::detail::csv_escape(r.value("model", "")) + ",";
            tri_csv += detail::rho_cell(t["self_lao"]) + ",";
            tri_csv += detail::rho_cell(t["self_nmi"]) + ",";
            tri_csv += detail::rho_cell(t["lao_nmi"]) + "\n";

            quad_csv += corpus::detail::csv_escape(r.value("dataset", "")) + ",";
            quad_csv += corpus::detail::csv_escape(r.value("model", "")) + ",";
            quad_csv += detail::fmt3(r.value("pen_acc", 0.0)) + ",";
            quad_csv += r["self_faith_rho"].is_null()
                            ? "NaN"
                            : detail::fmt3(r["self_faith_rho"].get<double>());
            quad_csv += std::string(",") + r.value("regime", "unclassified") + "\n";
        }
        if (!tri_rows.empty()) {
            const fs::path tri_path = fs::path(out_dir) / "triangulation.csv";
            fs_write(tri_path, tri_csv);
            written.push_back(tri_path.string());
            const fs::path quad_path = fs::path(out_dir) / "quadrants.csv";
            fs_write(quad_path, quad_csv);
            written.push_back(quad_path.string());
        }
    } else {
        json doc;
        doc["result_schema_version"] = result_schema_version;
        json rows = json::array();
        for (const auto& r : metric_rows)
            rows.push_back(json{{"dataset", r.dataset},
                                {"model", r.model},
                                {"mode", r.mode},
                                {"metrics", r.m}});
        doc["metrics"] = std::move(rows);
        json tris = json::array();
        for (const auto& r : tri_rows) tris.push_back(r);
        doc["triangulation"] = std::move(tris);
        const fs::path path = fs::path(out_dir) / "report.json";
        fs_write(path, dump_record(doc));
        written.push_back(path.string());
    }
    return written;
}

}  // namespace stads::harness

// stads — command-line front end for the STaDS tabular-decision evaluation
// toolkit: render prompts, run predictions against an endpoint or a scripted
// oracle, sweep leave-any-out attributions, collect self-attributions,
// compute feature–label dependence, triangulate, and emit reports.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stads/stads.hpp"

namespace {

using namespace stads;

struct CommonOpts {
    std::string descriptor_path;
    std::string table_path;
    std::string oracle_path;
    std::string endpoint_path;
    std::string out_dir = "runs";
    std::string mode = "zero";
    std::vector<std::string> ablate;
    harness::RunConfig config;
    std::string perf = "accuracy";
    double alpha = 0.5, beta = 0.5;

    void attach_data(CLI::App* cmd, bool required = true) {
        auto* d = cmd->add_option("--descriptor", descriptor_path,
                                  "dataset descriptor JSON file");
        auto* t = cmd->add_option("--table", table_path, "dataset table CSV file");
        if (required) {
            d->required();
            t->required();
        }
    }

    void attach_model(CLI::App* cmd) {
        cmd->add_option("--oracle", oracle_path,
                        "scripted oracle rule JSON file (offline model)");
        cmd->add_option("--endpoint", endpoint_path,
                        "endpoint descriptor JSON file (credential read from its "
                        "environment variable)");
    }

    void attach_run(CLI::App* cmd) {
        cmd->add_option("--shots", config.shots, "few-shot demonstration count")
            ->capture_default_str();
        cmd->add_option("--rows-per-prompt", config.rows_per_prompt,
                        "masked rows per prompt")
            ->capture_default_str();
        cmd->add_option("--alpha", alpha, "length-penalty weight")
            ->capture_default_str();
        cmd->add_option("--beta", beta, "unknown-label penalty weight")
            ->capture_default_str();
        cmd->add_option("--perf-metric", perf,
                        "performance metric for attribution: accuracy|macro_f1|pen_acc")
            ->capture_default_str();
        cmd->add_option("--permutations", config.permutations,
                        "permutation-test draws")
            ->capture_default_str();
        cmd->add_option("--seed-split", config.seed_split, "train/test split seed")
            ->capture_default_str();
        cmd->add_option("--seed-shots", config.seed_shots, "shot-selection seed")
            ->capture_default_str();
        cmd->add_option("--seed-perm", config.seed_perm, "permutation-test seed")
            ->capture_default_str();
        cmd->add_option("--test-fraction", config.test_fraction,
                        "held-out fraction for the masked partition")
            ->capture_default_str();
        cmd->add_option("--bins", config.bins, "quantile bins for numeric dependence")
            ->capture_default_str();
        cmd->add_option("--acc-threshold", config.acc_threshold,
                        "penalized-accuracy threshold for regime classification")
            ->capture_default_str();
        cmd->add_option("--faith-threshold", config.faith_threshold,
                        "self-faithfulness threshold for regime classification")
            ->capture_default_str();
        cmd->add_option("--self-att-k", config.self_att_k,
                        "k for SelfAtt@k (0 = all schema features)")
            ->capture_default_str();
        cmd->add_option("--temperature", config.decoding.temperature,
                        "sampling temperature")
            ->capture_default_str();
        cmd->add_option("--top-p", config.decoding.top_p, "nucleus mass")
            ->capture_default_str();
        cmd->add_option("--max-new-tokens", config.decoding.max_new_tokens,
                        "completion token budget")
            ->capture_default_str();
        cmd->add_option("--ablate", ablate,
                        "feature to drop before prompting (repeatable)");
        cmd->add_option("--out", out_dir, "run-store root directory")
            ->capture_default_str();
        cmd->add_flag("--resume", config.resume,
                      "replay persisted exchanges instead of re-asking the model");
    }

    void attach_mode(CLI::App* cmd) {
        cmd->add_option("--mode", mode, "prompting mode: zero|few")
            ->check(CLI::IsMember({"zero", "few"}))
            ->capture_default_str();
    }

    harness::RunConfig build() {
        config.descriptor_path = descriptor_path;
        config.table_path = table_path;
        config.out_dir = out_dir;
        config.penalties = {alpha, beta};
        config.perf = harness::perf_metric_from(perf);
        config.ablate = std::set<std::string>(ablate.begin(), ablate.end());
        if (!oracle_path.empty())
            config.oracle =
                gateway::OracleRule::from_json(nlohmann::json::parse(harness::fs_read(oracle_path)));
        if (!endpoint_path.empty())
            config.endpoint = gateway::EndpointDescriptor::from_json(
                nlohmann::json::parse(harness::fs_read(endpoint_path)));
        return config;
    }

    harness::run_mode run_mode() const {
        return mode == "few" ? harness::run_mode::few : harness::run_mode::zero;
    }
};

std::string fmt3(double v) { return format_fixed(v, 3); }

void print_metrics(const metrics::MetricsRecord& m) {
    std::printf("  Acc       %s\n", fmt3(m.acc).c_str());
    std::printf("  Macro-F1  %s\n", fmt3(m.macro_f1).c_str());
    std::printf("  PenAcc    %s\n", fmt3(m.pen_acc).c_str());
    std::printf("  Len-F1    %s\n", fmt3(m.len_f1).c_str());
    std::printf("  UnkLbl%%   %s\n", format_fixed(m.unk_rate * 100.0, 1).c_str());
    std::printf("  Set-Jacc  %s\n", fmt3(m.set_jacc).c_str());
}

std::string opt_text(const std::optional<double>& v) {
    return v ? fmt3(*v) : std::string("NaN");
}

std::string rho_p_text(const attribution::RhoP& rp) {
    if (!rp.rho) return "NaN";
    return fmt3(*rp.rho) + " [" + opt_text(rp.p) + "]";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"STaDS: masked-label tabular decision evaluation"};
    app.require_subcommand(1);

    CommonOpts render_o, predict_o, self_o, lao_o, dep_o, tri_o;

    // render -----------------------------------------------------------------
    auto* render = app.add_subcommand("render", "print a prompt without calling any model");
    render_o.attach_data(render);
    render_o.attach_run(render);
    render_o.attach_mode(render);
    std::string render_variant = "prediction";
    std::size_t render_chunk = 0;
    render->add_option("--variant", render_variant,
                       "prompt variant: prediction|self-attribution")
        ->check(CLI::IsMember({"prediction", "self-attribution"}))
        ->capture_default_str();
    render->add_option("--chunk", render_chunk, "chunk index to render")
        ->capture_default_str();

    // predict ----------------------------------------------------------------
    auto* predict = app.add_subcommand("predict", "run a masked-label prediction pass");
    predict_o.attach_data(predict);
    predict_o.attach_model(predict);
    predict_o.attach_run(predict);
    predict_o.attach_mode(predict);

    // attribute-self ----------------------------------------------------------
    auto* attr_self = app.add_subcommand("attribute-self",
                                         "ask the model to rank its own feature reliance");
    self_o.attach_data(attr_self);
    self_o.attach_model(attr_self);
    self_o.attach_run(attr_self);

    // attribute-lao -----------------------------------------------------------
    auto* attr_lao = app.add_subcommand(
        "attribute-lao", "leave-any-out sweep: base run plus one ablated run per feature");
    lao_o.attach_data(attr_lao);
    lao_o.attach_model(attr_lao);
    lao_o.attach_run(attr_lao);
    lao_o.attach_mode(attr_lao);

    // dependence ---------------------------------------------------------------
    auto* dependence = app.add_subcommand(
        "dependence", "feature-label statistical dependence (no model involved)");
    dep_o.attach_data(dependence);
    dependence->add_option("--bins", dep_o.config.bins,
                           "quantile bins for numeric features")
        ->capture_default_str();

    // triangulate ---------------------------------------------------------------
    auto* triangulate = app.add_subcommand(
        "triangulate", "self-report vs behavior vs statistics, with regime classification");
    tri_o.attach_data(triangulate);
    tri_o.attach_model(triangulate);
    tri_o.attach_run(triangulate);
    tri_o.attach_mode(triangulate);

    // report ---------------------------------------------------------------------
    auto* report = app.add_subcommand("report", "aggregate persisted runs into tables");
    std::string report_runs = "runs", report_out = ".", report_format = "table";
    report->add_option("--runs", report_runs, "run-store root to scan")
        ->capture_default_str();
    report->add_option("--out", report_out, "directory for the emitted files")
        ->capture_default_str();
    report->add_option("--format", report_format, "table|structured")
        ->check(CLI::IsMember({"table", "structured"}))
        ->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (render->parsed()) {
            auto config = render_o.build();
            const auto dataset = corpus::load_dataset(
                harness::fs_read(config.descriptor_path), harness::fs_read(config.table_path));
            if (render_variant == "self-attribution") {
                const auto view = config.ablate.empty()
                                      ? dataset
                                      : corpus::ablate_feature(dataset, config.ablate);
                std::cout << prompt::build_self_attribution_prompt(view).full_text();
                return 0;
            }
            auto [train, test] = corpus::stratified_split(
                dataset, {config.test_fraction, config.seed_split});
            const std::size_t k =
                render_o.run_mode() == harness::run_mode::few ? config.shots : 0;
            const std::size_t begin = render_chunk * config.rows_per_prompt;
            if (begin >= test.n())
                throw config_error("chunk " + std::to_string(render_chunk) +
                                   " is out of range for " + std::to_string(test.n()) +
                                   " masked rows");
            const std::size_t end = std::min(test.n(), begin + config.rows_per_prompt);
            corpus::Dataset chunk = test;
            chunk.rows.assign(test.rows.begin() + static_cast<std::ptrdiff_t>(begin),
                              test.rows.begin() + static_cast<std::ptrdiff_t>(end));
            std::cout << prompt::build_prediction_prompt(
                             train, chunk, {k, config.seed_shots}, config.ablate)
                             .full_text();
            return 0;
        }

        if (predict->parsed()) {
            auto config = predict_o.build();
            const auto result = harness::run_predict(config, predict_o.run_mode());
            std::printf("run %s (%s)\n", result.run_id.c_str(),
                        result.store_dir.c_str());
            std::printf("chunks %zu, n_p %zu, n_g %zu\n", result.per_chunk.size(),
                        result.n_p, result.n_g);
            print_metrics(result.global);
            return 0;
        }

        if (attr_self->parsed()) {
            auto config = self_o.build();
            const auto result = harness::run_self_attribution(config);
            std::printf("run %s\n", result.run_id.c_str());
            std::printf("ranking: %s\n", join(result.ranking.names, ", ").c_str());
            for (const auto& [token, reason] : result.ranking.dropped)
                std::printf("dropped: %s (%s)\n", token.c_str(),
                            harness::detail::reason_name(reason));
            return 0;
        }

        if (attr_lao->parsed()) {
            auto config = lao_o.build();
            const auto sweep = harness::run_lao_sweep(config, lao_o.run_mode());
            std::printf("sweep %s (base %s, %s = %s)\n", sweep.sweep_id.c_str(),
                        sweep.base_run_id.c_str(), harness::to_string(config.perf),
                        fmt3(sweep.base_perf).c_str());
            for (std::size_t j = 0; j < sweep.schema.size(); ++j)
                std::printf("  %-24s delta %+.4f\n", sweep.schema[j].c_str(),
                            sweep.delta[j]);
            std::printf("rank: %s\n", join(sweep.lao_rank, " > ").c_str());
            std::printf("sigma_LAO: %s\n", fmt3(sweep.sigma_lao).c_str());
            return 0;
        }

        if (dependence->parsed()) {
            const auto dataset = corpus::load_dataset(
                harness::fs_read(dep_o.descriptor_path), harness::fs_read(dep_o.table_path));
            const auto rec = attribution::feature_label_dependence(dataset, dep_o.config.bins);
            std::printf("%-24s %8s %10s %10s %10s\n", "feature", "NMI", "CramersV",
                        "Pearson", "Spearman");
            for (std::size_t j = 0; j < rec.features.size(); ++j)
                std::printf("%-24s %8s %10s %10s %10s\n", rec.features[j].c_str(),
                            fmt3(rec.nmi[j]).c_str(), opt_text(rec.cramers_v[j]).c_str(),
                            opt_text(rec.pearson_r[j]).c_str(),
                            opt_text(rec.spearman_r[j]).c_str());
            std::printf("rank: %s\n", join(rec.nmi_rank, " > ").c_str());
            return 0;
        }

        if (triangulate->parsed()) {
            auto config = tri_o.build();
            const auto out = harness::run_triangulation(config, tri_o.run_mode());
            std::printf("run %s\n", out.run_id.c_str());
            std::printf("pen_acc: %s\n", fmt3(out.pen_acc).c_str());
            std::printf("pi_self: %s\n", join(out.attribution.self_rank.names, " > ").c_str());
            std::printf("pi_LAO:  %s\n", join(out.attribution.lao_rank, " > ").c_str());
            std::printf("pi_NMI:  %s\n", join(out.dependence.nmi_rank, " > ").c_str());
            std::printf("sigma_LAO: %s  SelfAtt@k: %s\n",
                        fmt3(out.attribution.sigma_lao).c_str(),
                        fmt3(out.attribution.self_att_at_k).c_str());
            std::printf("Self-Faith rho [p]: %s\n",
                        rho_p_text({out.attribution.self_faith_rho,
                                    out.attribution.self_faith_p})
                            .c_str());
            std::printf("self~lao %s  self~nmi %s  lao~nmi %s\n",
                        rho_p_text(out.triangulation.self_lao).c_str(),
                        rho_p_text(out.triangulation.self_nmi).c_str(),
                        rho_p_text(out.triangulation.lao_nmi).c_str());
            std::printf("regime: %s\n", attribution::to_string(out.regime));
            return 0;
        }

        if (report->parsed()) {
            const auto results = harness::collect_results(report_runs);
            const auto written = harness::emit_report(
                results,
                report_format == "structured" ? harness::report_format::structured
                                              : harness::report_format::table,
                report_out);
            for (const auto& f : written) std::printf("wrote %s\n", f.c_str());
            return 0;
        }
    } catch (const stads::error& e) {
        std::fprintf(stderr, "error (%s): %s\n", e.kind().c_str(), e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}

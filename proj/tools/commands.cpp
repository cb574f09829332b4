#include "commands.hpp"

#include <omp.h>

#include <iostream>
#include <optional>

#include "CLI11.hpp"

#include "dass/error.hpp"
#include "dass/http_server.hpp"
#include "dass/pipeline.hpp"
#include "dass/service.hpp"

namespace dass::cli {

namespace {

struct AnalysisFlags {
    std::string cohort;
    bool allow_missing = false;
    std::string analysis;
    std::string spec;
    std::string params;
    std::string outcome;
    std::string confounders;
    std::optional<int> selected;
    bool factor = false;

    void add_to(CLI::App* app, bool with_outcome) {
        app->add_option("--cohort", cohort, "Cohort file (.csv or .json)")->required();
        app->add_flag("--allow-missing", allow_missing, "Accept organs with no dose data");
        app->add_option("--analysis", analysis, "Full analysis JSON; the files below override its parts");
        app->add_option("--spec", spec, "FeatureSpec JSON");
        app->add_option("--params", params, "ClusterParams JSON");
        if (with_outcome) {
            app->add_option("--outcome", outcome, "OutcomeSpec JSON");
            app->add_option("--confounders", confounders, "Comma-separated confounder names");
            app->add_option("--selected", selected, "Rank of the tracked cluster (default: highest dose)");
            app->add_flag("--factor", factor, "Test cluster membership as one k-level factor");
        }
    }

    Cohort load() const {
        LoadOptions opts;
        opts.allow_missing = allow_missing;
        return load_cohort(cohort, opts);
    }

    Analysis build() const {
        Analysis a;
        if (!analysis.empty()) a = analysis_from_json(read_json_file(analysis));
        if (!spec.empty()) a.spec = feature_spec_from_json(read_json_file(spec));
        if (!params.empty()) a.params = cluster_params_from_json(read_json_file(params));
        if (!outcome.empty()) a.outcome = outcome_spec_from_json(read_json_file(outcome));
        if (!confounders.empty()) a.confounders = parse_name_list(confounders);
        if (selected) a.selected_rank = selected;
        if (factor) a.factor = true;
        return a;
    }
};

bool is_csv(const std::string& path) { return path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0; }

void emit(const std::string& path, const std::string& text, std::ostream& out) {
    if (path.empty() || path == "-") out << text;
    else write_text_file_atomic(path, text);
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err, const Hooks& hooks) {
    CLI::App app{"Dose-feature patient stratification workbench", "dass"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "OpenMP threads (default: all cores)");

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic cohort with planted groups");
    std::string synth_config, synth_out, synth_truth;
    std::uint64_t synth_seed = 0;
    synth->add_option("--config", synth_config, "SyntheticConfig JSON");
    synth->add_option("--seed", synth_seed, "Generator seed");
    synth->add_option("--out", synth_out, "Cohort file (.csv or .json)")->required();
    synth->add_option("--truth", synth_truth, "Also write planted labels as JSON");

    // cluster
    auto* cluster = app.add_subcommand("cluster", "Cluster a cohort and write the rank-canonical model");
    AnalysisFlags cluster_flags;
    std::string cluster_out;
    cluster_flags.add_to(cluster, false);
    cluster->add_option("--out", cluster_out, "Model JSON (default: stdout)");

    // lrt
    auto* lrt = app.add_subcommand("lrt", "Likelihood-ratio tests of cluster membership against the outcome");
    AnalysisFlags lrt_flags;
    std::string lrt_thresholds, lrt_out;
    lrt_flags.add_to(lrt, true);
    lrt->add_option("--thresholds", lrt_thresholds, "Comma-separated severity thresholds (default: the outcome's)");
    lrt->add_option("--out", lrt_out, "Report (.json or .csv; default: JSON on stdout)");

    // search
    auto* search = app.add_subcommand("search", "One forward-search round over single feature-set edits");
    AnalysisFlags search_flags;
    std::string search_metric = "bic", search_out;
    search_flags.add_to(search, true);
    search->add_option("--metric", search_metric, "bic, aic or p");
    search->add_option("--out", search_out, "Effects (.csv or .json; default: JSON on stdout)");

    // rules
    auto* rules = app.add_subcommand("rules", "Mine dose-threshold rule sets for a binary target");
    AnalysisFlags rules_flags;
    std::string rules_target = "cluster", rules_miner, rules_scope = "all", rules_out;
    rules_flags.add_to(rules, true);
    rules->add_option("--target", rules_target, "outcome, cluster or cluster:<rank>");
    rules->add_option("--miner", rules_miner, "MinerConfig JSON");
    rules->add_option("--scope", rules_scope, "all (every organ and feature) or spec");
    rules->add_option("--out", rules_out, "Rule sets JSON (default: stdout)");

    // serve
    auto* serve = app.add_subcommand("serve", "Start the HTTP API");
    std::string serve_host = "127.0.0.1", serve_cohort, serve_layout;
    int serve_port = 8080;
    bool serve_dev = false;
    serve->add_option("--host", serve_host, "Bind address")->envname("DASS_HOST");
    serve->add_option("--port", serve_port, "Port (0 picks a free one)")->envname("DASS_PORT");
    serve->add_option("--cohort", serve_cohort, "Default cohort for new sessions");
    serve->add_option("--layout", serve_layout, "Organ layout JSON served at /organ_layout");
    serve->add_flag("--dev", serve_dev, "Permissive cross-origin headers");

    auto* repro = app.add_subcommand("repro-acceptance", "Run the acceptance criteria and print a pass/fail table");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? ok : validation;
    }
    if (threads > 0) omp_set_num_threads(threads);

    try {
        if (synth->parsed()) {
            SyntheticConfig cfg;
            if (!synth_config.empty()) cfg = synthetic_config_from_json(read_json_file(synth_config));
            const SyntheticCohort sc = generate_synthetic_cohort(cfg, synth_seed);
            const CohortFormat fmt = format_from_path(synth_out);
            write_text_file_atomic(synth_out, fmt == CohortFormat::csv ? cohort_to_csv(sc.cohort)
                                                                       : cohort_to_json_text(sc.cohort));
            if (!synth_truth.empty()) {
                Json truth = Json::array();
                for (std::size_t i = 0; i < sc.cohort.patients.size(); ++i)
                    truth.push_back({{"patient", sc.cohort.patients[i].id},
                                     {"group", sc.truth.group[i]},
                                     {"severe", sc.truth.severe[i]},
                                     {"severe_probability", sc.truth.severe_probability[i]}});
                write_text_file_atomic(synth_truth, render(Json{{"seed", synth_seed}, {"patients", truth}}));
            }
        } else if (cluster->parsed()) {
            const Cohort cohort = cluster_flags.load();
            const Analysis a = cluster_flags.build();
            const ClusterModel model = fit_model(cohort, a);
            emit(cluster_out, render(cluster_model_json(cohort, a.spec, model)), out);
        } else if (lrt->parsed()) {
            const Cohort cohort = lrt_flags.load();
            const Analysis a = lrt_flags.build();
            const std::vector<int> thresholds = lrt_thresholds.empty()
                                                    ? std::vector<int>{a.outcome.threshold}
                                                    : parse_int_list(lrt_thresholds, "thresholds");
            const ClusterModel model = fit_model(cohort, a);
            if (is_csv(lrt_out)) {
                LrtOptions opts;
                opts.factor = a.factor;
                emit(lrt_out, lrt_sweep_csv(lrt_threshold_sweep(cohort, model, a.outcome, thresholds, a.confounders, opts)),
                     out);
            } else {
                emit(lrt_out, render(lrt_document(cohort, a, model, thresholds)), out);
            }
        } else if (search->parsed()) {
            const Cohort cohort = search_flags.load();
            const Analysis a = search_flags.build();
            const AdditiveEffectsReport rep = run_search(cohort, a, parse_metric(search_metric));
            emit(search_out, is_csv(search_out) ? effects_csv(rep) : render(to_json(rep)), out);
        } else if (rules->parsed()) {
            if (rules_scope != "all" && rules_scope != "spec") throw ValidationError("scope", "scope must be all or spec");
            const Cohort cohort = rules_flags.load();
            const Analysis a = rules_flags.build();
            const MinerConfig config = rules_miner.empty() ? MinerConfig{} : miner_config_from_json(read_json_file(rules_miner));
            validate_miner_config(config);
            const ClusterModel model = fit_model(cohort, a);
            emit(rules_out, render(rules_document(cohort, a, model, rules_target, rules_scope == "all", config)), out);
        } else if (serve->parsed()) {
            ServiceOptions opts;
            opts.dev = serve_dev;
            if (!serve_layout.empty()) opts.organ_layout = serve_layout;
            if (!serve_cohort.empty()) opts.default_cohort = std::make_shared<const Cohort>(load_cohort(serve_cohort));
            Service service(opts);
            HttpServer server(service);
            const int port = server.bind(serve_host, serve_port);
            out << "listening on http://" << serve_host << ":" << port << std::endl;
            server.listen();
        } else if (repro->parsed()) {
            if (!hooks.repro_acceptance) {
                err << "error: acceptance suite not linked into this binary\n";
                return failure;
            }
            return hooks.repro_acceptance(out);
        }
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return validation;
    } catch (const EngineError& e) {
        err << "engine error: " << e.what() << "\n";
        return engine;
    } catch (const IoError& e) {
        err << "i/o error: " << e.what() << "\n";
        return io;
    }
    return ok;
}

}  // namespace dass::cli

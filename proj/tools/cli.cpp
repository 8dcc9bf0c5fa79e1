/// @file cli.cpp

#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <ostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cvwin/dataio.hpp"
#include "cvwin/errors.hpp"
#include "cvwin/rng.hpp"

namespace cvwin::cli {

using json = nlohmann::ordered_json;

namespace {

void config_error(const std::string& what) { throw Error(ErrorKind::kConfiguration, what); }

std::pair<std::string, std::string> split_pair(const std::string& spec) {
    const auto comma = spec.find(',');
    if (comma == std::string::npos || comma == 0 || comma + 1 == spec.size() ||
        spec.find(',', comma + 1) != std::string::npos) {
        config_error("--pair expects 'left,right' or 'all', got '" + spec + "'");
    }
    return {spec.substr(0, comma), spec.substr(comma + 1)};
}

void report_rejects(const std::vector<RejectedLine>& rejects, const std::vector<std::string>& warnings,
                    const std::filesystem::path& path, std::ostream& out) {
    for (const auto& w : warnings) out << "warning: " << w << "\n";
    if (rejects.empty()) return;
    write_rejects(rejects, path);
    out << rejects.size() << " malformed line(s) written to " << path.string() << "\n";
}

std::vector<PairDataset> load_joined(const RunConfig& config, std::ostream& out) {
    const auto annotations = load_annotations(config.annotations);
    report_rejects(annotations.rejects, annotations.warnings,
                   config.out_dir / "rejects_annotations.jsonl", out);
    std::vector<ScoreRow> scores;
    if (!config.scores.empty()) {
        auto loaded = load_scores(config.scores);
        report_rejects(loaded.rejects, loaded.warnings, config.out_dir / "rejects_scores.jsonl", out);
        scores = std::move(loaded.rows);
    }
    return join_scores(annotations.rows, scores);
}

PairDataset select_pair(const std::vector<PairDataset>& datasets, const std::string& spec) {
    if (datasets.empty()) throw Error(ErrorKind::kEmptyDataset, "no comparisons were loaded");
    if (spec.empty()) {
        if (datasets.size() != 1) {
            config_error(std::to_string(datasets.size()) +
                         " generator pairs present; choose one with --pair left,right");
        }
        return datasets.front();
    }
    const auto [a, b] = split_pair(spec);
    auto found = find_pair(datasets, a, b);
    if (!found) throw Error(ErrorKind::kEmptyDataset, "no comparisons between '" + a + "' and '" + b + "'");
    return *found;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::vector<std::size_t> choose_labeled(const PairDataset& dataset, const RunConfig& config) {
    std::vector<std::size_t> labeled;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (dataset.records()[i].reference_label) labeled.push_back(i);
    }
    if (!config.indices.empty()) {
        for (std::size_t idx : config.indices) {
            if (idx >= dataset.size()) {
                throw Error(ErrorKind::kIncompleteSample,
                            "index " + std::to_string(idx) + " out of range for " +
                                std::to_string(dataset.size()) + " records");
            }
        }
        return config.indices;
    }
    if (labeled.empty()) throw Error(ErrorKind::kEmptySample, "the pair has no reference labels");
    if (!config.k) return labeled;
    const auto picks = sample_indices(labeled.size(), {*config.k, config.sampling, config.seed});
    std::vector<std::size_t> chosen;
    chosen.reserve(picks.size());
    for (std::size_t p : picks) chosen.push_back(labeled[p]);
    return chosen;
}

}  // namespace

void RunConfig::validate() const {
    auto need = [&](const std::filesystem::path& p, const char* flag) {
        if (p.empty()) config_error(subcommand + " requires " + flag);
    };
    if (subcommand == "estimate") {
        need(annotations, "--annotations");
        if (pair == "all") config_error("estimate works on a single pair");
        if (k && *k == 0) config_error("--k must be >= 1");
        if (k && !indices.empty()) config_error("--k and --indices are mutually exclusive");
        if (alpha && method != Method::kControlVariates) {
            config_error("--alpha only applies to control_variates");
        }
    } else if (subcommand == "saving") {
        need(annotations, "--annotations");
        need(scores, "--scores");
    } else if (subcommand == "bootstrap") {
        need(annotations, "--annotations");
        need(scores, "--scores");
        if (replicates == 0) config_error("--replicates must be >= 1");
        if (k_grid.empty()) config_error("--k-grid must not be empty");
        if (!std::is_sorted(k_grid.begin(), k_grid.end()) ||
            std::adjacent_find(k_grid.begin(), k_grid.end()) != k_grid.end() || k_grid.front() == 0) {
            config_error("--k-grid must be strictly increasing positive counts");
        }
    } else if (subcommand == "simulate") {
        cvwin::validate(simulation);
    } else if (subcommand == "annotate") {
        need(responses, "--responses");
        judge.validate();
    } else {
        config_error("unknown subcommand '" + subcommand + "'");
    }
}

void cmd_estimate(const RunConfig& config, std::ostream& out) {
    const auto datasets = load_joined(config, out);
    const PairDataset dataset = select_pair(datasets, config.pair);

    EstimateDocument doc;
    doc.pair = dataset.pair();
    switch (config.method) {
        case Method::kSyntheticOnly:
            doc.report = synthetic_only_win_rate(dataset);
            break;
        case Method::kReferenceOnly: {
            const auto chosen = choose_labeled(dataset, config);
            std::vector<double> z;
            for (std::size_t i : chosen) {
                const auto& r = dataset.records()[i];
                if (!r.reference_label) {
                    throw Error(ErrorKind::kIncompleteSample,
                                "record '" + r.prompt_id + "' has no reference label");
                }
                z.push_back(r.reference_label->value());
            }
            doc.report = reference_mean(z);
            doc.report.n = dataset.size();
            break;
        }
        case Method::kControlVariates: {
            if (!dataset.has_full_synthetic_coverage()) {
                throw Error(ErrorKind::kIncompleteSyntheticCoverage,
                            std::to_string(dataset.size() - dataset.synthetic_count()) + " of " +
                                std::to_string(dataset.size()) +
                                " records lack a synthetic score (pass --scores, or run annotate)");
            }
            const auto chosen = choose_labeled(dataset, config);
            doc.report = cv_win_rate(dataset, chosen, config.alpha);
            break;
        }
    }
    if (config.indices.empty() && config.k && config.method != Method::kSyntheticOnly) {
        doc.sampling = std::string(to_string(config.sampling));
        doc.seed = config.seed;
    }

    const auto path = config.out_dir / "estimate.json";
    write_report(doc, path);
    const auto& r = doc.report;
    out << dataset.pair().to_string() << ": " << to_string(r.method) << " win rate "
        << fmt(r.win_rate) << " (se " << fmt(r.se_estimate) << ", k=" << r.k << ", n=" << r.n;
    if (r.params) {
        out << ", alpha=" << fmt(r.params->alpha) << ", mu_zhat=" << fmt(r.params->mu_hat_z);
        if (r.params->alpha_fallback_used) out << ", alpha fallback";
    }
    out << ")\nwrote " << path.string() << "\n";
}

void cmd_saving(const RunConfig& config, std::ostream& out) {
    auto datasets = load_joined(config, out);
    if (!config.pair.empty() && config.pair != "all") {
        const auto [a, b] = split_pair(config.pair);
        auto found = find_pair(datasets, a, b);
        if (!found) throw Error(ErrorKind::kEmptyDataset, "no comparisons between '" + a + "' and '" + b + "'");
        datasets = {*found};
    }
    const auto agg = aggregate_pairs(datasets, config.min_annotations, config.weighted);
    write_aggregate(agg, config.out_dir / "saving.json");
    write_saving_matrix(agg, config.out_dir / "saving_matrix.csv");
    for (const auto& p : agg.per_pair) {
        out << p.pair.to_string() << ": rho^2 = " << fmt(p.saving.saving_ratio) << " ("
            << p.annotations << " annotations)\n";
    }
    for (const auto& x : agg.excluded) {
        out << x.pair.to_string() << " excluded: " << x.reason << "\n";
    }
    out << "average saving ratio over " << agg.per_pair.size() << " pair(s): "
        << fmt(agg.average_saving) << "\nwrote " << (config.out_dir / "saving.json").string()
        << " and " << (config.out_dir / "saving_matrix.csv").string() << "\n";
}

void cmd_bootstrap(const RunConfig& config, std::ostream& out) {
    auto datasets = load_joined(config, out);
    if (!config.pair.empty() && config.pair != "all") {
        const auto [a, b] = split_pair(config.pair);
        auto found = find_pair(datasets, a, b);
        if (!found) throw Error(ErrorKind::kEmptyDataset, "no comparisons between '" + a + "' and '" + b + "'");
        datasets = {*found};
    }
    const auto agg = aggregate_pairs(datasets, config.min_annotations, config.weighted);
    const double s = agg.average_saving;
    const bool can_shift = s < 1.0;

    const std::vector<std::size_t> ref_grid =
        can_shift ? reference_grid_for_shift(config.k_grid, s) : config.k_grid;

    std::vector<BootstrapCurve> ref_curves;
    std::vector<BootstrapCurve> cv_curves;
    std::vector<BootstrapCurve> syn_curves;
    for (std::size_t i = 0; i < agg.per_pair.size(); ++i) {
        const auto& pair = agg.per_pair[i].pair;
        const auto it = std::find_if(datasets.begin(), datasets.end(),
                                     [&](const PairDataset& d) { return d.pair() == pair; });
        const PairDataset joint = it->co_annotated();
        BootstrapOptions opts;
        opts.replicates = config.replicates;
        opts.seed = derive_seed(config.seed, i);
        opts.threads = config.threads;
        ref_curves.push_back(mse_curve(joint, CurveMethod::kReferenceOnly, ref_grid, opts));
        syn_curves.push_back(mse_curve(joint, CurveMethod::kSyntheticOnly, config.k_grid, opts));
        opts.alpha_override = config.alpha;
        cv_curves.push_back(mse_curve(joint, CurveMethod::kControlVariates, config.k_grid, opts));
    }
    const auto ref = average_curves(ref_curves);
    const auto cv = average_curves(cv_curves);
    const auto syn = average_curves(syn_curves);

    write_curve(ref, config.out_dir / "reference_only.csv");
    write_curve(cv, config.out_dir / "control_variates.csv");
    write_curve(syn, config.out_dir / "synthetic_only.csv");

    json summary;
    json pairs = json::array();
    for (const auto& p : agg.per_pair) {
        pairs.push_back(json{{"left", p.pair.left.name()},
                             {"right", p.pair.right.name()},
                             {"annotations", p.annotations},
                             {"saving_ratio", canonical_real(p.saving.saving_ratio)}});
    }
    summary["pairs"] = pairs;
    summary["saving_ratio"] = canonical_real(s);
    summary["replicates"] = config.replicates;
    summary["seed"] = config.seed;
    if (config.alpha) summary["alpha_override"] = canonical_real(*config.alpha);
    const auto k0 = crossover_k(cv, syn);
    summary["cv_below_synthetic_from_k"] = k0 ? json(canonical_real(*k0)) : json(nullptr);
    json fallbacks = json::array();
    for (const auto& p : cv.points) {
        fallbacks.push_back(json{{"k", canonical_real(p.k)}, {"alpha_fallbacks", p.alpha_fallbacks}});
    }
    summary["alpha_fallbacks"] = fallbacks;
    if (can_shift) {
        const auto shifted = shift_curve(ref, s);
        write_curve(shifted, config.out_dir / "reference_shifted.csv");
        json overlap = json::array();
        for (const auto& o : curve_overlap(shifted, cv)) {
            overlap.push_back(json{{"k", canonical_real(o.k)},
                                   {"control_variates_mse", canonical_real(o.target_mse)},
                                   {"shifted_reference_mse", canonical_real(o.shifted_mse)},
                                   {"relative_gap", canonical_real(o.relative_gap)}});
        }
        summary["overlap"] = overlap;
    } else {
        out << "warning: saving ratio is 1; no shifted reference curve\n";
        summary["overlap"] = nullptr;
    }
    write_text_file(config.out_dir / "bootstrap_summary.json", summary.dump(2) + "\n");

    out << "bootstrap over " << agg.per_pair.size() << " pair(s), " << config.replicates
        << " replicates, saving ratio " << fmt(s) << "\n";
    out << "k,reference_only,control_variates,synthetic_only\n";
    for (std::size_t i = 0; i < cv.points.size(); ++i) {
        out << cv.points[i].k << "," << fmt(interpolate_mse(ref, cv.points[i].k)) << ","
            << fmt(cv.points[i].mse) << "," << fmt(syn.points[i].mse) << "\n";
    }
    if (k0) {
        out << "control variates beat synthetic-only from k = " << *k0 << "\n";
    } else {
        out << "control variates never stay below synthetic-only on this grid\n";
    }
    out << "wrote curves and bootstrap_summary.json to " << config.out_dir.string() << "\n";
}

void cmd_simulate(const RunConfig& config, std::ostream& out) {
    const auto& sim = config.simulation;
    const PairDataset dataset = generate(sim);
    write_annotations(dataset, config.out_dir / "annotations.jsonl");
    write_scores(dataset, "simlab", config.out_dir / "scores.jsonl");

    json sidecar;
    sidecar["p"] = canonical_real(sim.p);
    sidecar["lambda"] = canonical_real(sim.lambda);
    sidecar["tie_rate"] = canonical_real(sim.tie_rate);
    sidecar["p_synthetic"] = canonical_real(sim.p_synthetic.value_or(sim.p));
    sidecar["n"] = sim.n;
    sidecar["seed"] = sim.seed;
    sidecar["left"] = sim.left;
    sidecar["right"] = sim.right;
    if (sim.tie_rate == 0.0) {
        const auto m = exact_moments(sim);
        sidecar["exact"] = json{{"mean_z", canonical_real(m.mean_z)},
                                {"var_z", canonical_real(m.var_z)},
                                {"mean_zhat", canonical_real(m.mean_zhat)},
                                {"var_zhat", canonical_real(m.var_zhat)},
                                {"cov_z_zhat", canonical_real(m.cov_z_zhat)},
                                {"rho", canonical_real(m.rho)},
                                {"alpha_star", canonical_real(m.alpha_star)}};
    } else {
        sidecar["exact"] = nullptr;
    }
    write_text_file(config.out_dir / "moments.json", sidecar.dump(2) + "\n");
    out << "generated " << dataset.size() << " records for " << dataset.pair().to_string()
        << " in " << config.out_dir.string() << "\n";
}

void cmd_annotate(const RunConfig& config, std::ostream& out) {
    const auto records = load_responses(config.responses);
    AnnotateOptions options;
    options.scores_path = config.scores.empty() ? config.out_dir / "scores.jsonl" : config.scores;
    options.audit_log_path = config.out_dir / "audit.jsonl";
    options.skip_report_path = config.out_dir / "skips.jsonl";
    options.evaluator = config.evaluator;
    options.limit = config.limit;
    const auto summary = annotate_dataset(records, config.judge, options);
    out << "annotated " << summary.total << " record(s): " << summary.scored << " scored ("
        << summary.already_scored << " from earlier runs), " << summary.skipped << " skipped";
    if (summary.pending) out << ", " << summary.pending << " pending";
    out << "\nscores: " << options.scores_path.string()
        << "\nskip report: " << options.skip_report_path.string() << "\n";
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    RunConfig config;
    CLI::App app{"Win-rate estimation with control variates over reference and synthetic "
                 "preferences",
                 "cvwin"};
    app.require_subcommand(1);

    std::string method = "control_variates";
    std::string sampling = "without_replacement";
    double timeout_s = 60.0;
    double backoff_s = 0.5;

    auto add_inputs = [&](CLI::App* sub, bool scores_required) {
        sub->add_option("--annotations", config.annotations, "Reference annotations (JSONL)")
            ->required();
        auto* s = sub->add_option("--scores", config.scores, "Synthetic scores (JSONL)");
        if (scores_required) s->required();
        sub->add_option("--out", config.out_dir, "Output directory")->capture_default_str();
    };

    auto* estimate = app.add_subcommand("estimate", "Estimate the win rate of one pair");
    add_inputs(estimate, false);
    estimate->add_option("--pair", config.pair, "Pair as 'left,right' (orientation of the report)");
    estimate->add_option("--method", method, "reference_only | synthetic_only | control_variates")
        ->capture_default_str();
    estimate->add_option("--k", config.k, "Reference annotations to sample (default: all labeled)");
    estimate->add_option("--indices", config.indices, "Explicit record indices instead of sampling")
        ->delimiter(',');
    estimate->add_option("--sampling", sampling, "with_replacement | without_replacement")
        ->capture_default_str();
    estimate->add_option("--alpha", config.alpha, "Fixed control-variates coefficient");
    estimate->add_option("--seed", config.seed, "Sampling seed")->capture_default_str();

    auto* saving = app.add_subcommand("saving", "Per-pair and averaged annotation saving ratios");
    add_inputs(saving, true);
    saving->add_option("--pair", config.pair, "Restrict to 'left,right' (default: all)");
    saving->add_option("--min-annotations", config.min_annotations,
                       "Minimum co-annotated records per pair")
        ->capture_default_str();
    saving->add_flag("--weighted", config.weighted, "Weight the average by annotation count");

    auto* bootstrap = app.add_subcommand("bootstrap", "Bootstrap MSE curves per method");
    add_inputs(bootstrap, true);
    bootstrap->add_option("--pair", config.pair, "'left,right' or 'all' (default: all)");
    bootstrap->add_option("--k-grid", config.k_grid, "Annotation budgets")
        ->delimiter(',')
        ->capture_default_str();
    bootstrap->add_option("--replicates", config.replicates, "Replicates per point")
        ->capture_default_str();
    bootstrap->add_option("--seed", config.seed, "Master seed")->capture_default_str();
    bootstrap->add_option("--min-annotations", config.min_annotations,
                          "Minimum co-annotated records per pair")
        ->capture_default_str();
    bootstrap->add_flag("--weighted", config.weighted, "Weight the saving average by annotation count");
    bootstrap->add_option("--alpha", config.alpha, "Fixed control-variates coefficient");
    bootstrap->add_option("--threads", config.threads, "Worker threads (0 = all cores)")
        ->capture_default_str();

    auto* simulate = app.add_subcommand("simulate", "Generate a mixture-annotator dataset");
    auto& sim = config.simulation;
    double p_synthetic = -1.0;
    simulate->add_option("--p", sim.p, "Win probability of the left generator")->capture_default_str();
    simulate->add_option("--lambda", sim.lambda, "Copy probability (= correlation)")
        ->capture_default_str();
    simulate->add_option("--tie-rate", sim.tie_rate, "Probability of a tied reference label")
        ->capture_default_str();
    simulate->add_option("--p-synthetic", p_synthetic,
                         "Win probability of the independent synthetic draw (default: p)");
    simulate->add_option("--n", sim.n, "Records")->capture_default_str();
    simulate->add_option("--seed", sim.seed, "Seed")->capture_default_str();
    simulate->add_option("--left", sim.left, "Left generator id")->capture_default_str();
    simulate->add_option("--right", sim.right, "Right generator id")->capture_default_str();
    simulate->add_option("--out", config.out_dir, "Output directory")->capture_default_str();

    auto* annotate = app.add_subcommand("annotate", "Score comparisons with a judge endpoint");
    auto& judge = config.judge;
    annotate->add_option("--responses", config.responses, "Comparisons with response text (JSONL)")
        ->required();
    annotate->add_option("--endpoint", judge.endpoint, "Chat-completions URL")->required();
    annotate->add_option("--model", judge.model, "Judge model name")->required();
    annotate->add_option("--token-env", judge.token_env,
                         "Environment variable holding the bearer token");
    annotate->add_option("--timeout", timeout_s, "Request timeout in seconds")->capture_default_str();
    annotate->add_option("--retries", judge.max_retries, "Retries for transient failures")
        ->capture_default_str();
    annotate->add_option("--backoff", backoff_s, "First retry delay in seconds")
        ->capture_default_str();
    annotate->add_option("--concurrency", judge.max_concurrency, "Requests in flight")
        ->capture_default_str();
    annotate->add_option("--template", judge.template_id, "Prompt template id")->capture_default_str();
    annotate->add_option("--evaluator", config.evaluator, "Evaluator tag (default: model name)");
    annotate->add_option("--limit", config.limit, "Query at most this many new records");
    annotate->add_option("--scores", config.scores, "Scores file (default: <out>/scores.jsonl)");
    annotate->add_option("--out", config.out_dir, "Output directory")->capture_default_str();

    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : static_cast<int>(ExitClass::kConfiguration);
    }

    try {
        config.subcommand = app.get_subcommands().front()->get_name();
        config.method = parse_method(method);
        config.sampling = parse_sampling_mode(sampling);
        if (p_synthetic >= 0.0) sim.p_synthetic = p_synthetic;
        judge.timeout = std::chrono::milliseconds(static_cast<long long>(timeout_s * 1000.0));
        judge.backoff_base = std::chrono::milliseconds(static_cast<long long>(backoff_s * 1000.0));
        config.validate();
        std::filesystem::create_directories(config.out_dir);

        if (config.subcommand == "estimate") cmd_estimate(config, out);
        if (config.subcommand == "saving") cmd_saving(config, out);
        if (config.subcommand == "bootstrap") cmd_bootstrap(config, out);
        if (config.subcommand == "simulate") cmd_simulate(config, out);
        if (config.subcommand == "annotate") cmd_annotate(config, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return static_cast<int>(exit_class(e.kind()));
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return static_cast<int>(ExitClass::kData);
    }
    return 0;
}

}  // namespace cvwin::cli

#pragma once

#include "cafforge/catalog.hpp"
#include "cafforge/error.hpp"
#include "cafforge/forecast.hpp"
#include "cafforge/gateway.hpp"
#include "cafforge/promptkit.hpp"
#include "cafforge/record.hpp"
#include "cafforge/series.hpp"
#include "cafforge/splitter.hpp"
#include "cafforge/verifier.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace cafforge {

/// Operator configuration, loaded from a JSON file. Relative paths are
/// resolved against the directory holding the config file.
struct PipelineConfig {
    std::vector<std::string> inputs;
    std::string output_dir = "out";
    std::set<std::string, std::less<>> indomain_datasets;
    std::set<std::string, std::less<>> zeroshot_datasets;
    std::optional<std::int64_t> stride;  // defaults to the window horizon
    std::uint64_t seed = kDefaultSeed;

    GatewayConfig gateway;
    std::string generation_model;
    std::string judge_model;
    std::string forecast_model;

    /// "direct_prompt", "seasonal_naive" or "scripted:<path>".
    std::string forecaster = "direct_prompt";
    /// "seasonal_naive" or "scripted:<path>".
    std::string baseline = "seasonal_naive";

    std::int64_t num_samples = kDefaultNumSamples;
    double mase_threshold = kHardThreshold;
    std::map<Split, std::size_t> budgets;
    std::vector<double> subsample_fractions;
    bool judge_indomain = true;
    bool judge_zeroshot = true;
    bool require_accepted_for_eval = false;

    std::map<std::string, std::string, std::less<>> domain_hints;
    std::size_t variety_window = kVarietyWindow;

    [[nodiscard]] std::string artifact(const std::string& name) const {
        return (std::filesystem::path(output_dir) / name).string();
    }
    [[nodiscard]] std::string windows_path() const { return artifact("windows.jsonl"); }
};

namespace detail {

inline std::string resolve_path(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    if (path.is_absolute() || base.empty()) return path.string();
    return (base / path).lexically_normal().string();
}

inline std::string resolve_adapter_name(const std::filesystem::path& base, const std::string& name) {
    constexpr std::string_view prefix = "scripted:";
    if (name.rfind(prefix, 0) == 0) return std::string(prefix) + resolve_path(base, name.substr(prefix.size()));
    return name;
}

}  // namespace detail

inline PipelineConfig parse_config(const json& j, const std::filesystem::path& base = {}) {
    static const std::set<std::string> known = {
        "inputs", "output_dir", "indomain_datasets", "zeroshot_datasets", "stride", "seed", "gateway", "models",
        "forecaster", "baseline", "num_samples", "mase_threshold", "budgets", "subsample_fractions", "judge",
        "require_accepted_for_eval", "domain_hints", "variety_window"};
    if (!j.is_object()) fail(ErrorKind::config, "config must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (known.count(key) == 0) fail(ErrorKind::config, "unknown config key '" + key + "'");
    }

    PipelineConfig cfg;
    try {
        for (const auto& p : j.value("inputs", std::vector<std::string>{})) cfg.inputs.push_back(detail::resolve_path(base, p));
        cfg.output_dir = detail::resolve_path(base, j.value("output_dir", cfg.output_dir));
        for (const auto& d : j.value("indomain_datasets", std::vector<std::string>{})) cfg.indomain_datasets.insert(d);
        for (const auto& d : j.value("zeroshot_datasets", std::vector<std::string>{})) cfg.zeroshot_datasets.insert(d);
        if (j.contains("stride") && !j["stride"].is_null()) cfg.stride = j["stride"].get<std::int64_t>();
        cfg.seed = j.value("seed", cfg.seed);

        if (const auto it = j.find("gateway"); it != j.end()) {
            const auto& g = *it;
            cfg.gateway.endpoint = g.value("endpoint", cfg.gateway.endpoint);
            cfg.gateway.api_key_env = g.value("api_key_env", cfg.gateway.api_key_env);
            cfg.gateway.max_retries = g.value("max_retries", cfg.gateway.max_retries);
            cfg.gateway.backoff_base = std::chrono::milliseconds(g.value("backoff_ms", cfg.gateway.backoff_base.count()));
            cfg.gateway.max_parallel = g.value("max_parallel", cfg.gateway.max_parallel);
            cfg.gateway.timeout = std::chrono::seconds(g.value("timeout_s", cfg.gateway.timeout.count()));
        }
        if (const auto it = j.find("models"); it != j.end()) {
            cfg.generation_model = it->value("generation", cfg.generation_model);
            cfg.judge_model = it->value("judge", cfg.judge_model);
            cfg.forecast_model = it->value("forecast", cfg.forecast_model);
        }
        cfg.forecaster = detail::resolve_adapter_name(base, j.value("forecaster", cfg.forecaster));
        cfg.baseline = detail::resolve_adapter_name(base, j.value("baseline", cfg.baseline));
        cfg.num_samples = j.value("num_samples", cfg.num_samples);
        cfg.mase_threshold = j.value("mase_threshold", cfg.mase_threshold);
        if (const auto it = j.find("budgets"); it != j.end()) {
            for (const auto& [name, value] : it->items()) {
                const auto split = parse_split(name);
                if (!split || *split == Split::indomain_train) {
                    fail(ErrorKind::config, "budgets: '" + name + "' is not an evaluation split");
                }
                cfg.budgets[*split] = value.get<std::size_t>();
            }
        }
        cfg.subsample_fractions = j.value("subsample_fractions", cfg.subsample_fractions);
        if (const auto it = j.find("judge"); it != j.end()) {
            if (it->is_boolean()) {
                cfg.judge_indomain = cfg.judge_zeroshot = it->get<bool>();
            } else {
                cfg.judge_indomain = it->value("indomain", cfg.judge_indomain);
                cfg.judge_zeroshot = it->value("zeroshot", cfg.judge_zeroshot);
            }
        }
        cfg.require_accepted_for_eval = j.value("require_accepted_for_eval", cfg.require_accepted_for_eval);
        if (const auto it = j.find("domain_hints"); it != j.end()) {
            for (const auto& [name, value] : it->items()) cfg.domain_hints[name] = value.get<std::string>();
        }
        cfg.variety_window = j.value("variety_window", cfg.variety_window);
    } catch (const json::exception& e) {
        fail(ErrorKind::config, std::string("bad config value: ") + e.what());
    }

    if (cfg.num_samples < 1) fail(ErrorKind::config, "num_samples must be positive");
    if (cfg.stride && *cfg.stride < 1) fail(ErrorKind::config, "stride must be positive");
    if (cfg.gateway.max_parallel < 1) fail(ErrorKind::config, "gateway.max_parallel must be at least 1");
    for (double f : cfg.subsample_fractions) {
        if (!(f > 0.0 && f <= 1.0)) fail(ErrorKind::config, "subsample fractions must lie in (0, 1]");
    }
    for (const auto& d : cfg.indomain_datasets) {
        if (cfg.zeroshot_datasets.count(d) != 0) {
            fail(ErrorKind::config, "dataset '" + d + "' is listed as both in-domain and zero-shot");
        }
    }
    return cfg;
}

inline PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::config, "cannot open config " + path);
    const auto j = json::parse(in, nullptr, false, true);
    if (j.is_discarded()) fail(ErrorKind::config, "config " + path + " is not valid JSON");
    return parse_config(j, std::filesystem::path(path).parent_path());
}

/// Human-readable lines a stage wants printed, plus the files it wrote (or
/// would have written under dry-run).
struct StageReport {
    std::vector<std::string> lines;
    std::vector<std::string> warnings;
    std::vector<std::string> outputs;
};

namespace detail {

inline void emit(StageReport& report, bool dry_run, const std::string& path, const std::string& content) {
    if (!dry_run) write_text_file(path, content);
    report.outputs.push_back(path);
}

inline std::vector<WindowRecord> load_windows_or_fail(const PipelineConfig& cfg) {
    const auto path = cfg.windows_path();
    if (!std::filesystem::exists(path)) fail(ErrorKind::data, "no windows: " + path + " does not exist");
    auto records = read_windows(path);
    if (records.empty()) fail(ErrorKind::data, "no windows in " + path);
    std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return canonical_less(a, b); });
    return records;
}

}  // namespace detail

/// Builds the adapter for "seasonal_naive", "direct_prompt" or "scripted:<path>".
inline std::unique_ptr<ForecasterAdapter> make_forecaster(const std::string& name, std::shared_ptr<const Gateway> gateway,
                                                          const std::string& model = {}) {
    if (name == "seasonal_naive") return std::make_unique<SeasonalNaiveForecaster>();
    if (name.rfind("scripted:", 0) == 0) {
        return std::make_unique<ScriptedForecaster>(ScriptedForecaster::from_file(name.substr(9)));
    }
    if (name == "direct_prompt") {
        if (!gateway) fail(ErrorKind::config, "the direct_prompt forecaster needs a gateway");
        return std::make_unique<DirectPromptForecaster>(std::move(gateway), model);
    }
    fail(ErrorKind::config, "unknown forecaster '" + name + "'");
}

// ---------------------------------------------------------------------------
// extract

inline StageReport run_extract(const PipelineConfig& cfg, bool dry_run = false) {
    StageReport report;
    if (cfg.inputs.empty()) fail(ErrorKind::config, "no input files configured");
    auto baseline = make_forecaster(cfg.baseline, nullptr);

    std::vector<WindowRecord> records;
    std::map<std::string, std::size_t> per_dataset;
    for (const auto& input : cfg.inputs) {
        for (const auto& series : read_series_file(input)) {
            const auto q = horizon_for_frequency(series.freq());
            auto rng = series_rng(cfg.seed, series.dataset_id(), series.item_id());
            std::vector<ForecastWindow> windows;
            try {
                windows = extract_windows(series, cfg.stride.value_or(q), rng);
            } catch (const NoWindowsError& e) {
                report.warnings.push_back(series.dataset_id() + "/" + series.item_id() + ": " + e.what());
                continue;
            }
            const auto season = seasonal_period_for_frequency(series.freq());
            for (auto& w : windows) {
                compute_baseline_proxy(w, *baseline, season, cfg.num_samples);
                ++per_dataset[w.dataset_id];
                WindowRecord r;
                r.window = std::move(w);
                records.push_back(std::move(r));
            }
        }
    }
    if (records.empty()) throw NoWindowsError("no windows: every input series is shorter than twice its horizon");

    for (const auto& [dataset, count] : per_dataset) {
        report.lines.push_back(dataset + ": " + std::to_string(count) + " windows");
    }
    detail::emit(report, dry_run, cfg.windows_path(), serialize_windows(std::move(records)));
    return report;
}

// ---------------------------------------------------------------------------
// generate

/// Domain hints come from the config first, then from the series files.
inline std::map<std::string, std::string, std::less<>> collect_domain_hints(const PipelineConfig& cfg) {
    auto hints = cfg.domain_hints;
    for (const auto& input : cfg.inputs) {
        if (!std::filesystem::exists(input)) continue;
        for (const auto& s : read_series_file(input)) {
            if (!s.domain_hint().empty()) hints.emplace(s.dataset_id(), s.domain_hint());
        }
    }
    return hints;
}

/// Attaches a generated context to every window. Windows of one dataset are
/// processed in canonical order so that each prompt can list the scenarios
/// already produced for that dataset; datasets advance together in
/// round-robin batches.
inline StageReport run_generate(const PipelineConfig& cfg, const Gateway& gateway, bool dry_run = false) {
    StageReport report;
    auto records = detail::load_windows_or_fail(cfg);
    const auto hints = collect_domain_hints(cfg);

    std::map<std::string, std::vector<std::size_t>> by_dataset;
    for (std::size_t i = 0; i < records.size(); ++i) by_dataset[records[i].window.dataset_id].push_back(i);
    for (const auto& [dataset, _] : by_dataset) {
        if (hints.find(dataset) == hints.end()) {
            fail(ErrorKind::config, "no domain hint for dataset '" + dataset + "' (set domain_hints in the config)");
        }
    }

    std::map<std::string, std::vector<std::string>> prior;
    std::size_t generated = 0;
    std::size_t failed = 0;
    for (std::size_t round = 0;; ++round) {
        std::vector<std::size_t> batch;
        std::vector<ChatRequest> requests;
        for (const auto& [dataset, indices] : by_dataset) {
            if (round >= indices.size()) continue;
            const auto idx = indices[round];
            const auto variety = render_variety_instruction(prior[dataset], cfg.variety_window);
            const auto prompt = render_context_gen_prompt(records[idx].window, hints.find(dataset)->second, variety);
            batch.push_back(idx);
            requests.push_back(context_generation_request(prompt.text, cfg.generation_model));
        }
        if (batch.empty()) break;

        const auto replies = gateway.complete_batch(requests);
        for (std::size_t k = 0; k < batch.size(); ++k) {
            auto& r = records[batch[k]];
            r.window.context.reset();
            r.window.short_desc.reset();
            r.judge_q1.reset();
            r.judge_q2.reset();
            r.crps_with.reset();
            r.crps_without.reset();
            r.accepted.reset();
            std::string problem;
            if (!replies[k].ok()) {
                problem = replies[k].error;
            } else {
                try {
                    auto ctx = parse_generated_context(*replies[k].reply);
                    r.window.context = std::move(ctx.context_abs);
                    if (!ctx.short_desc.empty()) {
                        r.window.short_desc = ctx.short_desc;
                        prior[r.window.dataset_id].push_back(std::move(ctx.short_desc));
                    }
                } catch (const Error& e) {
                    problem = e.what();
                }
            }
            if (problem.empty()) {
                ++generated;
            } else {
                ++failed;
                report.warnings.push_back(r.key() + ": context generation failed: " + problem);
            }
        }
    }
    if (generated == 0 && failed > 0) {
        fail(ErrorKind::gateway, "context generation failed for all " + std::to_string(failed) + " window(s); first: " +
                                     report.warnings.front());
    }
    report.lines.push_back("contexts generated: " + std::to_string(generated) + ", failed: " + std::to_string(failed));
    detail::emit(report, dry_run, cfg.windows_path(), serialize_windows(std::move(records)));
    return report;
}

// ---------------------------------------------------------------------------
// verify

inline void accumulate(FunnelCounts& into, const FunnelCounts& add) {
    into.processed += add.processed;
    into.judge_passed += add.judge_passed;
    into.dp_accepted += add.dp_accepted;
    into.judge_failures += add.judge_failures;
    into.dp_failures += add.dp_failures;
}

struct VerifyResult {
    StageReport report;
    FunnelReport funnel;
    std::vector<VerificationOutcome> outcomes;  // canonical window order
};

/// `gateway` may be null when neither judging nor the forecaster needs one.
inline VerifyResult run_verify(const PipelineConfig& cfg, std::shared_ptr<const Gateway> gateway, bool dry_run = false) {
    VerifyResult result;
    auto records = detail::load_windows_or_fail(cfg);
    auto forecaster = make_forecaster(cfg.forecaster, gateway, cfg.forecast_model);

    std::vector<ForecastWindow> indomain;
    std::vector<ForecastWindow> zeroshot;
    std::size_t without_context = 0;
    for (const auto& r : records) {
        if (!r.window.context || r.window.context->empty()) {
            ++without_context;
            continue;
        }
        (cfg.zeroshot_datasets.count(r.window.dataset_id) ? zeroshot : indomain).push_back(r.window);
    }
    if (indomain.empty() && zeroshot.empty()) fail(ErrorKind::data, "no windows carry a context; run generate first");
    if (without_context > 0) {
        result.report.warnings.push_back(std::to_string(without_context) + " window(s) without context were skipped");
    }

    for (auto [group, judge] : {std::pair{&indomain, cfg.judge_indomain}, std::pair{&zeroshot, cfg.judge_zeroshot}}) {
        if (group->empty()) continue;
        if (judge && !gateway) fail(ErrorKind::config, "judging is enabled but no gateway is configured");
        GateConfig gate;
        gate.judge_enabled = judge;
        gate.num_samples = cfg.num_samples;
        gate.max_parallel = cfg.gateway.max_parallel;
        gate.judge_model = cfg.judge_model;
        gate.gateway = gateway.get();
        gate.forecaster = forecaster.get();
        auto part = run_gate(std::move(*group), gate);
        accumulate(result.funnel.total, part.funnel.total);
        for (const auto& [dataset, counts] : part.funnel.per_dataset) accumulate(result.funnel.per_dataset[dataset], counts);
        for (auto& o : part.outcomes) result.outcomes.push_back(std::move(o));
    }

    std::map<std::string, std::size_t> order;
    for (std::size_t i = 0; i < records.size(); ++i) order.emplace(records[i].key(), i);
    std::sort(result.outcomes.begin(), result.outcomes.end(),
              [&](const auto& a, const auto& b) { return order.at(a.window_key) < order.at(b.window_key); });
    for (const auto& o : result.outcomes) {
        if (o.failure) result.report.warnings.push_back(o.window_key + ": " + *o.failure);
    }

    const auto& t = result.funnel.total;
    if (t.processed > 0 && t.judge_failures + t.dp_failures == t.processed) {
        fail(ErrorKind::gateway, "verification failed for all " + std::to_string(t.processed) + " window(s); first: " +
                                     result.report.warnings.front());
    }
    apply_outcomes(records, result.outcomes);
    result.report.lines.push_back("processed " + std::to_string(t.processed) + ", judge passed " +
                                  std::to_string(t.judge_passed) + ", accepted " + std::to_string(t.dp_accepted));
    detail::emit(result.report, dry_run, cfg.windows_path(), serialize_windows(std::move(records)));
    detail::emit(result.report, dry_run, cfg.artifact("funnel.json"), funnel_to_json(result.funnel).dump(2) + "\n");
    detail::emit(result.report, dry_run, cfg.artifact("verification_samples.jsonl"), serialize_samples(result.outcomes));
    return result;
}

// ---------------------------------------------------------------------------
// split

inline SplitPlan split_plan(const PipelineConfig& cfg) {
    SplitPlan plan;
    plan.indomain_datasets = cfg.indomain_datasets;
    plan.zeroshot_datasets = cfg.zeroshot_datasets;
    plan.mase_threshold = cfg.mase_threshold;
    plan.seed = cfg.seed;
    plan.budgets = cfg.budgets;
    plan.subsample_fractions = cfg.subsample_fractions;
    plan.require_accepted_for_eval = cfg.require_accepted_for_eval;
    return plan;
}

inline StageReport run_split(const PipelineConfig& cfg, bool dry_run = false) {
    StageReport report;
    if (cfg.indomain_datasets.empty() && cfg.zeroshot_datasets.empty()) {
        fail(ErrorKind::config, "split needs indomain_datasets and/or zeroshot_datasets");
    }
    if (!cfg.indomain_datasets.empty() && cfg.budgets.count(Split::indomain_test) == 0) {
        fail(ErrorKind::config, "budgets.indomain-test is required when indomain_datasets is set");
    }
    if (!cfg.zeroshot_datasets.empty() && cfg.budgets.count(Split::zeroshot_test) == 0) {
        fail(ErrorKind::config, "budgets.zeroshot-test is required when zeroshot_datasets is set");
    }
    auto records = detail::load_windows_or_fail(cfg);
    const auto result = build_splits(records, split_plan(cfg));
    report.warnings = result.warnings;

    std::map<std::string, const SplitAssignment*> by_key;
    for (const auto& a : result.assignments) by_key.emplace(a.window_key, &a);
    for (auto& r : records) {
        const auto it = by_key.find(r.key());
        if (it == by_key.end()) {
            r.split.reset();
            r.difficulty.reset();
            continue;
        }
        r.split = std::string(split_name(it->second->split));
        r.difficulty = std::string(difficulty_name(it->second->difficulty));
    }

    for (const auto& [dataset, c] : result.cutoffs) {
        report.lines.push_back(dataset + ": c90=" + std::to_string(c.c90) + " c95=" + std::to_string(c.c95));
    }
    std::map<std::pair<std::string, std::string>, std::size_t> tally;
    for (const auto& a : result.assignments) ++tally[{std::string(split_name(a.split)), std::string(difficulty_name(a.difficulty))}];
    for (const auto& [k, n] : tally) report.lines.push_back(k.first + " " + k.second + ": " + std::to_string(n));

    detail::emit(report, dry_run, cfg.artifact("splits.jsonl"), serialize_assignments(result.assignments));
    detail::emit(report, dry_run, cfg.artifact("subsamples.jsonl"), serialize_subsamples(result.subsamples));
    detail::emit(report, dry_run, cfg.windows_path(), serialize_windows(std::move(records)));
    return report;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluationSummary {
    std::vector<EvaluationRecord> records;  // canonical window order
    Aggregate ncrps;
    Aggregate nmae;
    std::optional<Aggregate> mase;  // over finite values
    std::size_t infinite_mase = 0;
    std::optional<Aggregate> baseline_ncrps;
    std::optional<double> win_rate;
};

/// Reads a forecast file: one {"key": ..., "samples": [[...], ...]} per line.
inline std::map<std::string, ProbabilisticForecast> read_forecasts(const std::string& path) {
    std::map<std::string, ProbabilisticForecast> out;
    detail::for_each_jsonl(path, [&](const json& j, std::size_t line) {
        const auto key = detail::field<std::string>(j, "key", path, line);
        const auto rows = detail::field<std::vector<std::vector<double>>>(j, "samples", path, line);
        try {
            if (!out.emplace(key, ProbabilisticForecast(rows)).second) {
                detail::schema_error(path, line, "duplicate forecast for " + key);
            }
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::data) throw;
            detail::schema_error(path, line, e.what());
        }
    });
    return out;
}

/// Scores forecasts against their windows. Every forecast must name a known
/// window with a matching horizon, and a baseline (when given) must cover
/// exactly the same windows.
inline EvaluationSummary evaluate_forecasts(const std::vector<WindowRecord>& windows,
                                            const std::map<std::string, ProbabilisticForecast>& forecasts,
                                            const std::map<std::string, ProbabilisticForecast>* baseline,
                                            const MetricConfig& metric_cfg = {}) {
    std::map<std::string, const WindowRecord*> by_key;
    for (const auto& r : windows) by_key.emplace(r.key(), &r);
    for (const auto& [key, f] : forecasts) {
        const auto it = by_key.find(key);
        if (it == by_key.end()) fail(ErrorKind::data, "alignment mismatch: forecast for unknown window " + key);
        if (static_cast<std::int64_t>(f.horizon()) != it->second->window.horizon()) {
            fail(ErrorKind::data, "alignment mismatch: forecast for " + key + " has " + std::to_string(f.horizon()) +
                                      " steps, window has " + std::to_string(it->second->window.horizon()));
        }
    }
    if (forecasts.empty()) fail(ErrorKind::data, "no forecasts to evaluate");
    if (baseline) {
        for (const auto& [key, f] : *baseline) {
            if (forecasts.count(key) == 0) fail(ErrorKind::data, "alignment mismatch: baseline covers extra window " + key);
        }
        for (const auto& [key, f] : forecasts) {
            const auto it = baseline->find(key);
            if (it == baseline->end()) fail(ErrorKind::data, "alignment mismatch: baseline lacks window " + key);
            if (it->second.horizon() != f.horizon()) fail(ErrorKind::data, "alignment mismatch: baseline horizon for " + key);
        }
    }

    std::vector<const WindowRecord*> ordered;
    for (const auto& [key, _] : forecasts) ordered.push_back(by_key.at(key));
    std::sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return canonical_less(*a, *b); });

    EvaluationSummary out;
    std::vector<double> ncrps_scores, nmae_scores, mase_scores, baseline_scores;
    for (const auto* r : ordered) {
        const auto& w = r->window;
        const auto& f = forecasts.at(w.key());
        EvaluationRecord e;
        e.window_key = w.key();
        e.ncrps = ncrps(f, w.future_target, metric_cfg);
        e.nmae = nmae(f, w.future_target, metric_cfg);
        e.mase = mase(point_median(f), w.future_target, w.past_target,
                      static_cast<std::size_t>(seasonal_period_for_frequency(w.freq)));
        if (baseline) e.baseline_ncrps = ncrps(baseline->at(w.key()), w.future_target, metric_cfg);

        ncrps_scores.push_back(e.ncrps);
        nmae_scores.push_back(*e.nmae);
        if (std::isfinite(e.mase)) {
            mase_scores.push_back(e.mase);
        } else {
            ++out.infinite_mase;
        }
        if (e.baseline_ncrps) baseline_scores.push_back(*e.baseline_ncrps);
        out.records.push_back(std::move(e));
    }
    out.ncrps = aggregate_mean(ncrps_scores);
    out.nmae = aggregate_mean(nmae_scores);
    if (!mase_scores.empty()) out.mase = aggregate_mean(mase_scores);
    if (baseline) {
        out.baseline_ncrps = aggregate_mean(baseline_scores);
        out.win_rate = win_rate(ncrps_scores, baseline_scores);
    }
    return out;
}

inline json aggregate_to_json(const Aggregate& a) {
    return json{{"mean", a.mean}, {"standard_error", a.standard_error}, {"count", a.count}};
}

inline json evaluation_to_json(const EvaluationSummary& s) {
    json j;
    j["windows"] = s.records.size();
    j["ncrps"] = aggregate_to_json(s.ncrps);
    j["nmae"] = aggregate_to_json(s.nmae);
    j["mase"] = s.mase ? aggregate_to_json(*s.mase) : json(nullptr);
    j["mase_infinite"] = s.infinite_mase;
    if (s.baseline_ncrps) j["baseline_ncrps"] = aggregate_to_json(*s.baseline_ncrps);
    if (s.win_rate) j["win_rate"] = *s.win_rate;
    return j;
}

inline std::string evaluation_to_csv(const EvaluationSummary& s) {
    std::string out = "key,ncrps,nmae,mase,baseline_ncrps\n";
    for (const auto& e : s.records) {
        out += e.window_key + "," + format_number(e.ncrps) + "," + (e.nmae ? format_number(*e.nmae) : "") + "," +
               (std::isfinite(e.mase) ? format_number(e.mase) : "inf") + "," +
               (e.baseline_ncrps ? format_number(*e.baseline_ncrps) : "") + "\n";
    }
    return out;
}

struct EvaluateOptions {
    std::string forecasts;
    std::optional<std::string> baseline;
    std::optional<std::string> split;  // restrict to windows carrying this split label
};

inline StageReport run_evaluate(const PipelineConfig& cfg, const EvaluateOptions& opts, bool dry_run = false) {
    StageReport report;
    if (opts.forecasts.empty()) fail(ErrorKind::config, "evaluate needs a forecast file");
    auto records = detail::load_windows_or_fail(cfg);
    auto forecasts = read_forecasts(opts.forecasts);
    std::optional<std::map<std::string, ProbabilisticForecast>> baseline;
    if (opts.baseline) baseline = read_forecasts(*opts.baseline);

    if (opts.split) {
        if (!parse_split(*opts.split)) fail(ErrorKind::config, "unknown split '" + *opts.split + "'");
        // Entries for windows outside the split are dropped; unknown keys still fail alignment below.
        std::vector<WindowRecord> kept;
        for (auto& r : records) {
            if (r.split == *opts.split) {
                kept.push_back(std::move(r));
            } else {
                forecasts.erase(r.key());
                if (baseline) baseline->erase(r.key());
            }
        }
        records = std::move(kept);
        if (records.empty()) fail(ErrorKind::data, "no windows assigned to split " + *opts.split);
    }
    const auto summary = evaluate_forecasts(records, forecasts, baseline ? &*baseline : nullptr);
    report.lines.push_back("windows " + std::to_string(summary.records.size()) + ", nCRPS " +
                           format_number(summary.ncrps.mean) + " +/- " + format_number(summary.ncrps.standard_error));
    if (summary.win_rate) report.lines.push_back("win rate vs baseline " + format_number(*summary.win_rate));
    detail::emit(report, dry_run, cfg.artifact("evaluation.csv"), evaluation_to_csv(summary));
    detail::emit(report, dry_run, cfg.artifact("evaluation.json"), evaluation_to_json(summary).dump(2) + "\n");
    return report;
}

// ---------------------------------------------------------------------------
// stats / audit

inline StageReport run_stats(const PipelineConfig& cfg, bool dry_run = false) {
    StageReport report;
    const auto stats = compute_stats(detail::load_windows_or_fail(cfg));
    for (const auto& [dataset, n] : stats.dataset_counts) report.lines.push_back(dataset + ": " + std::to_string(n));
    detail::emit(report, dry_run, cfg.artifact("stats.json"), stats_to_json(stats).dump(2) + "\n");
    detail::emit(report, dry_run, cfg.artifact("stats.csv"), stats_to_csv(stats));
    return report;
}

struct AuditResult {
    StageReport report;
    AuditReport audit;
};

inline AuditResult run_audit(const PipelineConfig& cfg) {
    AuditResult out;
    const auto splits = cfg.artifact("splits.jsonl");
    if (!std::filesystem::exists(splits)) fail(ErrorKind::data, splits + " does not exist; run split first");
    const auto subsamples_path = cfg.artifact("subsamples.jsonl");
    std::vector<Subsample> subsamples;
    if (std::filesystem::exists(subsamples_path)) subsamples = read_subsamples(subsamples_path);
    out.audit = audit_splits(read_assignments(splits), subsamples, cfg.zeroshot_datasets, cfg.mase_threshold);
    const auto& a = out.audit;
    out.report.lines.push_back("leakage violations: " + std::to_string(a.leakage_violations));
    out.report.lines.push_back("duplicate assignments: " + std::to_string(a.duplicate_assignments));
    out.report.lines.push_back("stratification errors: " + std::to_string(a.stratification_errors));
    out.report.lines.push_back("nesting violations: " + std::to_string(a.nesting_violations));
    out.report.lines.push_back("zero-shot violations: " + std::to_string(a.zeroshot_violations));
    out.report.warnings = a.messages;
    return out;
}

}  // namespace cafforge

#pragma once

#include "cafforge/error.hpp"
#include "cafforge/forecast.hpp"
#include "cafforge/gateway.hpp"
#include "cafforge/metrics.hpp"
#include "cafforge/promptkit.hpp"
#include "cafforge/series.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace cafforge {

enum class VerificationStage { judged_only, dp_verified };

struct VerificationOutcome {
    std::string window_key;
    std::string dataset_id;
    std::optional<JudgeVerdict> judge;
    std::optional<double> crps_with;
    std::optional<double> crps_without;
    bool accepted = false;
    VerificationStage stage_reached = VerificationStage::judged_only;
    /// Set when a gateway, parse or forecaster error ended verification early.
    std::optional<std::string> failure;
    /// Both sample matrices, kept so the decision can be audited later.
    std::optional<ProbabilisticForecast> samples_with;
    std::optional<ProbabilisticForecast> samples_without;
};

struct FunnelCounts {
    std::size_t processed = 0;
    std::size_t judge_passed = 0;
    std::size_t dp_accepted = 0;
    std::size_t judge_failures = 0;  // judge call or parse errors
    std::size_t dp_failures = 0;     // forecaster errors or missing context

    [[nodiscard]] double judge_pass_rate() const noexcept {
        return processed == 0 ? 0.0 : static_cast<double>(judge_passed) / static_cast<double>(processed);
    }
    [[nodiscard]] double context_helps_rate() const noexcept {
        return judge_passed == 0 ? 0.0 : static_cast<double>(dp_accepted) / static_cast<double>(judge_passed);
    }
    friend bool operator==(const FunnelCounts&, const FunnelCounts&) = default;
};

struct FunnelReport {
    FunnelCounts total;
    std::map<std::string, FunnelCounts> per_dataset;
};

/// Semantic validity check: both questions must be answered "yes".
/// Gateway and parse errors propagate to the caller.
inline JudgeVerdict judge_prefilter(const ForecastWindow& window, const Gateway& gateway, const std::string& model = {}) {
    require(window.context.has_value() && !window.context->empty(), "judge: window " + window.key() + " has no context");
    const auto prompt = render_judge_prompt(*window.context, window.key());
    return parse_judge_verdict(gateway.complete(judge_request(prompt.text, model)));
}

/// Forecasts the window with and without its context and accepts only when
/// the context strictly lowers the horizon-mean CRPS. Raw CRPS is compared
/// because both arms score against the same target.
inline VerificationOutcome dp_verify(const ForecastWindow& window, ForecasterAdapter& forecaster,
                                     std::int64_t num_samples = kDefaultNumSamples) {
    require(window.context.has_value(), "dp_verify: window " + window.key() + " has no context");
    VerificationOutcome out;
    out.window_key = window.key();
    out.dataset_id = window.dataset_id;

    ForecastRequest request;
    request.window = window;
    request.num_samples = num_samples;
    request.horizon = window.horizon();
    try {
        request.context_mode = ContextMode::with_context;
        auto with = chunked_rollout(forecaster, request);
        request.context_mode = ContextMode::no_context;
        auto without = chunked_rollout(forecaster, request);

        out.crps_with = crps_horizon_mean(with, window.future_target);
        out.crps_without = crps_horizon_mean(without, window.future_target);
        out.samples_with = std::move(with);
        out.samples_without = std::move(without);
        out.stage_reached = VerificationStage::dp_verified;
        out.accepted = *out.crps_with < *out.crps_without;
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::precondition) throw;
        out.failure = e.what();
        out.accepted = false;
    }
    return out;
}

struct GateConfig {
    bool judge_enabled = true;
    std::int64_t num_samples = kDefaultNumSamples;
    int max_parallel = 4;
    std::string judge_model;
    const Gateway* gateway = nullptr;  // required when judge_enabled
    ForecasterAdapter* forecaster = nullptr;
};

struct GateResult {
    std::vector<VerificationOutcome> outcomes;  // canonical window order
    FunnelReport funnel;
};

/// Judge (optional) then DP verification for every window. Windows are
/// processed in parallel and reported in canonical order.
inline GateResult run_gate(std::vector<ForecastWindow> windows, const GateConfig& cfg) {
    require(cfg.forecaster != nullptr, "run_gate: forecaster missing");
    require(!cfg.judge_enabled || cfg.gateway != nullptr, "run_gate: judging enabled without a gateway");
    std::sort(windows.begin(), windows.end(), [](const auto& a, const auto& b) { return canonical_less(a, b); });

    std::unique_ptr<SerializedForecaster> serialized;
    ForecasterAdapter* forecaster = cfg.forecaster;
    if (!forecaster->thread_safe()) {
        serialized = std::make_unique<SerializedForecaster>(*forecaster);
        forecaster = serialized.get();
    }

    GateResult result;
    result.outcomes.resize(windows.size());
    parallel_for(windows.size(), cfg.max_parallel, [&](std::size_t i) {
        const auto& w = windows[i];
        auto& out = result.outcomes[i];
        out.window_key = w.key();
        out.dataset_id = w.dataset_id;
        if (!w.context || w.context->empty()) {
            out.failure = "window has no context";
            return;
        }
        if (cfg.judge_enabled) {
            try {
                out.judge = judge_prefilter(w, *cfg.gateway, cfg.judge_model);
            } catch (const Error& e) {
                out.failure = std::string("judge: ") + e.what();
                return;
            }
            if (!out.judge->passed()) return;
        }
        auto verified = dp_verify(w, *forecaster, cfg.num_samples);
        verified.judge = out.judge;
        out = std::move(verified);
    });

    for (const auto& out : result.outcomes) {
        auto& row = result.funnel.per_dataset[out.dataset_id];
        for (auto* counts : {&result.funnel.total, &row}) {
            ++counts->processed;
            const bool judge_failed = cfg.judge_enabled && !out.judge.has_value();
            const bool passed = cfg.judge_enabled ? (out.judge && out.judge->passed()) : true;
            if (judge_failed && out.failure) ++counts->judge_failures;
            if (passed) ++counts->judge_passed;
            if (passed && out.failure) ++counts->dp_failures;
            if (out.accepted) ++counts->dp_accepted;
        }
    }
    return result;
}

}  // namespace cafforge

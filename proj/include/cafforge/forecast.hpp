#pragma once

#include "cafforge/error.hpp"
#include "cafforge/gateway.hpp"
#include "cafforge/metrics.hpp"
#include "cafforge/promptkit.hpp"
#include "cafforge/series.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

namespace cafforge {

inline constexpr std::int64_t kDefaultNumSamples = 25;
inline constexpr std::int64_t kUnboundedLength = std::numeric_limits<std::int64_t>::max();
inline constexpr int kChunkAttempts = 3;

enum class ContextMode { with_context, no_context, swapped };

inline std::string_view context_mode_name(ContextMode mode) {
    switch (mode) {
        case ContextMode::with_context: return "with_context";
        case ContextMode::no_context: return "no_context";
        case ContextMode::swapped: return "swapped";
    }
    return "?";
}

struct ForecastRequest {
    /// During a chunked rollout this holds the extended history and a
    /// first_future_timestamp advanced past the chunks already produced.
    ForecastWindow window;
    ContextMode context_mode = ContextMode::no_context;
    std::string swapped_context;  // used only in swapped mode
    std::int64_t num_samples = kDefaultNumSamples;
    std::int64_t horizon = 0;
    std::int64_t horizon_offset = 0;  // steps produced by earlier chunks

    /// Text the forecaster should condition on, or nullptr.
    [[nodiscard]] const std::string* context_text() const {
        switch (context_mode) {
            case ContextMode::with_context: return window.context ? &*window.context : nullptr;
            case ContextMode::swapped: return &swapped_context;
            case ContextMode::no_context: return nullptr;
        }
        return nullptr;
    }
};

/// A probabilistic forecaster. produce() returns
/// num_samples x min(horizon, native_prediction_length()) values.
class ForecasterAdapter {
public:
    virtual ~ForecasterAdapter() = default;
    [[nodiscard]] virtual std::string name() const = 0;
    [[nodiscard]] virtual std::int64_t native_prediction_length() const { return kUnboundedLength; }
    [[nodiscard]] virtual bool supports_context() const = 0;
    /// Adapters returning false get their calls serialized by the pipeline.
    [[nodiscard]] virtual bool thread_safe() const { return true; }
    virtual ProbabilisticForecast produce(const ForecastRequest& request) = 0;
};

/// Point forecast repeating the last full season of the history; falls
/// back to the last value when the history is shorter than one season.
inline ProbabilisticForecast seasonal_naive_forecast(const ForecastWindow& window, std::int64_t season,
                                                     std::int64_t num_samples,
                                                     std::optional<std::int64_t> horizon = std::nullopt) {
    require(!window.past_target.empty(), "seasonal naive: empty history");
    require(season >= 1, "seasonal naive: seasonal period must be positive");
    require(num_samples >= 1, "seasonal naive: num_samples must be positive");
    const auto steps = horizon.value_or(window.horizon());
    require(steps >= 1, "seasonal naive: horizon must be positive");

    const auto p = window.history_length();
    const auto s = p >= season ? season : 1;
    std::vector<double> point(static_cast<std::size_t>(steps));
    for (std::int64_t t = 1; t <= steps; ++t) {
        const auto cycles = (t + s - 1) / s;
        point[static_cast<std::size_t>(t - 1)] = window.past_target[static_cast<std::size_t>(p + t - s * cycles - 1)];
    }
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(num_samples * steps));
    for (std::int64_t n = 0; n < num_samples; ++n) values.insert(values.end(), point.begin(), point.end());
    return ProbabilisticForecast(static_cast<std::size_t>(num_samples), static_cast<std::size_t>(steps), std::move(values));
}

class SeasonalNaiveForecaster : public ForecasterAdapter {
public:
    /// season <= 0 selects the period from each window's frequency.
    explicit SeasonalNaiveForecaster(std::int64_t season = 0) : season_(season) {}

    [[nodiscard]] std::string name() const override { return "seasonal_naive"; }
    [[nodiscard]] bool supports_context() const override { return false; }

    ProbabilisticForecast produce(const ForecastRequest& request) override {
        const auto season = season_ > 0 ? season_ : seasonal_period_for_frequency(request.window.freq);
        return seasonal_naive_forecast(request.window, season, request.num_samples, request.horizon);
    }

private:
    std::int64_t season_;
};

/// Wraps a callable; handy for tests and for composing adapters.
class CallbackForecaster : public ForecasterAdapter {
public:
    using Fn = std::function<ProbabilisticForecast(const ForecastRequest&)>;

    CallbackForecaster(std::string name, Fn fn, std::int64_t native = kUnboundedLength, bool supports_context = true,
                       bool thread_safe = true)
        : name_(std::move(name)), fn_(std::move(fn)), native_(native), context_(supports_context), thread_safe_(thread_safe) {}

    [[nodiscard]] std::string name() const override { return name_; }
    [[nodiscard]] std::int64_t native_prediction_length() const override { return native_; }
    [[nodiscard]] bool supports_context() const override { return context_; }
    [[nodiscard]] bool thread_safe() const override { return thread_safe_; }
    ProbabilisticForecast produce(const ForecastRequest& request) override { return fn_(request); }

private:
    std::string name_;
    Fn fn_;
    std::int64_t native_;
    bool context_;
    bool thread_safe_;
};

/// Replays sample matrices from a fixture file. Each line:
///   {"key": "<window key>", "mode": "with_context"|"no_context"|"swapped"|"any",
///    "samples": [[...], ...]}
/// A request reads rows [0, num_samples) and the columns of its chunk.
class ScriptedForecaster : public ForecasterAdapter {
public:
    ScriptedForecaster() = default;

    static ScriptedForecaster from_file(const std::string& path) {
        ScriptedForecaster out;
        std::ifstream in(path);
        if (!in) fail(ErrorKind::io, "cannot open forecast fixture " + path);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            try {
                const auto j = nlohmann::json::parse(line);
                out.add(j.at("key").get<std::string>(), j.value("mode", std::string("any")),
                        ProbabilisticForecast(j.at("samples").get<std::vector<std::vector<double>>>()));
            } catch (const nlohmann::json::exception& e) {
                fail(ErrorKind::data, path + ":" + std::to_string(line_no) + ": bad forecast fixture: " + e.what());
            }
        }
        return out;
    }

    void add(const std::string& key, const std::string& mode, ProbabilisticForecast samples) {
        entries_.insert_or_assign(key + "#" + mode, std::move(samples));
    }

    [[nodiscard]] std::string name() const override { return "scripted"; }
    [[nodiscard]] bool supports_context() const override { return true; }

    ProbabilisticForecast produce(const ForecastRequest& request) override {
        const auto key = request.window.key();
        auto it = entries_.find(key + "#" + std::string(context_mode_name(request.context_mode)));
        if (it == entries_.end()) it = entries_.find(key + "#any");
        if (it == entries_.end()) {
            fail(ErrorKind::forecaster, "scripted forecaster has no samples for " + key + " (" +
                                            std::string(context_mode_name(request.context_mode)) + ")");
        }
        const auto& m = it->second;
        const auto rows = static_cast<std::size_t>(request.num_samples);
        const auto cols = static_cast<std::size_t>(request.horizon);
        const auto offset = static_cast<std::size_t>(request.horizon_offset);
        if (m.num_samples() < rows || m.horizon() < offset + cols) {
            fail(ErrorKind::forecaster, "scripted forecaster: fixture for " + key + " is too small");
        }
        std::vector<double> values;
        values.reserve(rows * cols);
        for (std::size_t n = 0; n < rows; ++n) {
            for (std::size_t t = 0; t < cols; ++t) values.push_back(m.at(n, offset + t));
        }
        return ProbabilisticForecast(rows, cols, std::move(values));
    }

private:
    std::map<std::string, ProbabilisticForecast> entries_;
};

/// Asks a chat model for the whole horizon, one independent draw per
/// sample. Draws whose reply does not parse are re-requested up to
/// `draw_attempts` times in total.
class DirectPromptForecaster : public ForecasterAdapter {
public:
    DirectPromptForecaster(std::shared_ptr<const Gateway> gateway, std::string model = {}, double temperature = 1.0,
                           int draw_attempts = 3)
        : gateway_(std::move(gateway)), model_(std::move(model)), temperature_(temperature), draw_attempts_(draw_attempts) {
        require(gateway_ != nullptr, "direct prompt forecaster: gateway missing");
    }

    [[nodiscard]] std::string name() const override { return "direct_prompt"; }
    [[nodiscard]] bool supports_context() const override { return true; }

    ProbabilisticForecast produce(const ForecastRequest& request) override {
        require(request.num_samples >= 1, "direct prompt: num_samples must be positive");
        const auto prompt = render_dp_prompt_with(request.window, request.context_text(), request.horizon);
        const auto expected = request.window.future_timestamps(request.horizon);

        auto chat = direct_prompt_request(prompt.text, model_);
        chat.temperature = temperature_;

        const auto n = static_cast<std::size_t>(request.num_samples);
        std::vector<std::optional<std::vector<double>>> draws(n);
        std::string last_error;
        for (int attempt = 0; attempt < draw_attempts_; ++attempt) {
            std::vector<std::size_t> pending;
            for (std::size_t i = 0; i < n; ++i) {
                if (!draws[i]) pending.push_back(i);
            }
            if (pending.empty()) break;
            const auto replies = gateway_->complete_batch(std::vector<ChatRequest>(pending.size(), chat));
            for (std::size_t k = 0; k < pending.size(); ++k) {
                if (!replies[k].ok()) {
                    last_error = replies[k].error;
                    continue;
                }
                try {
                    draws[pending[k]] = parse_forecast_response(*replies[k].reply, expected);
                } catch (const Error& e) {
                    last_error = e.what();
                }
            }
        }
        std::vector<double> values;
        values.reserve(n * static_cast<std::size_t>(request.horizon));
        for (const auto& draw : draws) {
            if (!draw) {
                fail(ErrorKind::forecaster, "direct prompt: draw failed for " + request.window.key() + ": " + last_error);
            }
            values.insert(values.end(), draw->begin(), draw->end());
        }
        return ProbabilisticForecast(n, static_cast<std::size_t>(request.horizon), std::move(values));
    }

private:
    std::shared_ptr<const Gateway> gateway_;
    std::string model_;
    double temperature_;
    int draw_attempts_;
};

/// Serializes calls into an adapter that declared itself single-threaded.
class SerializedForecaster : public ForecasterAdapter {
public:
    explicit SerializedForecaster(ForecasterAdapter& inner) : inner_(inner) {}

    [[nodiscard]] std::string name() const override { return inner_.name(); }
    [[nodiscard]] std::int64_t native_prediction_length() const override { return inner_.native_prediction_length(); }
    [[nodiscard]] bool supports_context() const override { return inner_.supports_context(); }
    ProbabilisticForecast produce(const ForecastRequest& request) override {
        std::lock_guard lock(mutex_);
        return inner_.produce(request);
    }

private:
    ForecasterAdapter& inner_;
    std::mutex mutex_;
};

/// Autoregressive rollout in chunks of the adapter's native length. After
/// each chunk the per-step sample medians are appended to the history
/// before the next call. Each chunk gets kChunkAttempts tries.
inline ProbabilisticForecast chunked_rollout(ForecasterAdapter& adapter, const ForecastRequest& request) {
    require(request.horizon >= 1, "chunked_rollout: horizon must be at least 1");
    require(request.num_samples >= 1, "chunked_rollout: num_samples must be at least 1");
    const auto native = adapter.native_prediction_length();
    require(native >= 1, "chunked_rollout: adapter native length must be positive");

    const auto rows = static_cast<std::size_t>(request.num_samples);
    const auto total = static_cast<std::size_t>(request.horizon);
    std::vector<double> out(rows * total);

    ForecastRequest chunk = request;
    chunk.horizon_offset = 0;
    std::size_t produced = 0;
    while (produced < total) {
        const auto steps = static_cast<std::size_t>(std::min<std::int64_t>(native, static_cast<std::int64_t>(total - produced)));
        chunk.horizon = static_cast<std::int64_t>(steps);

        std::optional<ProbabilisticForecast> part;
        std::string last_error;
        for (int attempt = 0; attempt < kChunkAttempts && !part; ++attempt) {
            try {
                auto candidate = adapter.produce(chunk);
                if (candidate.num_samples() != rows || candidate.horizon() != steps) {
                    last_error = "adapter returned a " + std::to_string(candidate.num_samples()) + "x" +
                                 std::to_string(candidate.horizon()) + " forecast, expected " + std::to_string(rows) + "x" +
                                 std::to_string(steps);
                    continue;
                }
                part = std::move(candidate);
            } catch (const Error& e) {
                if (e.kind() == ErrorKind::precondition) throw;
                last_error = e.what();
            }
        }
        if (!part) {
            fail(ErrorKind::forecaster, adapter.name() + " failed on " + request.window.key() + " after " +
                                            std::to_string(kChunkAttempts) + " attempts: " + last_error);
        }

        for (std::size_t n = 0; n < rows; ++n) {
            for (std::size_t t = 0; t < steps; ++t) out[n * total + produced + t] = part->at(n, t);
        }
        produced += steps;

        if (produced < total) {
            const auto medians = point_median(*part);
            auto& w = chunk.window;
            w.past_target.insert(w.past_target.end(), medians.begin(), medians.end());
            w.first_future_timestamp = advance(w.first_future_timestamp, w.freq, static_cast<std::int64_t>(steps));
            const auto drop = std::min(w.future_target.size(), steps);
            w.future_target.erase(w.future_target.begin(), w.future_target.begin() + static_cast<std::ptrdiff_t>(drop));
            chunk.horizon_offset = static_cast<std::int64_t>(produced);
        }
    }
    return ProbabilisticForecast(rows, total, std::move(out));
}

/// Difficulty proxy: MASE of the baseline's context-free median forecast.
/// Stores the value in window.baseline_mase and returns it.
inline double compute_baseline_proxy(ForecastWindow& window, ForecasterAdapter& baseline, std::int64_t season,
                                     std::int64_t num_samples = kDefaultNumSamples) {
    ForecastRequest request;
    request.window = window;
    request.context_mode = ContextMode::no_context;
    request.num_samples = num_samples;
    request.horizon = window.horizon();
    const auto forecast = chunked_rollout(baseline, request);
    const auto median = point_median(forecast);
    const double value = mase(median, window.future_target, window.past_target, static_cast<std::size_t>(season));
    window.baseline_mase = value;
    return value;
}

}  // namespace cafforge

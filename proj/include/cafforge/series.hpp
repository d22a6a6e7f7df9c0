#pragma once

#include "cafforge/error.hpp"
#include "cafforge/random.hpp"
#include "cafforge/timestamp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace cafforge {

/// Longest history handed to any forecaster.
inline constexpr std::int64_t kMaxHistory = 512;

/// Prediction length for a frequency.
constexpr std::int64_t horizon_for_frequency(Frequency f) noexcept {
    switch (f) {
        case Frequency::five_minutely:
        case Frequency::fifteen_minutely:
        case Frequency::hourly:
        case Frequency::daily:
        case Frequency::business_daily:
            return 64;
        case Frequency::thirty_minutely: return 48;
        case Frequency::weekly: return 52;
        case Frequency::monthly: return 12;
        case Frequency::quarterly: return 8;
        case Frequency::yearly: return 5;
    }
    return 64;
}

/// Seasonal period used by the MASE scale.
constexpr std::int64_t seasonal_period_for_frequency(Frequency f) noexcept {
    switch (f) {
        case Frequency::hourly: return 24;
        case Frequency::daily: return 7;
        case Frequency::monthly: return 12;
        default: return 1;
    }
}

/// A regularly sampled univariate series. Timestamps are implied by
/// `start` and `freq`, so they are strictly increasing and evenly spaced
/// by construction.
class TimeSeries {
public:
    TimeSeries(std::string dataset_id, std::string item_id, Frequency freq, Timestamp start,
               std::vector<double> values, std::string domain_hint = {})
        : dataset_id_(std::move(dataset_id)),
          item_id_(std::move(item_id)),
          freq_(freq),
          start_(start),
          values_(std::move(values)),
          domain_hint_(std::move(domain_hint)) {
        const std::string where = dataset_id_ + "/" + item_id_;
        if (values_.size() < 2) {
            fail(ErrorKind::data, "series " + where + " has fewer than 2 values");
        }
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!std::isfinite(values_[i])) {
                fail(ErrorKind::data, "series " + where + " has a non-finite value at index " + std::to_string(i));
            }
        }
        if (freq_ == Frequency::business_daily && !is_business_day(start_)) {
            fail(ErrorKind::data, "series " + where + " is business-daily but starts on a weekend");
        }
    }

    [[nodiscard]] const std::string& dataset_id() const noexcept { return dataset_id_; }
    [[nodiscard]] const std::string& item_id() const noexcept { return item_id_; }
    [[nodiscard]] Frequency freq() const noexcept { return freq_; }
    [[nodiscard]] Timestamp start() const noexcept { return start_; }
    [[nodiscard]] const std::vector<double>& values() const noexcept { return values_; }
    [[nodiscard]] const std::string& domain_hint() const noexcept { return domain_hint_; }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }

    [[nodiscard]] Timestamp timestamp_at(std::int64_t index) const { return advance(start_, freq_, index); }

    [[nodiscard]] std::vector<Timestamp> timestamps() const {
        std::vector<Timestamp> out;
        out.reserve(values_.size());
        for (std::size_t i = 0; i < values_.size(); ++i) {
            out.push_back(timestamp_at(static_cast<std::int64_t>(i)));
        }
        return out;
    }

private:
    std::string dataset_id_;
    std::string item_id_;
    Frequency freq_;
    Timestamp start_;
    std::vector<double> values_;
    std::string domain_hint_;
};

/// One (history, future) pair cut from a series, plus whatever later
/// stages attach to it.
struct ForecastWindow {
    std::string dataset_id;
    std::string item_id;
    Frequency freq = Frequency::hourly;
    std::int64_t start_idx = 0;  // index of the first future step in the source series
    Timestamp first_future_timestamp{};
    std::vector<double> past_target;
    std::vector<double> future_target;
    std::optional<std::string> context;
    std::optional<std::string> short_desc;
    std::optional<double> baseline_mase;  // +inf when the scale degenerates

    [[nodiscard]] std::int64_t history_length() const noexcept { return static_cast<std::int64_t>(past_target.size()); }
    [[nodiscard]] std::int64_t horizon() const noexcept { return static_cast<std::int64_t>(future_target.size()); }

    /// Identity used by every file and fixture: "dataset/item/start_idx".
    [[nodiscard]] std::string key() const { return dataset_id + "/" + item_id + "/" + std::to_string(start_idx); }

    [[nodiscard]] std::vector<Timestamp> history_timestamps() const {
        std::vector<Timestamp> out;
        const auto p = history_length();
        out.reserve(static_cast<std::size_t>(p));
        for (std::int64_t i = 0; i < p; ++i) {
            out.push_back(advance(first_future_timestamp, freq, i - p));
        }
        return out;
    }

    [[nodiscard]] std::vector<Timestamp> future_timestamps(std::int64_t count) const {
        std::vector<Timestamp> out;
        out.reserve(static_cast<std::size_t>(count));
        for (std::int64_t i = 0; i < count; ++i) {
            out.push_back(advance(first_future_timestamp, freq, i));
        }
        return out;
    }
    [[nodiscard]] std::vector<Timestamp> future_timestamps() const { return future_timestamps(horizon()); }
};

/// Canonical ordering of windows: (dataset_id, item_id, start_idx).
inline bool canonical_less(const ForecastWindow& a, const ForecastWindow& b) {
    return std::tie(a.dataset_id, a.item_id, a.start_idx) < std::tie(b.dataset_id, b.item_id, b.start_idx);
}

/// Checks the structural window invariants. Throws Error(data) naming the
/// first violated rule.
inline void validate_window(const ForecastWindow& w) {
    const std::string where = "window " + w.key();
    const auto q = horizon_for_frequency(w.freq);
    const auto p = w.history_length();
    if (w.horizon() != q) {
        fail(ErrorKind::data, where + ": horizon " + std::to_string(w.horizon()) + " != " + std::to_string(q));
    }
    if (p < q || p > kMaxHistory) {
        fail(ErrorKind::data, where + ": history length " + std::to_string(p) + " outside [" + std::to_string(q) +
                                  ", " + std::to_string(kMaxHistory) + "]");
    }
    if (w.start_idx < p) {
        fail(ErrorKind::data, where + ": start_idx smaller than history length");
    }
    for (double v : w.past_target) {
        if (!std::isfinite(v)) fail(ErrorKind::data, where + ": non-finite history value");
    }
    for (double v : w.future_target) {
        if (!std::isfinite(v)) fail(ErrorKind::data, where + ": non-finite future value");
    }
    if (w.baseline_mase && (std::isnan(*w.baseline_mase) || *w.baseline_mase < 0.0)) {
        fail(ErrorKind::data, where + ": baseline_mase must be nonnegative or +inf");
    }
}

/// History length drawn uniformly from [Q, min(512, available)].
inline std::int64_t sample_history_length(std::int64_t horizon, std::int64_t available, Rng& rng) {
    require(horizon > 0, "sample_history_length: horizon must be positive");
    require(available >= horizon, "sample_history_length: available history (" + std::to_string(available) +
                                      ") shorter than horizon (" + std::to_string(horizon) + ")");
    return uniform_int(rng, horizon, std::min(kMaxHistory, available));
}

/// Rolling windows whose first future step sits at Q, Q+stride, Q+2*stride...
/// Windows come back sorted by start_idx.
inline std::vector<ForecastWindow> extract_windows(const TimeSeries& series, std::int64_t stride, Rng& rng) {
    require(stride > 0, "extract_windows: stride must be positive");
    const auto q = horizon_for_frequency(series.freq());
    const auto length = static_cast<std::int64_t>(series.size());
    if (length < 2 * q) {
        throw NoWindowsError("series " + series.dataset_id() + "/" + series.item_id() + " has " +
                             std::to_string(length) + " values; at least " + std::to_string(2 * q) + " needed");
    }

    std::vector<ForecastWindow> windows;
    const auto& values = series.values();
    for (std::int64_t start = q; start + q <= length; start += stride) {
        const auto p = sample_history_length(q, start, rng);
        ForecastWindow w;
        w.dataset_id = series.dataset_id();
        w.item_id = series.item_id();
        w.freq = series.freq();
        w.start_idx = start;
        w.first_future_timestamp = series.timestamp_at(start);
        w.past_target.assign(values.begin() + (start - p), values.begin() + start);
        w.future_target.assign(values.begin() + start, values.begin() + start + q);
        windows.push_back(std::move(w));
    }
    return windows;
}

/// Per-series generator derived from the pipeline seed, so extraction does
/// not depend on the order series are visited in.
inline Rng series_rng(std::uint64_t seed, const std::string& dataset_id, const std::string& item_id) {
    return Rng{mix_seed(seed, fnv1a64(dataset_id + "\x1f" + item_id))};
}

}  // namespace cafforge

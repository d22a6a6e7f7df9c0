#pragma once

#include "cafforge/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cafforge {

/// N Monte Carlo trajectories over T horizon steps, stored row-major.
class ProbabilisticForecast {
public:
    ProbabilisticForecast() = default;

    ProbabilisticForecast(std::size_t num_samples, std::size_t horizon, std::vector<double> values)
        : rows_(num_samples), cols_(horizon), data_(std::move(values)) {
        validate();
    }

    explicit ProbabilisticForecast(const std::vector<std::vector<double>>& trajectories) {
        rows_ = trajectories.size();
        cols_ = rows_ == 0 ? 0 : trajectories.front().size();
        data_.reserve(rows_ * cols_);
        for (const auto& row : trajectories) {
            if (row.size() != cols_) {
                fail(ErrorKind::data, "forecast trajectories have unequal lengths");
            }
            data_.insert(data_.end(), row.begin(), row.end());
        }
        validate();
    }

    [[nodiscard]] std::size_t num_samples() const noexcept { return rows_; }
    [[nodiscard]] std::size_t horizon() const noexcept { return cols_; }
    [[nodiscard]] double at(std::size_t sample, std::size_t step) const { return data_[sample * cols_ + step]; }
    [[nodiscard]] std::span<const double> trajectory(std::size_t sample) const {
        return {data_.data() + sample * cols_, cols_};
    }
    [[nodiscard]] std::vector<double> column(std::size_t step) const {
        std::vector<double> out(rows_);
        for (std::size_t n = 0; n < rows_; ++n) out[n] = at(n, step);
        return out;
    }
    [[nodiscard]] const std::vector<double>& values() const noexcept { return data_; }

    [[nodiscard]] std::vector<std::vector<double>> trajectories() const {
        std::vector<std::vector<double>> out;
        out.reserve(rows_);
        for (std::size_t n = 0; n < rows_; ++n) {
            auto row = trajectory(n);
            out.emplace_back(row.begin(), row.end());
        }
        return out;
    }

    friend bool operator==(const ProbabilisticForecast&, const ProbabilisticForecast&) = default;

private:
    void validate() const {
        if (rows_ == 0 || cols_ == 0) {
            fail(ErrorKind::data, "forecast needs at least one sample and one step");
        }
        if (data_.size() != rows_ * cols_) {
            fail(ErrorKind::data, "forecast value count does not match its shape");
        }
        for (double v : data_) {
            if (!std::isfinite(v)) fail(ErrorKind::data, "forecast contains a non-finite value");
        }
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

struct MetricConfig {
    double epsilon = 1e-6;
    double clip_cap = 5.0;
};

/// Per-window scores reported by the evaluator.
struct EvaluationRecord {
    std::string window_key;
    double ncrps = 0.0;
    std::optional<double> nmae;
    double mase = 0.0;  // +inf sentinel allowed
    std::optional<double> baseline_ncrps;
};

inline constexpr double kInfiniteMase = std::numeric_limits<double>::infinity();

/// CRPS of the empirical distribution of `samples` against `target`:
/// E|X - y| - E|X - X'| / 2, with X, X' drawn with replacement.
///
/// Uses the sorted-sample identity
///   sum_{n,m} |x_n - x_m| = 2 * sum_i (2i - N - 1) x_(i)   (1-based ranks),
/// so the cost is O(N log N).
inline double crps_step(std::span<const double> samples, double target) {
    require(!samples.empty(), "crps_step: empty sample list");
    require(std::isfinite(target), "crps_step: non-finite target");
    std::vector<double> sorted(samples.begin(), samples.end());
    for (double v : sorted) {
        require(std::isfinite(v), "crps_step: non-finite sample");
    }
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front() == sorted.back()) {
        return std::abs(sorted.front() - target);
    }

    const auto n = static_cast<double>(sorted.size());
    double abs_err = 0.0;
    double spread = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        abs_err += std::abs(sorted[i] - target);
        spread += (2.0 * static_cast<double>(i + 1) - n - 1.0) * sorted[i];
    }
    // spread == (1/2) sum_{n,m} |x_n - x_m|
    const double value = abs_err / n - spread / (n * n);
    return value < 0.0 ? 0.0 : value;
}

inline double crps_horizon_mean(const ProbabilisticForecast& forecast, std::span<const double> target) {
    require(target.size() == forecast.horizon(), "crps_horizon_mean: target length " + std::to_string(target.size()) +
                                                     " != forecast horizon " + std::to_string(forecast.horizon()));
    double total = 0.0;
    for (std::size_t t = 0; t < target.size(); ++t) {
        const auto column = forecast.column(t);
        total += crps_step(column, target[t]);
    }
    return total / static_cast<double>(target.size());
}

/// Mean absolute target magnitude, the normaliser for nCRPS and nMAE.
inline double scale_mean_abs(std::span<const double> target) {
    require(!target.empty(), "scale_mean_abs: empty target");
    double total = 0.0;
    for (double v : target) total += std::abs(v);
    return total / static_cast<double>(target.size());
}

inline double normalize_and_clip(double raw, double scale, const MetricConfig& cfg = {}) {
    return std::min(raw / (scale + cfg.epsilon), cfg.clip_cap);
}

struct Aggregate {
    double mean = 0.0;
    double standard_error = 0.0;  // sample sd / sqrt(M); 0 for M == 1
    std::size_t count = 0;
};

inline Aggregate aggregate_mean(std::span<const double> scores) {
    require(!scores.empty(), "aggregate_mean: empty score list");
    const auto m = static_cast<double>(scores.size());
    double sum = 0.0;
    for (double s : scores) sum += s;
    Aggregate out;
    out.count = scores.size();
    out.mean = sum / m;
    if (scores.size() > 1) {
        double ss = 0.0;
        for (double s : scores) ss += (s - out.mean) * (s - out.mean);
        out.standard_error = std::sqrt(ss / (m - 1.0)) / std::sqrt(m);
    }
    return out;
}

/// Fraction of windows where the model scores strictly below the baseline.
/// Ties count in the denominator only.
inline double win_rate(std::span<const double> model_scores, std::span<const double> baseline_scores) {
    require(!model_scores.empty(), "win_rate: empty score list");
    require(model_scores.size() == baseline_scores.size(), "win_rate: score lists differ in length");
    std::size_t wins = 0;
    for (std::size_t i = 0; i < model_scores.size(); ++i) {
        if (model_scores[i] < baseline_scores[i]) ++wins;
    }
    return static_cast<double>(wins) / static_cast<double>(model_scores.size());
}

inline double median_of(std::vector<double> values) {
    require(!values.empty(), "median: empty input");
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    const double upper = values[mid];
    if (values.size() % 2 == 1) {
        return upper;
    }
    const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

/// Per-step sample median; even N takes the midpoint of the central pair.
inline std::vector<double> point_median(const ProbabilisticForecast& forecast) {
    std::vector<double> out(forecast.horizon());
    for (std::size_t t = 0; t < forecast.horizon(); ++t) {
        out[t] = median_of(forecast.column(t));
    }
    return out;
}

inline double mean_abs_error(std::span<const double> point, std::span<const double> target) {
    require(point.size() == target.size(), "mean_abs_error: length mismatch");
    require(!target.empty(), "mean_abs_error: empty input");
    double total = 0.0;
    for (std::size_t t = 0; t < target.size(); ++t) total += std::abs(point[t] - target[t]);
    return total / static_cast<double>(target.size());
}

/// Clipped, normalised MAE of the median point forecast.
inline double nmae(const ProbabilisticForecast& forecast, std::span<const double> target, const MetricConfig& cfg = {}) {
    const auto point = point_median(forecast);
    return normalize_and_clip(mean_abs_error(point, target), scale_mean_abs(target), cfg);
}

/// Clipped, normalised horizon-mean CRPS.
inline double ncrps(const ProbabilisticForecast& forecast, std::span<const double> target, const MetricConfig& cfg = {}) {
    return normalize_and_clip(crps_horizon_mean(forecast, target), scale_mean_abs(target), cfg);
}

/// In-sample MAE of the seasonal naive forecast on `history`; falls back to
/// lag 1 when the history is not longer than one season.
inline double mase_scale(std::span<const double> history, std::size_t season) {
    require(history.size() >= 2, "mase_scale: history needs at least 2 values");
    require(season >= 1, "mase_scale: seasonal period must be positive");
    const std::size_t lag = history.size() > season ? season : 1;
    double total = 0.0;
    for (std::size_t t = lag; t < history.size(); ++t) {
        total += std::abs(history[t] - history[t - lag]);
    }
    return total / static_cast<double>(history.size() - lag);
}

inline double mase(std::span<const double> point_forecast, std::span<const double> target,
                   std::span<const double> history, std::size_t season) {
    require(point_forecast.size() == target.size(), "mase: forecast and target lengths differ");
    const double numerator = mean_abs_error(point_forecast, target);
    const double scale = mase_scale(history, season);
    if (scale > 0.0) {
        return numerator / scale;
    }
    return numerator == 0.0 ? 0.0 : kInfiniteMase;
}

}  // namespace cafforge

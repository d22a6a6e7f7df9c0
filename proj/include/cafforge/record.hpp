#pragma once

#include "cafforge/series.hpp"

#include <optional>
#include <string>

namespace cafforge {

/// A window plus every annotation the pipeline stages attach to it. This is
/// the unit stored in windows.jsonl.
struct WindowRecord {
    ForecastWindow window;
    std::optional<bool> judge_q1;
    std::optional<bool> judge_q2;
    std::optional<double> crps_with;
    std::optional<double> crps_without;
    std::optional<bool> accepted;
    std::optional<std::string> split;
    std::optional<std::string> difficulty;

    [[nodiscard]] std::string key() const { return window.key(); }
};

inline bool canonical_less(const WindowRecord& a, const WindowRecord& b) { return canonical_less(a.window, b.window); }

}  // namespace cafforge

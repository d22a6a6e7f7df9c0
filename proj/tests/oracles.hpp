#pragma once

// Direct, unoptimised reference computations used to check the library.

#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

/// E|X - y| - E|X - X'| / 2 over all N^2 ordered pairs.
inline double crps_double_sum(const std::vector<double>& samples, double y) {
    const auto n = static_cast<double>(samples.size());
    double first = 0.0;
    for (double x : samples) first += std::abs(x - y);
    double second = 0.0;
    for (double a : samples) {
        for (double b : samples) second += std::abs(a - b);
    }
    return first / n - second / (2.0 * n * n);
}

/// rows[n][t]: sample n at step t.
inline double crps_horizon(const std::vector<std::vector<double>>& rows, const std::vector<double>& target) {
    double total = 0.0;
    for (std::size_t t = 0; t < target.size(); ++t) {
        std::vector<double> column;
        for (const auto& row : rows) column.push_back(row[t]);
        total += crps_double_sum(column, target[t]);
    }
    return total / static_cast<double>(target.size());
}

}  // namespace oracle

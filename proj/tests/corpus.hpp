#pragma once

#include "cafforge/record.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace testing {

/// Lightweight records for split tests: identity, start index and a proxy
/// value, no series data. Proxies include exact threshold hits and +inf.
inline std::vector<cafforge::WindowRecord> synthetic_corpus(int datasets, int items, int windows_per_item,
                                                            std::uint64_t seed = 7) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> proxy(0.0, 3.0);
    std::uniform_int_distribution<int> special(0, 49);
    std::vector<cafforge::WindowRecord> out;
    for (int d = 0; d < datasets; ++d) {
        for (int i = 0; i < items; ++i) {
            const std::int64_t offset = 64 * (i % 7);
            for (int k = 0; k < windows_per_item; ++k) {
                cafforge::WindowRecord r;
                r.window.dataset_id = "set" + std::to_string(d);
                r.window.item_id = "item" + std::to_string(i);
                r.window.start_idx = offset + 64 * (k + 1);
                const int s = special(gen);
                r.window.baseline_mase = s == 0   ? std::numeric_limits<double>::infinity()
                                         : s == 1 ? 1.5
                                                  : proxy(gen);
                out.push_back(std::move(r));
            }
        }
    }
    return out;
}

}  // namespace testing

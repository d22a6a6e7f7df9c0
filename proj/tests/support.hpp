#pragma once

#include "cafforge/series.hpp"
#include "cafforge/timestamp.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace testing {

/// Scratch directory removed on scope exit.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
        path_ = std::filesystem::temp_directory_path() /
                ("cafforge_test_" + std::to_string(stamp) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const { return path_; }
    [[nodiscard]] std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

inline cafforge::Timestamp at(int y, unsigned m, unsigned d, int hh = 0, int mm = 0, int ss = 0) {
    using namespace std::chrono;
    return sys_days{year{y} / month{m} / day{d}} + hours{hh} + minutes{mm} + seconds{ss};
}

/// Hourly window with explicit values; skips validation so that tiny
/// fixtures are allowed.
inline cafforge::ForecastWindow window(std::vector<double> past, std::vector<double> future,
                                       const std::string& dataset = "ds", const std::string& item = "item",
                                       std::int64_t start_idx = -1, cafforge::Frequency freq = cafforge::Frequency::hourly,
                                       cafforge::Timestamp first = at(2024, 3, 5, 8)) {
    cafforge::ForecastWindow w;
    w.dataset_id = dataset;
    w.item_id = item;
    w.freq = freq;
    w.start_idx = start_idx >= 0 ? start_idx : static_cast<std::int64_t>(past.size());
    w.first_future_timestamp = first;
    w.past_target = std::move(past);
    w.future_target = std::move(future);
    return w;
}

/// A structurally valid hourly window (P = Q = 64) with a smooth pattern.
inline cafforge::ForecastWindow valid_window(const std::string& dataset, const std::string& item, std::int64_t start_idx,
                                             double offset = 0.0) {
    std::vector<double> past(64), future(64);
    for (int i = 0; i < 64; ++i) {
        past[static_cast<std::size_t>(i)] = 10.0 + offset + (i % 24);
        future[static_cast<std::size_t>(i)] = 10.0 + offset + ((i + 64) % 24);
    }
    return window(std::move(past), std::move(future), dataset, item, start_idx);
}

}  // namespace testing

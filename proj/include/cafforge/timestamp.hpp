#pragma once

#include "cafforge/error.hpp"

#include <array>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

namespace cafforge {

using Timestamp = std::chrono::sys_seconds;

/// Sampling frequencies recognised by the window extractor.
enum class Frequency {
    five_minutely,
    fifteen_minutely,
    thirty_minutely,
    hourly,
    daily,
    business_daily,
    weekly,
    monthly,
    quarterly,
    yearly,
};

inline constexpr std::array<Frequency, 10> kAllFrequencies = {
    Frequency::five_minutely, Frequency::fifteen_minutely, Frequency::thirty_minutely, Frequency::hourly,
    Frequency::daily,         Frequency::business_daily,   Frequency::weekly,          Frequency::monthly,
    Frequency::quarterly,     Frequency::yearly,
};

/// Canonical code used in files.
constexpr std::string_view frequency_code(Frequency f) noexcept {
    switch (f) {
        case Frequency::five_minutely: return "5min";
        case Frequency::fifteen_minutely: return "15min";
        case Frequency::thirty_minutely: return "30min";
        case Frequency::hourly: return "H";
        case Frequency::daily: return "D";
        case Frequency::business_daily: return "B";
        case Frequency::weekly: return "W";
        case Frequency::monthly: return "M";
        case Frequency::quarterly: return "Q";
        case Frequency::yearly: return "Y";
    }
    return "?";
}

/// Accepts the canonical codes plus the common pandas spellings.
inline std::optional<Frequency> parse_frequency(std::string_view code) {
    struct Alias {
        std::string_view text;
        Frequency freq;
    };
    static constexpr Alias aliases[] = {
        {"5min", Frequency::five_minutely},    {"5T", Frequency::five_minutely},
        {"15min", Frequency::fifteen_minutely}, {"15T", Frequency::fifteen_minutely},
        {"30min", Frequency::thirty_minutely}, {"30T", Frequency::thirty_minutely},
        {"H", Frequency::hourly},              {"h", Frequency::hourly},
        {"1H", Frequency::hourly},             {"1h", Frequency::hourly},
        {"D", Frequency::daily},               {"1D", Frequency::daily},
        {"B", Frequency::business_daily},      {"W", Frequency::weekly},
        {"W-SUN", Frequency::weekly},          {"M", Frequency::monthly},
        {"MS", Frequency::monthly},            {"ME", Frequency::monthly},
        {"Q", Frequency::quarterly},           {"QS", Frequency::quarterly},
        {"QE", Frequency::quarterly},          {"Q-DEC", Frequency::quarterly},
        {"Y", Frequency::yearly},              {"A", Frequency::yearly},
        {"YS", Frequency::yearly},             {"YE", Frequency::yearly},
        {"A-DEC", Frequency::yearly},
    };
    for (const auto& alias : aliases) {
        if (alias.text == code) {
            return alias.freq;
        }
    }
    return std::nullopt;
}

inline Frequency frequency_from_code(std::string_view code) {
    if (auto f = parse_frequency(code)) {
        return *f;
    }
    fail(ErrorKind::data, "unknown frequency code '" + std::string(code) + "'");
}

namespace detail {

constexpr std::int64_t floor_div(std::int64_t a, std::int64_t b) noexcept {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) {
        --q;
    }
    return q;
}

inline bool is_last_day_of_month(const std::chrono::year_month_day& ymd) {
    using namespace std::chrono;
    return ymd.day() == year_month_day_last{ymd.year(), month_day_last{ymd.month()}}.day();
}

inline Timestamp add_months(Timestamp anchor, std::int64_t months_to_add) {
    using namespace std::chrono;
    const auto day_point = floor<days>(anchor);
    const auto time_of_day = anchor - day_point;
    const year_month_day ymd{day_point};
    const bool month_end = is_last_day_of_month(ymd);

    const year_month shifted = year_month{ymd.year(), ymd.month()} + months{months_to_add};
    const day last = year_month_day_last{shifted.year(), month_day_last{shifted.month()}}.day();
    const day target = (month_end || ymd.day() > last) ? last : ymd.day();
    return sys_days{shifted / target} + time_of_day;
}

inline Timestamp add_business_days(Timestamp anchor, std::int64_t steps) {
    using namespace std::chrono;
    const auto day_point = floor<days>(anchor);
    const auto time_of_day = anchor - day_point;
    const std::int64_t wd = (weekday{day_point}.iso_encoding() - 1);  // Monday == 0
    const std::int64_t total = wd + steps;
    const std::int64_t weeks = floor_div(total, 5);
    const std::int64_t rem = total - weeks * 5;
    return day_point + days{weeks * 7 + rem - wd} + time_of_day;
}

}  // namespace detail

/// Timestamp `steps` periods after (or before, if negative) `anchor`.
/// Month-based frequencies keep month-end anchors on month ends and clamp
/// other days to the target month's length.
inline Timestamp advance(Timestamp anchor, Frequency f, std::int64_t steps) {
    using namespace std::chrono;
    switch (f) {
        case Frequency::five_minutely: return anchor + minutes{5 * steps};
        case Frequency::fifteen_minutely: return anchor + minutes{15 * steps};
        case Frequency::thirty_minutely: return anchor + minutes{30 * steps};
        case Frequency::hourly: return anchor + hours{steps};
        case Frequency::daily: return anchor + days{steps};
        case Frequency::business_daily: return detail::add_business_days(anchor, steps);
        case Frequency::weekly: return anchor + days{7 * steps};
        case Frequency::monthly: return detail::add_months(anchor, steps);
        case Frequency::quarterly: return detail::add_months(anchor, 3 * steps);
        case Frequency::yearly: return detail::add_months(anchor, 12 * steps);
    }
    return anchor;
}

inline bool is_business_day(Timestamp ts) {
    using namespace std::chrono;
    const unsigned wd = weekday{floor<days>(ts)}.iso_encoding();
    return wd <= 5;
}

/// "YYYY-MM-DD HH:MM:SS"
inline std::string format_timestamp(Timestamp ts) {
    using namespace std::chrono;
    const auto day_point = floor<days>(ts);
    const year_month_day ymd{day_point};
    const hh_mm_ss<seconds> tod{ts - day_point};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u %02d:%02d:%02d", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(tod.hours().count()), static_cast<int>(tod.minutes().count()),
                  static_cast<int>(tod.seconds().count()));
    return buf;
}

/// ISO-8601 form used in record files: "YYYY-MM-DDTHH:MM:SS".
inline std::string format_iso8601(Timestamp ts) {
    std::string text = format_timestamp(ts);
    text[10] = 'T';
    return text;
}

/// Accepts "YYYY-MM-DD", "YYYY-MM-DD HH:MM[:SS]" and the 'T'-separated
/// variant, optionally followed by 'Z'.
inline std::optional<Timestamp> parse_timestamp(std::string_view text) {
    using namespace std::chrono;
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
    if (!text.empty() && text.back() == 'Z') text.remove_suffix(1);

    auto read_int = [&](std::size_t pos, std::size_t len, int& out) {
        if (pos + len > text.size()) return false;
        for (std::size_t i = pos; i < pos + len; ++i) {
            if (text[i] < '0' || text[i] > '9') return false;
        }
        auto res = std::from_chars(text.data() + pos, text.data() + pos + len, out);
        return res.ec == std::errc{};
    };

    int y = 0, mo = 0, d = 0, hh = 0, mm = 0, ss = 0;
    if (text.size() < 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    if (!read_int(0, 4, y) || !read_int(5, 2, mo) || !read_int(8, 2, d)) return std::nullopt;
    if (text.size() > 10) {
        if (text[10] != ' ' && text[10] != 'T') return std::nullopt;
        if (text.size() != 16 && text.size() != 19) return std::nullopt;
        if (text[13] != ':' || !read_int(11, 2, hh) || !read_int(14, 2, mm)) return std::nullopt;
        if (text.size() == 19 && (text[16] != ':' || !read_int(17, 2, ss))) return std::nullopt;
    }
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || hh > 23 || mm > 59 || ss > 59) return std::nullopt;
    return sys_days{ymd} + hours{hh} + minutes{mm} + seconds{ss};
}

}  // namespace cafforge

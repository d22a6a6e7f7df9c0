#pragma once

#include "cafforge/error.hpp"
#include "cafforge/format.hpp"
#include "cafforge/metrics.hpp"
#include "cafforge/record.hpp"
#include "cafforge/series.hpp"
#include "cafforge/splitter.hpp"
#include "cafforge/verifier.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace cafforge {

using json = nlohmann::json;

namespace detail {

[[noreturn]] inline void schema_error(const std::string& where, std::size_t line, const std::string& what) {
    fail(ErrorKind::data, where + ":" + std::to_string(line) + ": " + what);
}

template <typename T>
T field(const json& j, const char* name, const std::string& where, std::size_t line) {
    const auto it = j.find(name);
    if (it == j.end()) schema_error(where, line, std::string("missing required field '") + name + "'");
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        schema_error(where, line, std::string("field '") + name + "' has the wrong type");
    }
}

template <typename T>
std::optional<T> optional_field(const json& j, const char* name, const std::string& where, std::size_t line) {
    const auto it = j.find(name);
    if (it == j.end() || it->is_null()) return std::nullopt;
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        schema_error(where, line, std::string("field '") + name + "' has the wrong type");
    }
}

/// Reals that may be +inf: a number, or the string "inf".
inline json real_or_inf(double v) {
    if (std::isinf(v) && v > 0) return "inf";
    return v;
}

inline double parse_real_or_inf(const json& v, const char* name, const std::string& where, std::size_t line) {
    if (v.is_string() && v.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
    if (v.is_number()) return v.get<double>();
    schema_error(where, line, std::string("field '") + name + "' must be a number or \"inf\"");
}

/// Reads nonblank lines of a JSONL file, handing each parsed object and its
/// 1-based line number to `visit`.
template <typename Visit>
void for_each_jsonl(const std::string& path, Visit&& visit) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io, "cannot open " + path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) schema_error(path, line_no, "malformed JSON line");
        visit(j, line_no);
    }
}

/// Writes through a temporary file and renames, so readers never see a
/// half-written artifact.
inline void write_text_file(const std::string& path, const std::string& content) {
    const std::filesystem::path target(path);
    if (target.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(target.parent_path(), ec);
    }
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorKind::io, "cannot write " + path);
        out << content;
        if (!out) fail(ErrorKind::io, "failed while writing " + path);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, target, ec);
    if (ec) fail(ErrorKind::io, "cannot move " + tmp + " to " + path + ": " + ec.message());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Raw series ingestion
//
// One series per line:
//   {"dataset_id": "...", "item_id": "...", "freq": "H", "start": "2020-01-01T00:00:00",
//    "values": [1.0, 2.0, ...], "domain_hint": "..."}      (domain_hint optional)

inline TimeSeries series_from_json(const json& j, const std::string& where, std::size_t line) {
    const auto freq_code = detail::field<std::string>(j, "freq", where, line);
    const auto freq = parse_frequency(freq_code);
    if (!freq) detail::schema_error(where, line, "unknown frequency code '" + freq_code + "'");
    const auto start_text = detail::field<std::string>(j, "start", where, line);
    const auto start = parse_timestamp(start_text);
    if (!start) detail::schema_error(where, line, "unparseable start timestamp '" + start_text + "'");

    const auto values_it = j.find("values");
    if (values_it == j.end() || !values_it->is_array()) detail::schema_error(where, line, "missing required field 'values'");
    std::vector<double> values;
    values.reserve(values_it->size());
    for (std::size_t i = 0; i < values_it->size(); ++i) {
        const auto& v = (*values_it)[i];
        if (!v.is_number()) detail::schema_error(where, line, "value " + std::to_string(i) + " is missing or not a number");
        values.push_back(v.get<double>());
    }
    try {
        return TimeSeries(detail::field<std::string>(j, "dataset_id", where, line),
                          detail::field<std::string>(j, "item_id", where, line), *freq, *start, std::move(values),
                          j.value("domain_hint", std::string{}));
    } catch (const Error& e) {
        detail::schema_error(where, line, e.what());
    }
}

inline std::vector<TimeSeries> read_series_file(const std::string& path) {
    std::vector<TimeSeries> out;
    detail::for_each_jsonl(path, [&](const json& j, std::size_t line) { out.push_back(series_from_json(j, path, line)); });
    return out;
}

inline json series_to_json(const TimeSeries& s) {
    json j;
    j["dataset_id"] = s.dataset_id();
    j["item_id"] = s.item_id();
    j["freq"] = std::string(frequency_code(s.freq()));
    j["start"] = format_iso8601(s.start());
    j["values"] = s.values();
    if (!s.domain_hint().empty()) j["domain_hint"] = s.domain_hint();
    return j;
}

// ---------------------------------------------------------------------------
// windows.jsonl

inline json record_to_json(const WindowRecord& r) {
    const auto& w = r.window;
    json j;
    j["dataset"] = w.dataset_id;
    j["item_id"] = w.item_id;
    j["start_idx"] = w.start_idx;
    j["freq"] = std::string(frequency_code(w.freq));
    j["past_target"] = w.past_target;
    j["future_target"] = w.future_target;
    j["first_future_timestamp"] = format_iso8601(w.first_future_timestamp);
    if (w.context) j["context"] = *w.context;
    if (w.short_desc) j["short_desc"] = *w.short_desc;
    if (w.baseline_mase) j["baseline_mase"] = detail::real_or_inf(*w.baseline_mase);
    if (r.judge_q1) j["judge_q1"] = *r.judge_q1;
    if (r.judge_q2) j["judge_q2"] = *r.judge_q2;
    if (r.crps_with) j["crps_with"] = *r.crps_with;
    if (r.crps_without) j["crps_without"] = *r.crps_without;
    if (r.accepted) j["accepted"] = *r.accepted;
    if (r.split) j["split"] = *r.split;
    if (r.difficulty) j["difficulty"] = *r.difficulty;
    return j;
}

inline WindowRecord record_from_json(const json& j, const std::string& where, std::size_t line) {
    using detail::field;
    using detail::optional_field;
    WindowRecord r;
    auto& w = r.window;
    w.dataset_id = field<std::string>(j, "dataset", where, line);
    w.item_id = field<std::string>(j, "item_id", where, line);
    w.start_idx = field<std::int64_t>(j, "start_idx", where, line);
    const auto freq_code = field<std::string>(j, "freq", where, line);
    const auto freq = parse_frequency(freq_code);
    if (!freq) detail::schema_error(where, line, "unknown frequency code '" + freq_code + "'");
    w.freq = *freq;
    w.past_target = field<std::vector<double>>(j, "past_target", where, line);
    w.future_target = field<std::vector<double>>(j, "future_target", where, line);
    const auto stamp_text = field<std::string>(j, "first_future_timestamp", where, line);
    const auto stamp = parse_timestamp(stamp_text);
    if (!stamp) detail::schema_error(where, line, "unparseable first_future_timestamp '" + stamp_text + "'");
    w.first_future_timestamp = *stamp;
    w.context = optional_field<std::string>(j, "context", where, line);
    w.short_desc = optional_field<std::string>(j, "short_desc", where, line);
    if (const auto it = j.find("baseline_mase"); it != j.end() && !it->is_null()) {
        w.baseline_mase = detail::parse_real_or_inf(*it, "baseline_mase", where, line);
    }
    r.judge_q1 = optional_field<bool>(j, "judge_q1", where, line);
    r.judge_q2 = optional_field<bool>(j, "judge_q2", where, line);
    r.crps_with = optional_field<double>(j, "crps_with", where, line);
    r.crps_without = optional_field<double>(j, "crps_without", where, line);
    r.accepted = optional_field<bool>(j, "accepted", where, line);
    r.split = optional_field<std::string>(j, "split", where, line);
    r.difficulty = optional_field<std::string>(j, "difficulty", where, line);
    try {
        validate_window(w);
    } catch (const Error& e) {
        detail::schema_error(where, line, e.what());
    }
    return r;
}

/// Canonical order, sorted keys, one object per line. Identical record sets
/// always produce identical bytes.
inline std::string serialize_windows(std::vector<WindowRecord> records) {
    std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return canonical_less(a, b); });
    std::string out;
    for (const auto& r : records) {
        try {
            validate_window(r.window);
        } catch (const Error& e) {
            fail(ErrorKind::data, std::string("refusing to write invalid record: ") + e.what());
        }
        out += record_to_json(r).dump();
        out += '\n';
    }
    return out;
}

inline void write_windows(const std::vector<WindowRecord>& records, const std::string& path) {
    detail::write_text_file(path, serialize_windows(records));
}

inline std::vector<WindowRecord> read_windows(const std::string& path) {
    std::vector<WindowRecord> out;
    detail::for_each_jsonl(path, [&](const json& j, std::size_t line) { out.push_back(record_from_json(j, path, line)); });
    return out;
}

/// Copies verification results onto the matching records.
inline void apply_outcomes(std::vector<WindowRecord>& records, const std::vector<VerificationOutcome>& outcomes) {
    std::map<std::string, const VerificationOutcome*> by_key;
    for (const auto& o : outcomes) by_key.emplace(o.window_key, &o);
    for (auto& r : records) {
        const auto it = by_key.find(r.key());
        if (it == by_key.end()) continue;
        const auto& o = *it->second;
        r.judge_q1 = o.judge ? std::optional<bool>(o.judge->q1) : std::nullopt;
        r.judge_q2 = o.judge ? std::optional<bool>(o.judge->q2) : std::nullopt;
        r.crps_with = o.crps_with;
        r.crps_without = o.crps_without;
        r.accepted = o.accepted;
    }
}

// ---------------------------------------------------------------------------
// Verification artifacts and funnel

inline json samples_to_json(const VerificationOutcome& o) {
    json j;
    j["key"] = o.window_key;
    if (o.samples_with) j["with_context"] = o.samples_with->trajectories();
    if (o.samples_without) j["without_context"] = o.samples_without->trajectories();
    if (o.failure) j["failure"] = *o.failure;
    return j;
}

inline std::string serialize_samples(const std::vector<VerificationOutcome>& outcomes) {
    std::string out;
    for (const auto& o : outcomes) {
        out += samples_to_json(o).dump();
        out += '\n';
    }
    return out;
}

inline json funnel_counts_to_json(const FunnelCounts& c) {
    return json{{"processed", c.processed},
                {"judge_passed", c.judge_passed},
                {"dp_accepted", c.dp_accepted},
                {"judge_failures", c.judge_failures},
                {"dp_failures", c.dp_failures},
                {"judge_pass_rate", c.judge_pass_rate()},
                {"context_helps_rate", c.context_helps_rate()}};
}

inline json funnel_to_json(const FunnelReport& f) {
    json per = json::object();
    for (const auto& [dataset, counts] : f.per_dataset) per[dataset] = funnel_counts_to_json(counts);
    return json{{"total", funnel_counts_to_json(f.total)}, {"per_dataset", per}};
}

inline FunnelCounts funnel_counts_from_json(const json& j) {
    FunnelCounts c;
    c.processed = j.at("processed").get<std::size_t>();
    c.judge_passed = j.at("judge_passed").get<std::size_t>();
    c.dp_accepted = j.at("dp_accepted").get<std::size_t>();
    c.judge_failures = j.value("judge_failures", std::size_t{0});
    c.dp_failures = j.value("dp_failures", std::size_t{0});
    return c;
}

// ---------------------------------------------------------------------------
// Split manifests

inline json assignment_to_json(const SplitAssignment& a) {
    return json{{"key", a.window_key},
                {"dataset", a.dataset_id},
                {"item_id", a.item_id},
                {"start_idx", a.start_idx},
                {"split", std::string(split_name(a.split))},
                {"difficulty", std::string(difficulty_name(a.difficulty))},
                {"baseline_mase", detail::real_or_inf(a.baseline_mase)},
                {"in_budget", a.in_budget}};
}

inline std::string serialize_assignments(const std::vector<SplitAssignment>& assignments) {
    std::string out;
    for (const auto& a : assignments) {
        out += assignment_to_json(a).dump();
        out += '\n';
    }
    return out;
}

inline std::vector<SplitAssignment> read_assignments(const std::string& path) {
    std::vector<SplitAssignment> out;
    detail::for_each_jsonl(path, [&](const json& j, std::size_t line) {
        using detail::field;
        SplitAssignment a;
        a.window_key = field<std::string>(j, "key", path, line);
        a.dataset_id = field<std::string>(j, "dataset", path, line);
        a.item_id = field<std::string>(j, "item_id", path, line);
        a.start_idx = field<std::int64_t>(j, "start_idx", path, line);
        const auto split = parse_split(field<std::string>(j, "split", path, line));
        if (!split) detail::schema_error(path, line, "unknown split label");
        a.split = *split;
        const auto difficulty = parse_difficulty(field<std::string>(j, "difficulty", path, line));
        if (!difficulty) detail::schema_error(path, line, "unknown difficulty label");
        a.difficulty = *difficulty;
        const auto it = j.find("baseline_mase");
        if (it == j.end()) detail::schema_error(path, line, "missing required field 'baseline_mase'");
        a.baseline_mase = detail::parse_real_or_inf(*it, "baseline_mase", path, line);
        a.in_budget = field<bool>(j, "in_budget", path, line);
        out.push_back(std::move(a));
    });
    return out;
}

inline std::string serialize_subsamples(const std::vector<Subsample>& subsamples) {
    std::string out;
    for (const auto& s : subsamples) {
        out += json{{"fraction", s.fraction}, {"count", s.keys.size()}, {"keys", s.keys}}.dump();
        out += '\n';
    }
    return out;
}

inline std::vector<Subsample> read_subsamples(const std::string& path) {
    std::vector<Subsample> out;
    detail::for_each_jsonl(path, [&](const json& j, std::size_t line) {
        Subsample s;
        s.fraction = detail::field<double>(j, "fraction", path, line);
        s.keys = detail::field<std::vector<std::string>>(j, "keys", path, line);
        out.push_back(std::move(s));
    });
    return out;
}

// ---------------------------------------------------------------------------
// Summary statistics

inline constexpr double kMasePlotCap = 5.0;

struct Histogram {
    double lower = 0.0;
    double width = 1.0;
    std::vector<std::size_t> counts;  // last bin is closed on the right

    void add(double v) {
        if (counts.empty()) return;
        auto bin = static_cast<std::ptrdiff_t>(std::floor((v - lower) / width));
        bin = std::clamp<std::ptrdiff_t>(bin, 0, static_cast<std::ptrdiff_t>(counts.size()) - 1);
        ++counts[static_cast<std::size_t>(bin)];
    }
    [[nodiscard]] std::size_t total() const {
        std::size_t t = 0;
        for (auto c : counts) t += c;
        return t;
    }
};

struct DistributionSummary {
    std::size_t count = 0;
    double min = 0.0;
    double median = 0.0;
    double mean = 0.0;
    double max = 0.0;
};

inline DistributionSummary summarize(const std::vector<double>& values) {
    DistributionSummary s;
    s.count = values.size();
    if (values.empty()) return s;
    s.min = *std::min_element(values.begin(), values.end());
    s.max = *std::max_element(values.begin(), values.end());
    s.median = median_of(values);
    double total = 0.0;
    for (double v : values) total += v;
    s.mean = total / static_cast<double>(values.size());
    return s;
}

struct WindowStats {
    std::size_t windows = 0;
    Histogram history{0.0, 64.0, std::vector<std::size_t>(8, 0)};  // [0, 512] in steps of 64
    std::map<std::int64_t, std::size_t> horizon_counts;
    DistributionSummary history_summary;
    DistributionSummary mase;  // finite values <= 5 only
    Histogram mase_histogram{0.0, 0.5, std::vector<std::size_t>(10, 0)};
    std::size_t mase_excluded = 0;
};

struct StatsSummary {
    std::vector<std::pair<std::string, std::size_t>> dataset_counts;  // descending by count
    WindowStats overall;
    std::map<std::string, WindowStats> per_dataset;
    FunnelCounts funnel;  // from records that went through verification
};

inline WindowStats window_stats(const std::vector<const WindowRecord*>& records) {
    WindowStats s;
    s.windows = records.size();
    std::vector<double> histories;
    std::vector<double> mases;
    for (const auto* r : records) {
        const auto p = r->window.history_length();
        histories.push_back(static_cast<double>(p));
        s.history.add(static_cast<double>(p));
        ++s.horizon_counts[r->window.horizon()];
        if (r->window.baseline_mase) {
            const double m = *r->window.baseline_mase;
            if (std::isfinite(m) && m <= kMasePlotCap) {
                mases.push_back(m);
                s.mase_histogram.add(m);
            } else {
                ++s.mase_excluded;
            }
        }
    }
    s.history_summary = summarize(histories);
    s.mase = summarize(mases);
    return s;
}

inline StatsSummary compute_stats(const std::vector<WindowRecord>& records) {
    StatsSummary out;
    std::map<std::string, std::vector<const WindowRecord*>> by_dataset;
    std::vector<const WindowRecord*> all;
    for (const auto& r : records) {
        by_dataset[r.window.dataset_id].push_back(&r);
        all.push_back(&r);
        if (r.accepted.has_value()) {
            ++out.funnel.processed;
            const bool judged = r.judge_q1.has_value() && r.judge_q2.has_value();
            if (!judged || (*r.judge_q1 && *r.judge_q2)) ++out.funnel.judge_passed;
            if (*r.accepted) ++out.funnel.dp_accepted;
        }
    }
    for (const auto& [dataset, rows] : by_dataset) {
        out.dataset_counts.emplace_back(dataset, rows.size());
        out.per_dataset.emplace(dataset, window_stats(rows));
    }
    std::stable_sort(out.dataset_counts.begin(), out.dataset_counts.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    out.overall = window_stats(all);
    return out;
}

inline json distribution_to_json(const DistributionSummary& d) {
    if (d.count == 0) return json{{"count", 0}};
    return json{{"count", d.count}, {"min", d.min}, {"median", d.median}, {"mean", d.mean}, {"max", d.max}};
}

inline json window_stats_to_json(const WindowStats& s) {
    json horizons = json::object();
    for (const auto& [h, c] : s.horizon_counts) horizons[std::to_string(h)] = c;
    return json{{"windows", s.windows},
                {"history_length", distribution_to_json(s.history_summary)},
                {"history_histogram", {{"lower", s.history.lower}, {"width", s.history.width}, {"counts", s.history.counts}}},
                {"horizon_counts", horizons},
                {"baseline_mase", distribution_to_json(s.mase)},
                {"baseline_mase_histogram",
                 {{"lower", s.mase_histogram.lower}, {"width", s.mase_histogram.width}, {"counts", s.mase_histogram.counts}}},
                {"baseline_mase_excluded", s.mase_excluded}};
}

inline json stats_to_json(const StatsSummary& s) {
    json counts = json::array();
    for (const auto& [dataset, n] : s.dataset_counts) counts.push_back({{"dataset", dataset}, {"windows", n}});
    json per = json::object();
    for (const auto& [dataset, stats] : s.per_dataset) per[dataset] = window_stats_to_json(stats);
    return json{{"dataset_counts", counts},
                {"overall", window_stats_to_json(s.overall)},
                {"per_dataset", per},
                {"funnel", funnel_counts_to_json(s.funnel)}};
}

/// One row per dataset (descending window count) followed by an ALL row.
inline std::string stats_to_csv(const StatsSummary& s) {
    std::ostringstream out;
    out << "dataset,windows,history_min,history_median,history_max,mase_count,mase_mean,mase_median,mase_excluded\n";
    auto row = [&](const std::string& name, const WindowStats& w) {
        out << name << ',' << w.windows << ',' << format_number(w.history_summary.min) << ','
            << format_number(w.history_summary.median) << ',' << format_number(w.history_summary.max) << ',' << w.mase.count
            << ',' << (w.mase.count ? format_number(w.mase.mean) : "") << ','
            << (w.mase.count ? format_number(w.mase.median) : "") << ',' << w.mase_excluded << '\n';
    };
    for (const auto& [dataset, n] : s.dataset_counts) row(dataset, s.per_dataset.at(dataset));
    if (!s.dataset_counts.empty()) row("ALL", s.overall);
    return out.str();
}

}  // namespace cafforge

#include "cafforge/catalog.hpp"

#include "corpus.hpp"
#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <limits>
#include <random>

using namespace cafforge;
using Catch::Matchers::ContainsSubstring;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

WindowRecord random_record(std::mt19937_64& gen, int index) {
    std::uniform_int_distribution<int> pick(0, 9);
    std::normal_distribution<double> value(0.0, 1e4);
    const auto freq = kAllFrequencies[static_cast<std::size_t>(pick(gen))];
    const auto q = horizon_for_frequency(freq);
    std::uniform_int_distribution<std::int64_t> plen(q, kMaxHistory);
    const auto p = plen(gen);

    WindowRecord r;
    auto& w = r.window;
    w.dataset_id = "set" + std::to_string(pick(gen) % 3);
    w.item_id = "item \"" + std::to_string(index) + "\" \xc3\xa9";
    w.freq = freq;
    w.start_idx = p + index;
    w.first_future_timestamp = testing::at(2001 + pick(gen), 1 + static_cast<unsigned>(pick(gen)), 3, pick(gen), 15);
    if (freq == Frequency::business_daily) w.first_future_timestamp = testing::at(2024, 3, 4);
    for (std::int64_t i = 0; i < p; ++i) w.past_target.push_back(value(gen) / 3.0);
    for (std::int64_t i = 0; i < q; ++i) w.future_target.push_back(std::ldexp(value(gen), -pick(gen) * 40));
    if (pick(gen) < 7) w.context = "Scenario:\n a \"quoted\" {brace} line\t" + std::to_string(index);
    if (pick(gen) < 5) w.short_desc = "desc " + std::to_string(index);
    const int m = pick(gen);
    if (m == 0) w.baseline_mase = kInf;
    else if (m < 8) w.baseline_mase = std::abs(value(gen)) / 7.0;
    if (pick(gen) < 6) {
        r.judge_q1 = pick(gen) < 5;
        r.judge_q2 = pick(gen) < 5;
    }
    if (pick(gen) < 6) {
        r.crps_with = std::abs(value(gen)) / 11.0;
        r.crps_without = std::abs(value(gen)) / 13.0;
        r.accepted = *r.crps_with < *r.crps_without;
    }
    if (pick(gen) < 4) r.split = "indomain-val";
    if (pick(gen) < 4) r.difficulty = "HARD";
    return r;
}

void check_equal(const WindowRecord& a, const WindowRecord& b) {
    CHECK(a.window.dataset_id == b.window.dataset_id);
    CHECK(a.window.item_id == b.window.item_id);
    CHECK(a.window.start_idx == b.window.start_idx);
    CHECK(a.window.freq == b.window.freq);
    CHECK(a.window.first_future_timestamp == b.window.first_future_timestamp);
    CHECK(a.window.past_target == b.window.past_target);
    CHECK(a.window.future_target == b.window.future_target);
    CHECK(a.window.context == b.window.context);
    CHECK(a.window.short_desc == b.window.short_desc);
    CHECK(a.window.baseline_mase == b.window.baseline_mase);
    CHECK(a.judge_q1 == b.judge_q1);
    CHECK(a.judge_q2 == b.judge_q2);
    CHECK(a.crps_with == b.crps_with);
    CHECK(a.crps_without == b.crps_without);
    CHECK(a.accepted == b.accepted);
    CHECK(a.split == b.split);
    CHECK(a.difficulty == b.difficulty);
}

}  // namespace

TEST_CASE("window records round-trip bit for bit") {
    testing::TempDir dir;
    std::mt19937_64 gen(31);
    std::vector<WindowRecord> records;
    for (int i = 0; i < 60; ++i) records.push_back(random_record(gen, i));
    const auto path = dir.file("windows.jsonl");
    write_windows(records, path);
    const auto loaded = read_windows(path);
    REQUIRE(loaded.size() == records.size());

    auto sorted = records;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return canonical_less(a, b); });
    for (std::size_t i = 0; i < sorted.size(); ++i) check_equal(sorted[i], loaded[i]);

    // Rewriting the loaded records reproduces the same bytes.
    const auto again = dir.file("again.jsonl");
    write_windows(loaded, again);
    CHECK(testing::slurp(path) == testing::slurp(again));
}

TEST_CASE("file content does not depend on production order") {
    std::mt19937_64 gen(5);
    std::vector<WindowRecord> records;
    for (int i = 0; i < 20; ++i) records.push_back(random_record(gen, i));
    auto shuffled = records;
    std::shuffle(shuffled.begin(), shuffled.end(), gen);
    CHECK(serialize_windows(records) == serialize_windows(shuffled));
}

TEST_CASE("infinite MASE is written as the string inf") {
    WindowRecord r;
    r.window = testing::valid_window("d", "i", 64);
    r.window.baseline_mase = kInf;
    const auto text = serialize_windows({r});
    CHECK_THAT(text, ContainsSubstring("\"baseline_mase\":\"inf\""));
    CHECK(text.back() == '\n');

    testing::TempDir dir;
    testing::spit(dir.file("w.jsonl"), text);
    const auto loaded = read_windows(dir.file("w.jsonl"));
    REQUIRE(loaded.size() == 1);
    CHECK(*loaded[0].window.baseline_mase == kInf);
}

TEST_CASE("empty record lists give empty files") {
    testing::TempDir dir;
    write_windows({}, dir.file("empty.jsonl"));
    CHECK(testing::slurp(dir.file("empty.jsonl")).empty());
    CHECK(read_windows(dir.file("empty.jsonl")).empty());
}

TEST_CASE("schema errors name the field and the line") {
    testing::TempDir dir;
    WindowRecord r;
    r.window = testing::valid_window("d", "i", 64);
    auto j = record_to_json(r);
    j.erase("future_target");
    testing::spit(dir.file("bad.jsonl"), serialize_windows({r}) + j.dump() + "\n");
    CHECK_THROWS_WITH(read_windows(dir.file("bad.jsonl")),
                      ContainsSubstring(":2:") && ContainsSubstring("future_target"));

    testing::spit(dir.file("bad.jsonl"), "{not json\n");
    CHECK_THROWS_WITH(read_windows(dir.file("bad.jsonl")), ContainsSubstring(":1: malformed JSON line"));

    j = record_to_json(r);
    j["baseline_mase"] = "huge";
    testing::spit(dir.file("bad.jsonl"), j.dump() + "\n");
    CHECK_THROWS_WITH(read_windows(dir.file("bad.jsonl")), ContainsSubstring("baseline_mase"));

    CHECK_THROWS_AS(read_windows(dir.file("missing.jsonl")), Error);
}

TEST_CASE("invalid records are not written") {
    WindowRecord r;
    r.window = testing::valid_window("d", "i", 64);
    r.window.future_target.pop_back();
    CHECK_THROWS_AS(serialize_windows({r}), Error);
    testing::TempDir dir;
    testing::spit(dir.file("file.txt"), "x");
    CHECK_THROWS_AS(write_windows({}, (dir.path() / "file.txt" / "x.jsonl").string()), Error);
}

TEST_CASE("series files are ingested with line-numbered errors") {
    testing::TempDir dir;
    const auto path = dir.file("series.jsonl");
    testing::spit(path,
                  "{\"dataset_id\": \"d\", \"item_id\": \"a\", \"freq\": \"H\", \"start\": \"2024-01-01 00:00:00\", "
                  "\"values\": [1, 2.5, 3], \"domain_hint\": \"hint\"}\n");
    const auto series = read_series_file(path);
    REQUIRE(series.size() == 1);
    CHECK(series[0].values() == std::vector<double>{1, 2.5, 3});
    CHECK(series[0].domain_hint() == "hint");
    CHECK(series_to_json(series[0])["start"] == "2024-01-01T00:00:00");

    testing::spit(path, "\n{\"dataset_id\": \"d\", \"item_id\": \"a\", \"freq\": \"H\", \"start\": \"2024-01-01\", "
                        "\"values\": [1, null, 3]}\n");
    CHECK_THROWS_WITH(read_series_file(path), ContainsSubstring(":2:") && ContainsSubstring("value 1"));
    testing::spit(path, "{\"dataset_id\": \"d\", \"item_id\": \"a\", \"freq\": \"fortnight\", \"start\": \"2024-01-01\", "
                        "\"values\": [1, 2]}\n");
    CHECK_THROWS_WITH(read_series_file(path), ContainsSubstring("frequency"));
}

TEST_CASE("split manifests round-trip") {
    testing::TempDir dir;
    auto records = testing::synthetic_corpus(3, 3, 30);
    SplitPlan plan;
    plan.indomain_datasets = {"set0", "set1"};
    plan.zeroshot_datasets = {"set2"};
    plan.subsample_fractions = {0.1, 0.5};
    plan.budgets = {{Split::zeroshot_test, 5}};
    const auto result = build_splits(records, plan);
    detail::write_text_file(dir.file("splits.jsonl"), serialize_assignments(result.assignments));
    detail::write_text_file(dir.file("subsamples.jsonl"), serialize_subsamples(result.subsamples));
    CHECK(read_assignments(dir.file("splits.jsonl")) == result.assignments);
    const auto subs = read_subsamples(dir.file("subsamples.jsonl"));
    REQUIRE(subs.size() == 2);
    CHECK(subs[1].keys == result.subsamples[1].keys);
    CHECK(subs[0].fraction == 0.1);
}

TEST_CASE("summary statistics") {
    SECTION("MASE filter drops values above 5 and infinities") {
        std::vector<WindowRecord> records(3);
        const double proxies[] = {0.5, 6.0, kInf};
        for (int i = 0; i < 3; ++i) {
            records[static_cast<std::size_t>(i)].window = testing::valid_window("d", "i", 64 + i);
            records[static_cast<std::size_t>(i)].window.baseline_mase = proxies[i];
        }
        const auto stats = compute_stats(records);
        CHECK(stats.overall.mase.count == 1);
        CHECK(stats.overall.mase.mean == 0.5);
        CHECK(stats.overall.mase_excluded == 2);
        CHECK(stats.overall.mase_histogram.total() == 1);
        CHECK(stats.overall.history.total() == 3);
    }
    SECTION("dataset counts are sorted descending") {
        std::vector<WindowRecord> records(8);
        for (int i = 0; i < 8; ++i) {
            records[static_cast<std::size_t>(i)].window = testing::valid_window(i < 3 ? "small" : "big", "i", 64 + i);
        }
        const auto stats = compute_stats(records);
        REQUIRE(stats.dataset_counts.size() == 2);
        CHECK(stats.dataset_counts[0] == std::pair<std::string, std::size_t>{"big", 5});
        CHECK(stats.dataset_counts[1] == std::pair<std::string, std::size_t>{"small", 3});
        const auto csv = stats_to_csv(stats);
        CHECK(csv.find("\nbig,5,") < csv.find("\nsmall,3,"));
        CHECK(stats.overall.horizon_counts.at(64) == 8);
        CHECK(stats_to_json(stats)["per_dataset"]["big"]["windows"] == 5);
    }
    SECTION("empty input") {
        const auto stats = compute_stats({});
        CHECK(stats.dataset_counts.empty());
        CHECK(stats.overall.windows == 0);
        CHECK(stats.overall.mase.count == 0);
        CHECK(stats.funnel == FunnelCounts{});
        CHECK(stats_to_csv(stats).find('\n') == stats_to_csv(stats).size() - 1);
    }
    SECTION("funnel counts come from verification fields") {
        std::vector<WindowRecord> records(4);
        for (int i = 0; i < 4; ++i) records[static_cast<std::size_t>(i)].window = testing::valid_window("d", "i", 64 + i);
        records[0].judge_q1 = records[0].judge_q2 = true;
        records[0].accepted = true;
        records[1].judge_q1 = true;
        records[1].judge_q2 = false;
        records[1].accepted = false;
        records[2].accepted = false;
        const auto stats = compute_stats(records);
        CHECK(stats.funnel.processed == 3);
        CHECK(stats.funnel.judge_passed == 2);
        CHECK(stats.funnel.dp_accepted == 1);
    }
}

TEST_CASE("funnel json") {
    FunnelReport report;
    report.total = FunnelCounts{10, 8, 5, 1, 0};
    report.per_dataset["d"] = report.total;
    const auto j = funnel_to_json(report);
    CHECK(j["total"]["context_helps_rate"] == 0.625);
    CHECK(funnel_counts_from_json(j["per_dataset"]["d"]) == report.total);
}

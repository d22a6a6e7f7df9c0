#include "cafforge/forecast.hpp"

#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <atomic>

using namespace cafforge;
using Catch::Matchers::ContainsSubstring;

namespace {

ForecastRequest request_for(const ForecastWindow& w, std::int64_t horizon, std::int64_t samples = 3) {
    ForecastRequest r;
    r.window = w;
    r.horizon = horizon;
    r.num_samples = samples;
    return r;
}

std::vector<double> row(const ProbabilisticForecast& f, std::size_t n) {
    const auto span = f.trajectory(n);
    return {span.begin(), span.end()};
}

/// Records each call and answers with samples 100*call + step (+ sample index).
struct RecordingAdapter {
    std::vector<ForecastRequest> calls;
    CallbackForecaster adapter(std::int64_t native) {
        return CallbackForecaster(
            "recording",
            [this](const ForecastRequest& r) {
                calls.push_back(r);
                const auto rows = static_cast<std::size_t>(r.num_samples);
                const auto cols = static_cast<std::size_t>(r.horizon);
                std::vector<double> v;
                for (std::size_t n = 0; n < rows; ++n) {
                    for (std::size_t t = 0; t < cols; ++t) {
                        v.push_back(100.0 * static_cast<double>(calls.size()) + static_cast<double>(t) + static_cast<double>(n));
                    }
                }
                return ProbabilisticForecast(rows, cols, v);
            },
            native, true, false);
    }
};

}  // namespace

TEST_CASE("seasonal naive examples") {
    auto f = seasonal_naive_forecast(testing::window({1, 2, 3, 4}, {0, 0}), 1, 3);
    for (std::size_t n = 0; n < 3; ++n) CHECK(row(f, n) == std::vector<double>{4, 4});
    f = seasonal_naive_forecast(testing::window({10, 20}, {0, 0}), 2, 2);
    CHECK(row(f, 0) == std::vector<double>{10, 20});
    f = seasonal_naive_forecast(testing::window({5}, {0}), 7, 1);
    CHECK(row(f, 0) == std::vector<double>{5});
    f = seasonal_naive_forecast(testing::window({1, 2, 3, 4, 5}, {0, 0, 0, 0, 0}), 2, 1);
    CHECK(row(f, 0) == std::vector<double>{4, 5, 4, 5, 4});
    CHECK(seasonal_naive_forecast(testing::window({1, 2, 3}, {0}), 2, 4) ==
          seasonal_naive_forecast(testing::window({1, 2, 3}, {0}), 2, 4));
}

TEST_CASE("rollout within the native length is a single call") {
    RecordingAdapter rec;
    auto adapter = rec.adapter(64);
    const auto f = chunked_rollout(adapter, request_for(testing::valid_window("d", "i", 64), 64));
    CHECK(rec.calls.size() == 1);
    CHECK(f.horizon() == 64);
    CHECK(f.num_samples() == 3);
}

TEST_CASE("rollout beyond the native length chunks and extends the history") {
    RecordingAdapter rec;
    auto adapter = rec.adapter(64);
    auto w = testing::valid_window("d", "i", 64);
    w.future_target.resize(96, 1.0);
    const auto f = chunked_rollout(adapter, request_for(w, 96));
    REQUIRE(rec.calls.size() == 2);
    CHECK(rec.calls[0].horizon == 64);
    CHECK(rec.calls[1].horizon == 32);
    CHECK(rec.calls[1].horizon_offset == 64);
    CHECK(rec.calls[1].window.key() == w.key());

    const auto& extended = rec.calls[1].window.past_target;
    REQUIRE(extended.size() == w.past_target.size() + 64);
    CHECK(std::equal(w.past_target.begin(), w.past_target.end(), extended.begin()));
    for (std::size_t t = 0; t < 64; ++t) {
        // samples at step t are 100 + t + {0,1,2}; the median is 101 + t
        CHECK(extended[w.past_target.size() + t] == 101.0 + static_cast<double>(t));
    }
    CHECK(rec.calls[1].window.first_future_timestamp == advance(w.first_future_timestamp, w.freq, 64));
    CHECK(f.horizon() == 96);
    CHECK(f.at(0, 63) == 163.0);
    CHECK(f.at(2, 64) == 202.0);
}

TEST_CASE("rollout rejects an empty horizon") {
    RecordingAdapter rec;
    auto adapter = rec.adapter(64);
    CHECK_THROWS_AS(chunked_rollout(adapter, request_for(testing::valid_window("d", "i", 64), 0)), Error);
}

TEST_CASE("rollout of a deterministic adapter equals two chained calls") {
    auto w = testing::valid_window("d", "i", 64);
    w.future_target.resize(128, 0.0);
    SeasonalNaiveForecaster naive(5);
    CallbackForecaster chunked("chunked", [&](const ForecastRequest& r) { return naive.produce(r); }, 64);
    const auto whole = chunked_rollout(chunked, request_for(w, 128));

    const auto first = seasonal_naive_forecast(w, 5, 3, 64);
    auto w2 = w;
    const auto medians = point_median(first);
    w2.past_target.insert(w2.past_target.end(), medians.begin(), medians.end());
    const auto second = seasonal_naive_forecast(w2, 5, 3, 64);
    for (std::size_t n = 0; n < 3; ++n) {
        for (std::size_t t = 0; t < 64; ++t) {
            CHECK(whole.at(n, t) == first.at(n, t));
            CHECK(whole.at(n, 64 + t) == second.at(n, t));
        }
    }
}

TEST_CASE("rollout retries a failing chunk three times") {
    int calls = 0;
    CallbackForecaster flaky("flaky", [&](const ForecastRequest& r) {
        if (++calls < 3) fail(ErrorKind::forecaster, "temporary");
        return ProbabilisticForecast(static_cast<std::size_t>(r.num_samples), static_cast<std::size_t>(r.horizon),
                                     std::vector<double>(static_cast<std::size_t>(r.num_samples * r.horizon), 1.0));
    });
    CHECK_NOTHROW(chunked_rollout(flaky, request_for(testing::valid_window("d", "i", 64), 64)));
    CHECK(calls == 3);

    calls = -10;
    CHECK_THROWS_WITH(chunked_rollout(flaky, request_for(testing::valid_window("d", "i", 64), 64)),
                      ContainsSubstring("after 3 attempts"));

    CallbackForecaster misshapen("bad", [](const ForecastRequest&) { return ProbabilisticForecast(std::vector<std::vector<double>>{{1.0}}); });
    CHECK_THROWS_AS(chunked_rollout(misshapen, request_for(testing::valid_window("d", "i", 64), 64)), Error);
}

TEST_CASE("baseline proxy") {
    SeasonalNaiveForecaster naive;
    auto w = testing::window({1, 2, 3, 4}, {5});
    CHECK(compute_baseline_proxy(w, naive, 1) == 1.0);
    CHECK(w.baseline_mase == 1.0);

    auto exact = testing::window({1, 2, 3, 4}, {4, 4});
    CHECK(compute_baseline_proxy(exact, naive, 1) == 0.0);

    auto flat = testing::window({3, 3, 3}, {4});
    CHECK(compute_baseline_proxy(flat, naive, 1) == kInfiniteMase);
}

TEST_CASE("scripted forecaster serves samples by key and mode") {
    testing::TempDir dir;
    const auto path = dir.file("f.jsonl");
    testing::spit(path,
                  "{\"key\": \"ds/item/4\", \"mode\": \"with_context\", \"samples\": [[1, 2, 3], [1, 2, 3]]}\n"
                  "{\"key\": \"ds/item/4\", \"samples\": [[7, 8, 9], [7, 8, 9]]}\n");
    auto scripted = ScriptedForecaster::from_file(path);
    auto w = testing::window({0, 0, 0, 0}, {0, 0, 0});
    auto r = request_for(w, 2, 2);
    r.context_mode = ContextMode::with_context;
    CHECK(row(scripted.produce(r), 0) == std::vector<double>{1, 2});
    r.context_mode = ContextMode::no_context;
    r.horizon_offset = 1;
    CHECK(row(scripted.produce(r), 1) == std::vector<double>{8, 9});
    r.num_samples = 5;
    CHECK_THROWS_AS(scripted.produce(r), Error);
    r.window.start_idx = 99;
    CHECK_THROWS_AS(scripted.produce(r), Error);

    testing::spit(path, "{\"key\": 3}\n");
    CHECK_THROWS_WITH(ScriptedForecaster::from_file(path), ContainsSubstring(":1:"));
}

TEST_CASE("direct prompt forecaster draws through the gateway") {
    auto backend = std::make_shared<MockBackend>();
    std::atomic<int> garbage_left{2};
    backend->set_responder([&](const ChatRequest& req) -> std::optional<std::string> {
        if (garbage_left-- > 0) return std::string("I cannot do that");
        const bool with_context = req.prompt.find("<context>") != std::string::npos;
        const auto marker = std::string("following timestamps: ");
        auto pos = req.prompt.find(marker) + marker.size();
        const auto end = req.prompt.find(".\n", pos);
        std::string list = req.prompt.substr(pos, end - pos);
        std::string reply = "<forecast>\n";
        std::size_t start = 0;
        while (start < list.size()) {
            auto comma = list.find(", ", start);
            if (comma == std::string::npos) comma = list.size();
            reply += "(" + list.substr(start, comma - start) + ", " + (with_context ? "1" : "2") + ")\n";
            start = comma + 2;
        }
        return reply + "</forecast>";
    });
    GatewayConfig cfg;
    cfg.max_parallel = 3;
    auto gateway = std::make_shared<Gateway>(cfg, backend);
    DirectPromptForecaster dp(gateway);

    auto w = testing::window({1, 2, 3}, {4, 5});
    w.context = "Demand doubles.";
    auto r = request_for(w, 2, 4);
    r.context_mode = ContextMode::with_context;
    const auto with = dp.produce(r);
    CHECK(with.num_samples() == 4);
    CHECK(with.values() == std::vector<double>(8, 1.0));
    r.context_mode = ContextMode::no_context;
    CHECK(dp.produce(r).values() == std::vector<double>(8, 2.0));

    garbage_left = 1000;
    CHECK_THROWS_AS(dp.produce(r), Error);
}

TEST_CASE("serialized forecaster forwards to its inner adapter") {
    SeasonalNaiveForecaster naive;
    SerializedForecaster wrapped(naive);
    CHECK(wrapped.name() == naive.name());
    auto w = testing::window({1, 2}, {0});
    CHECK(wrapped.produce(request_for(w, 1)) == naive.produce(request_for(w, 1)));
}

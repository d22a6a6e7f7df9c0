#include "cafforge/metrics.hpp"
#include "cafforge/random.hpp"

#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <random>

using namespace cafforge;
using Catch::Approx;

namespace {

std::vector<double> random_values(std::mt19937_64& gen, std::size_t n, double lo = -10.0, double hi = 10.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> out(n);
    for (auto& v : out) v = dist(gen);
    return out;
}

}  // namespace

TEST_CASE("crps_step examples") {
    const std::vector<double> at_target{3, 3, 3};
    CHECK(crps_step(at_target, 3.0) == 0.0);
    const std::vector<double> single{5};
    CHECK(crps_step(single, 2.0) == 3.0);
    const std::vector<double> pair{0, 2};
    CHECK(crps_step(pair, 0.0) == 0.5);
    const std::vector<double> none;
    CHECK_THROWS_AS(crps_step(none, 0.0), Error);
}

TEST_CASE("crps_horizon_mean examples") {
    const ProbabilisticForecast exact({{1.0, 2.0}, {1.0, 2.0}});
    const std::vector<double> target{1.0, 2.0};
    CHECK(crps_horizon_mean(exact, target) == 0.0);

    // Step 0: samples {0, 2} vs 0 -> 0.5.  Step 1: samples {3, 3} vs 1.5 -> 1.5.
    const ProbabilisticForecast mixed({{0.0, 3.0}, {2.0, 3.0}});
    const std::vector<double> y{0.0, 1.5};
    CHECK(crps_horizon_mean(mixed, y) == Approx(1.0).margin(1e-15));

    const ProbabilisticForecast one(std::vector<std::vector<double>>{{5.0}});
    const std::vector<double> two{2.0};
    CHECK(crps_horizon_mean(one, two) == 3.0);

    const std::vector<double> wrong_length{1.0};
    CHECK_THROWS_AS(crps_horizon_mean(exact, wrong_length), Error);
}

TEST_CASE("crps fast path agrees with the double-sum oracle") {
    std::mt19937_64 gen(2024);
    std::uniform_int_distribution<int> size(1, 16);
    for (int trial = 0; trial < 300; ++trial) {
        const auto n = static_cast<std::size_t>(size(gen));
        const auto samples = random_values(gen, n);
        const double y = random_values(gen, 1)[0];
        CHECK(crps_step(samples, y) == Approx(oracle::crps_double_sum(samples, y)).margin(1e-12));
    }
}

TEST_CASE("crps properties") {
    std::mt19937_64 gen(99);
    for (int trial = 0; trial < 500; ++trial) {
        auto samples = random_values(gen, 1 + trial % 16);
        const double y = random_values(gen, 1, -20, 20)[0];
        const double c = random_values(gen, 1, -100, 100)[0];
        const double base = crps_step(samples, y);
        CHECK(base >= 0.0);

        auto shifted = samples;
        for (auto& v : shifted) v += c;
        CHECK(crps_step(shifted, y + c) == Approx(base).margin(1e-12));

        std::shuffle(samples.begin(), samples.end(), gen);
        CHECK(crps_step(samples, y) == Approx(base).margin(1e-12));
    }
    const std::vector<double> constant(7, 1.25);
    CHECK(crps_step(constant, -0.5) == 1.75);
}

TEST_CASE("mean absolute scale") {
    CHECK(scale_mean_abs(std::vector<double>{2, -2}) == 2.0);
    CHECK(scale_mean_abs(std::vector<double>{0, 0, 0}) == 0.0);
    CHECK(scale_mean_abs(std::vector<double>{1, 2, 3}) == 2.0);
}

TEST_CASE("normalise and clip") {
    CHECK(normalize_and_clip(1.0, 0.0) == 5.0);
    CHECK(normalize_and_clip(0.0, 7.0) == 0.0);
    CHECK(normalize_and_clip(0.3, 1.0) == Approx(0.2999997).margin(1e-9));
    double previous = 0.0;
    for (double raw = 0.0; raw < 20.0; raw += 0.37) {
        const double v = normalize_and_clip(raw, 1.3);
        CHECK((v >= 0.0 && v <= 5.0));
        CHECK(v >= previous);
        previous = v;
    }
}

TEST_CASE("aggregate mean and standard error") {
    CHECK(aggregate_mean(std::vector<double>{1, 1, 1}).mean == 1.0);
    CHECK(aggregate_mean(std::vector<double>{1, 1, 1}).standard_error == 0.0);
    CHECK(aggregate_mean(std::vector<double>{0, 1}).mean == 0.5);
    const auto a = aggregate_mean(std::vector<double>{0.2, 0.4, 0.9});
    CHECK(a.mean == Approx(0.5).margin(1e-15));
    // sample sd = sqrt(((-.3)^2 + (-.1)^2 + .4^2) / 2) = sqrt(0.13)
    CHECK(a.standard_error == Approx(std::sqrt(0.13) / std::sqrt(3.0)).margin(1e-12));
    CHECK(aggregate_mean(std::vector<double>{4.0}).standard_error == 0.0);
    CHECK_THROWS_AS(aggregate_mean(std::vector<double>{}), Error);
}

TEST_CASE("win rate counts ties against the model") {
    CHECK(win_rate(std::vector<double>{0.1, 0.2}, std::vector<double>{0.2, 0.2}) == 0.5);
    CHECK(win_rate(std::vector<double>{0.1, 0.2}, std::vector<double>{0.3, 0.4}) == 1.0);
    CHECK(win_rate(std::vector<double>{0.3, 0.2}, std::vector<double>{0.3, 0.2}) == 0.0);
    CHECK_THROWS_AS(win_rate(std::vector<double>{0.1}, std::vector<double>{0.1, 0.2}), Error);

    std::mt19937_64 gen(5);
    std::uniform_int_distribution<int> coarse(0, 3);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> a(10), b(10);
        bool tie = false;
        for (std::size_t i = 0; i < 10; ++i) {
            a[i] = coarse(gen);
            b[i] = coarse(gen);
            tie |= a[i] == b[i];
        }
        const double sum = win_rate(a, b) + win_rate(b, a);
        CHECK(sum <= 1.0);
        CHECK((sum == 1.0) == !tie);
    }
}

TEST_CASE("point median") {
    const ProbabilisticForecast single({{1.0, 7.0, -2.0}});
    CHECK(point_median(single) == std::vector<double>{1.0, 7.0, -2.0});
    const ProbabilisticForecast even({{1.0}, {3.0}});
    CHECK(point_median(even) == std::vector<double>{2.0});
    const ProbabilisticForecast odd(std::vector<std::vector<double>>{{3.0}, {1.0}, {2.0}});
    CHECK(point_median(odd) == std::vector<double>{2.0});
}

TEST_CASE("MASE fixtures") {
    CHECK(mase_scale(std::vector<double>{1, 2, 1, 2}, 2) == 0.0);
    CHECK(mase_scale(std::vector<double>{1, 2, 3, 4}, 1) == 1.0);
    CHECK(mase_scale(std::vector<double>{1, 4}, 7) == 3.0);
    CHECK(mase(std::vector<double>{2, 2}, std::vector<double>{1, 3}, std::vector<double>{1, 2, 3, 4}, 1) == 1.0);
    CHECK(mase(std::vector<double>{5, 5}, std::vector<double>{5, 5}, std::vector<double>{3, 3, 3}, 1) == 0.0);
    CHECK(mase(std::vector<double>{5, 5}, std::vector<double>{5, 6}, std::vector<double>{3, 3, 3}, 1) == kInfiniteMase);
}

TEST_CASE("MASE is scale-equivariant") {
    std::mt19937_64 gen(11);
    for (int trial = 0; trial < 100; ++trial) {
        const auto history = random_values(gen, 30);
        const auto forecast = random_values(gen, 6);
        const auto target = random_values(gen, 6);
        const double lambda = random_values(gen, 1, 0.01, 100.0)[0];
        auto scaled = [lambda](std::vector<double> v) {
            for (auto& x : v) x *= lambda;
            return v;
        };
        const double base = mase(forecast, target, history, 7);
        CHECK(mase(scaled(forecast), scaled(target), scaled(history), 7) == Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("normalised scores") {
    const ProbabilisticForecast f({{2.0, 4.0}, {2.0, 4.0}});
    const std::vector<double> y{1.0, 3.0};
    CHECK(ncrps(f, y) == Approx(1.0 / (2.0 + 1e-6)).margin(1e-15));
    CHECK(nmae(f, y) == Approx(1.0 / (2.0 + 1e-6)).margin(1e-15));
    const std::vector<double> zeros{0.0, 0.0};
    CHECK(ncrps(f, zeros) == 5.0);
}

TEST_CASE("forecast shape validation") {
    CHECK_THROWS_AS(ProbabilisticForecast(std::vector<std::vector<double>>{{1.0}, {1.0, 2.0}}), Error);
    CHECK_THROWS_AS(ProbabilisticForecast(0, 1, {}), Error);
    CHECK_THROWS_AS(ProbabilisticForecast(1, 1, {std::numeric_limits<double>::infinity()}), Error);
    const ProbabilisticForecast f(2, 3, {1, 2, 3, 4, 5, 6});
    CHECK(f.at(1, 0) == 4.0);
    CHECK(f.column(2) == std::vector<double>{3.0, 6.0});
}

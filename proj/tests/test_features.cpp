#include "support.hpp"

#include "deepdeff/error.hpp"
#include "deepdeff/features.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>

using namespace deepdeff;
using testing::make_series;

namespace {

// Two-pass population statistics, written independently of the library.
WindowStats brute_stats(const std::vector<double>& v)
{
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double sq = 0.0;
    for (const double x : v) {
        sq += (x - mean) * (x - mean);
    }
    return {mean, std::sqrt(sq / static_cast<double>(v.size()))};
}

double noisy_load(std::size_t i)
{
    // Deterministic, irregular, strictly positive.
    return 2.0 + std::sin(0.37 * static_cast<double>(i)) + 0.1 * static_cast<double>(i % 7);
}

double block_sum(std::span<const double> row, std::size_t first, std::size_t count)
{
    return std::accumulate(row.begin() + static_cast<long>(first),
                           row.begin() + static_cast<long>(first + count), 0.0);
}

} // namespace

TEST_CASE("one_hot")
{
    const auto a = one_hot(0, 48);
    CHECK(a.size() == 48);
    CHECK(a[0] == 1.0);
    CHECK(std::accumulate(a.begin(), a.end(), 0.0) == 1.0);
    CHECK(one_hot(6, 7) == std::vector<double>{0, 0, 0, 0, 0, 0, 1});
    CHECK_THROWS_AS(one_hot(7, 7), EncodingError);
}

TEST_CASE("window_stats")
{
    const std::vector<double> constant{2, 2, 2};
    CHECK(window_stats(constant, 2, 3).mean == 2.0);
    CHECK(window_stats(constant, 2, 3).std == 0.0);

    const std::vector<double> ramp{1, 2, 3};
    const auto s = window_stats(ramp, 2, 3);
    CHECK(s.mean == doctest::Approx(2.0));
    CHECK(std::round(s.std * 1e5) / 1e5 == doctest::Approx(0.81650).epsilon(1e-12));
    CHECK(s.std == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-15));

    const auto single = window_stats(ramp, 1, 1);
    CHECK(single.mean == 2.0);
    CHECK(single.std == 0.0);

    CHECK_THROWS_AS(window_stats(ramp, 1, 3), HistoryError);
    CHECK_THROWS_AS(window_stats(ramp, 3, 1), HistoryError);
    const std::vector<double> gap{1, std::numeric_limits<double>::quiet_NaN(), 3};
    CHECK_THROWS_AS(window_stats(gap, 2, 3), HistoryError);
}

TEST_CASE("slot_history_stats")
{
    constexpr std::size_t S = 48;
    SUBCASE("periodic profile")
    {
        const auto s = make_series(5 * S, [](std::size_t i) { return 1.0 + (i % S) * 0.25; });
        const auto stats = slot_history_stats(s, 4 * S + 10, 3);
        CHECK(stats.mean == doctest::Approx(1.0 + 10 * 0.25));
        CHECK(stats.std == doctest::Approx(0.0));
    }
    SUBCASE("prior day values 1, 2, 3")
    {
        const auto s = make_series(4 * S, [](std::size_t i) {
            return i % S == 5 ? static_cast<double>(i / S + 1) : 9.0;
        });
        const auto stats = slot_history_stats(s, 3 * S + 5, 3);
        CHECK(stats.mean == doctest::Approx(2.0));
        CHECK(std::round(stats.std * 1e5) / 1e5 == doctest::Approx(0.81650).epsilon(1e-12));
    }
    SUBCASE("missing reading or short history")
    {
        auto s = make_series(4 * S, [](std::size_t) { return 1.0; });
        CHECK_THROWS_AS(slot_history_stats(s, 2 * S + 5, 3), HistoryError);
        s.records[S + 5].load = std::numeric_limits<double>::quiet_NaN();
        CHECK_THROWS_AS(slot_history_stats(s, 3 * S + 5, 3), HistoryError);
    }
}

TEST_CASE("feature widths")
{
    CHECK(basic_feature_count(48) == 57);
    CHECK(basic_feature_count(24) == 33);
}

TEST_CASE("minimum series gives exactly one sample")
{
    constexpr std::size_t S = 48;
    for (const std::size_t K : {1u, 2u, 6u, 12u}) {
        const std::size_t n = K + K * S + 1;
        const auto s = make_series(n, noisy_load);
        CHECK(build_samples(s, K).size() == 1);
        CHECK_THROWS_AS(build_samples(make_series(n - 1, noisy_load), K), InputError);
    }
}

TEST_CASE("sample count matches a counting oracle")
{
    constexpr std::size_t S = 24;
    for (const std::size_t K : {1u, 3u, 5u}) {
        const std::size_t n = 6 * S + 17;
        const auto s = make_series(n, noisy_load, 60);
        // Every position from the first with K days plus K steps of history.
        std::size_t expected = 0;
        for (std::size_t t = 0; t < n; ++t) {
            if (t >= K * S + K) {
                ++expected;
            }
        }
        CHECK(build_samples(s, K).size() == expected);
    }
}

TEST_CASE("samples on a 10-day series match a brute-force oracle")
{
    constexpr std::size_t S = 48;
    const std::size_t K = 3;
    const auto s = make_series(10 * S, noisy_load);
    const auto loads = s.loads();
    const auto samples = build_samples(s, K);
    REQUIRE(!samples.empty());
    for (const auto& sample : samples) {
        const std::size_t t = sample.target_index;
        CHECK(sample.target == loads[t]);
        CHECK(sample.target_slot == t % S);
        CHECK(sample.target_time == s.records[t].timestamp);
        REQUIRE(sample.basic.rows() == K);
        REQUIRE(sample.basic.cols() == 57);
        REQUIRE(sample.derived.rows() == K);
        REQUIRE(sample.derived.cols() == 4);

        std::vector<double> slot_values;
        for (std::size_t d = 1; d <= K; ++d) {
            slot_values.push_back(loads[t - d * S]);
        }
        const auto slot = brute_stats(slot_values);

        for (std::size_t row = 0; row < K; ++row) {
            const std::size_t idx = t - K + row;
            const auto basic = sample.basic.row(row);
            CHECK(basic[0] == loads[idx]);
            CHECK(block_sum(basic, 1, S) == 1.0);
            CHECK(basic[1 + idx % S] == 1.0);
            CHECK(block_sum(basic, 1 + S, 7) == 1.0);
            // 2013-01-01 was a Tuesday.
            const std::size_t weekday = (1 + idx / S) % 7;
            CHECK(basic[1 + S + weekday] == 1.0);
            CHECK(basic[1 + S + 7] == (weekday >= 5 ? 1.0 : 0.0));

            const std::vector<double> window(loads.begin() + static_cast<long>(idx + 1 - K),
                                             loads.begin() + static_cast<long>(idx + 1));
            const auto win = brute_stats(window);
            const auto derived = sample.derived.row(row);
            CHECK(derived[0] == doctest::Approx(win.mean).epsilon(1e-13));
            CHECK(derived[1] == doctest::Approx(win.std).epsilon(1e-11));
            CHECK(derived[2] == doctest::Approx(slot.mean).epsilon(1e-13));
            CHECK(derived[3] == doctest::Approx(slot.std).epsilon(1e-11));
        }
    }
}

TEST_CASE("single-vector layout repeats the last row's statistics")
{
    const std::size_t K = 4;
    const auto s = make_series(6 * 48, noisy_load);
    const auto per_row = build_samples(s, K);
    const auto single = build_samples(s, K, {DerivedLayout::SingleVector});
    REQUIRE(per_row.size() == single.size());
    for (std::size_t i = 0; i < single.size(); ++i) {
        CHECK(single[i].basic == per_row[i].basic);
        for (std::size_t row = 0; row < K; ++row) {
            for (std::size_t c = 0; c < 4; ++c) {
                CHECK(single[i].derived(row, c) == per_row[i].derived(K - 1, c));
            }
        }
    }
}

TEST_CASE("shifting the loads shifts the means and keeps the stds")
{
    const std::size_t K = 3;
    const double c = 5.25;
    const auto a = build_samples(make_series(5 * 48, noisy_load), K);
    const auto b = build_samples(make_series(5 * 48, [&](std::size_t i) { return noisy_load(i) + c; }), K);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t row = 0; row < K; ++row) {
            CHECK(b[i].derived(row, 0) == doctest::Approx(a[i].derived(row, 0) + c).epsilon(1e-13));
            CHECK(b[i].derived(row, 1) == doctest::Approx(a[i].derived(row, 1)).epsilon(1e-9));
            CHECK(b[i].derived(row, 2) == doctest::Approx(a[i].derived(row, 2) + c).epsilon(1e-13));
            CHECK(b[i].derived(row, 3) == doctest::Approx(a[i].derived(row, 3)).epsilon(1e-9));
        }
    }
}

TEST_CASE("features never depend on the target or later records")
{
    const std::size_t K = 2;
    const std::size_t n = 5 * 48;
    const auto base = make_series(n, noisy_load);
    const auto samples = build_samples(base, K);
    Rng rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        const auto& probe = samples[rng.below(samples.size())];
        auto altered = base;
        for (std::size_t i = probe.target_index; i < n; ++i) {
            altered.records[i].load = 100.0 + rng.uniform();
        }
        const std::vector<std::size_t> target{probe.target_index};
        const auto rebuilt = build_samples(altered, K, {}, std::span<const std::size_t>(target));
        REQUIRE(rebuilt.size() == 1);
        CHECK(rebuilt[0].basic == probe.basic);
        CHECK(rebuilt[0].derived == probe.derived);
        CHECK(rebuilt[0].target != probe.target);
    }
}

TEST_CASE("positions touching a missing reading are skipped")
{
    const std::size_t K = 2;
    auto s = make_series(5 * 48, noisy_load);
    const auto full = build_samples(s, K).size();
    s.records[4 * 48 + 10].load = std::numeric_limits<double>::quiet_NaN();
    const auto samples = build_samples(s, K);
    CHECK(samples.size() < full);
    for (const auto& sample : samples) {
        for (const double v : sample.basic.values()) {
            CHECK(!std::isnan(v));
        }
        for (const double v : sample.derived.values()) {
            CHECK(!std::isnan(v));
        }
    }
}

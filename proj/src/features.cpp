#include "deepdeff/features.hpp"

#include "deepdeff/data.hpp"
#include "deepdeff/error.hpp"

#include <cmath>

namespace deepdeff {

std::vector<double> one_hot(std::size_t index, std::size_t size)
{
    if (index >= size) {
        throw EncodingError("one-hot index " + std::to_string(index) + " out of range for size " +
                            std::to_string(size));
    }
    std::vector<double> out(size, 0.0);
    out[index] = 1.0;
    return out;
}

namespace {

template <typename Fetch>
std::optional<WindowStats> population_stats(std::size_t n, Fetch fetch)
{
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = fetch(i);
        if (std::isnan(v)) {
            return std::nullopt;
        }
        sum += v;
    }
    const double mean = sum / static_cast<double>(n);
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = fetch(i) - mean;
        sq += d * d;
    }
    return WindowStats{mean, std::sqrt(sq / static_cast<double>(n))};
}

std::optional<WindowStats> try_window_stats(std::span<const double> values, std::size_t end_index,
                                            std::size_t K)
{
    if (K == 0 || end_index >= values.size() || end_index + 1 < K) {
        return std::nullopt;
    }
    const std::size_t first = end_index + 1 - K;
    return population_stats(K, [&](std::size_t i) { return values[first + i]; });
}

std::optional<WindowStats> try_slot_stats(std::span<const double> values, std::size_t slots_per_day,
                                          std::size_t target_index, std::size_t K)
{
    if (K == 0 || target_index >= values.size() || target_index < K * slots_per_day) {
        return std::nullopt;
    }
    return population_stats(
        K, [&](std::size_t d) { return values[target_index - (d + 1) * slots_per_day]; });
}

} // namespace

WindowStats window_stats(std::span<const double> values, std::size_t end_index, std::size_t K)
{
    if (K == 0) {
        throw HistoryError("window_stats: window length must be positive");
    }
    if (end_index >= values.size()) {
        throw HistoryError("window_stats: end index " + std::to_string(end_index) +
                           " beyond series of length " + std::to_string(values.size()));
    }
    if (end_index + 1 < K) {
        throw HistoryError("window_stats: " + std::to_string(K) + "-step window ending at " +
                           std::to_string(end_index) + " reaches before the series start");
    }
    auto stats = try_window_stats(values, end_index, K);
    if (!stats) {
        throw HistoryError("window_stats: missing reading inside the window ending at " +
                           std::to_string(end_index));
    }
    return *stats;
}

WindowStats slot_history_stats(const TimeSeries& series, std::size_t target_index, std::size_t K)
{
    validate_uniform(series);
    const std::size_t S = series.slots_per_day();
    if (K == 0) {
        throw HistoryError("slot_history_stats: day count must be positive");
    }
    if (target_index >= series.size()) {
        throw HistoryError("slot_history_stats: target index " + std::to_string(target_index) +
                           " beyond series of length " + std::to_string(series.size()));
    }
    if (target_index < K * S) {
        throw HistoryError("slot_history_stats: fewer than " + std::to_string(K) +
                           " days precede the target at " +
                           format_iso8601(series.records[target_index].timestamp));
    }
    const auto loads = series.loads();
    auto stats = try_slot_stats(loads, S, target_index, K);
    if (!stats) {
        throw HistoryError("slot_history_stats: missing reading at the target slot within the " +
                           std::to_string(K) + " days before " +
                           format_iso8601(series.records[target_index].timestamp));
    }
    return *stats;
}

std::size_t warmup_length(std::size_t K, std::size_t slots_per_day) noexcept
{
    return K * slots_per_day + K;
}

std::optional<Sample> try_build_sample(const TimeSeries& series, std::span<const double> loads,
                                       std::size_t target_index, std::size_t K,
                                       const FeatureOptions& options)
{
    const std::size_t S = series.slots_per_day();
    if (target_index < warmup_length(K, S) || target_index >= series.size()) {
        return std::nullopt;
    }
    const auto& target = series.records[target_index];
    if (target.missing()) {
        return std::nullopt;
    }
    const auto slot_stats = try_slot_stats(loads, S, target_index, K);
    if (!slot_stats) {
        return std::nullopt;
    }

    const std::size_t f_basic = basic_feature_count(S);
    Sample sample{Matrix(K, f_basic), Matrix(K, kDerivedFeatureCount), target.load, target.slot,
                  target_index, target.timestamp};

    std::optional<WindowStats> last_window;
    if (options.layout == DerivedLayout::SingleVector) {
        last_window = try_window_stats(loads, target_index - 1, K);
        if (!last_window) {
            return std::nullopt;
        }
    }

    for (std::size_t row = 0; row < K; ++row) {
        const std::size_t index = target_index - K + row;
        const auto& rec = series.records[index];
        if (rec.missing()) {
            return std::nullopt;
        }
        auto basic = sample.basic.row(row);
        basic[0] = rec.load;
        basic[1 + rec.slot] = 1.0;
        basic[1 + S + rec.weekday] = 1.0;
        basic[1 + S + kWeekdayCount] = static_cast<double>(rec.holiday);

        const auto window = options.layout == DerivedLayout::PerRow
                                ? try_window_stats(loads, index, K)
                                : last_window;
        if (!window) {
            return std::nullopt;
        }
        auto derived = sample.derived.row(row);
        derived[0] = window->mean;
        derived[1] = window->std;
        derived[2] = slot_stats->mean;
        derived[3] = slot_stats->std;
    }
    return sample;
}

std::vector<Sample> build_samples(const TimeSeries& series, std::size_t K,
                                  const FeatureOptions& options,
                                  std::optional<std::span<const std::size_t>> targets)
{
    if (K == 0) {
        throw InputError("build_samples: time-step count must be positive");
    }
    validate_uniform(series);
    const std::size_t S = series.slots_per_day();
    const std::size_t warmup = warmup_length(K, S);
    if (series.size() <= warmup) {
        throw InputError("build_samples: series of " + std::to_string(series.size()) +
                         " records is shorter than the " + std::to_string(warmup + 1) +
                         " needed for one sample at K=" + std::to_string(K));
    }

    const TimeSeries annotated = series.calendar_annotated ? TimeSeries{} : annotate_calendar(series);
    const TimeSeries& source = series.calendar_annotated ? series : annotated;
    const auto loads = source.loads();

    std::vector<std::size_t> positions;
    if (targets) {
        positions.assign(targets->begin(), targets->end());
    } else {
        positions.reserve(source.size() - warmup);
        for (std::size_t i = warmup; i < source.size(); ++i) {
            positions.push_back(i);
        }
    }

    std::vector<std::optional<Sample>> built(positions.size());
    const auto n = static_cast<long long>(positions.size());
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < n; ++i) {
        built[static_cast<std::size_t>(i)] =
            try_build_sample(source, loads, positions[static_cast<std::size_t>(i)], K, options);
    }

    std::vector<Sample> samples;
    samples.reserve(built.size());
    for (auto& s : built) {
        if (s) {
            samples.push_back(std::move(*s));
        }
    }
    return samples;
}

} // namespace deepdeff

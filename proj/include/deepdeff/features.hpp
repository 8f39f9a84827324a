#pragma once

#include "deepdeff/numerics.hpp"
#include "deepdeff/series.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace deepdeff {

inline constexpr std::size_t kDerivedFeatureCount = 4;
inline constexpr std::size_t kWeekdayCount = 7;

/// Load, one-hot slot, one-hot weekday, holiday flag.
constexpr std::size_t basic_feature_count(std::size_t slots_per_day) noexcept
{
    return 1 + slots_per_day + kWeekdayCount + 1;
}

struct WindowStats {
    double mean = 0.0;
    double std = 0.0; // population standard deviation
};

/// One training instance. Row i of both sequences describes the record
/// K - i steps before the target.
struct Sample {
    Matrix basic;   // K x basic_feature_count(S)
    Matrix derived; // K x 4: window mean, window std, slot mean, slot std
    double target = 0.0;
    std::size_t target_slot = 0;
    std::size_t target_index = 0; // position in the source series
    Timestamp target_time = 0;
};

/// How the four derived statistics fill the K rows of a sample.
enum class DerivedLayout {
    /// Window stats recomputed for the K steps ending at each row; slot
    /// stats (tied to the predicted slot) repeated on every row.
    PerRow,
    /// One 4-vector, computed at the last window row, repeated K times.
    SingleVector,
};

struct FeatureOptions {
    DerivedLayout layout = DerivedLayout::PerRow;
};

std::vector<double> one_hot(std::size_t index, std::size_t size);

/// Mean and population std of values[end_index - K + 1 .. end_index].
/// Throws HistoryError if the window reaches before the start or contains
/// a missing reading.
WindowStats window_stats(std::span<const double> values, std::size_t end_index, std::size_t K);

/// Mean and population std of the readings at the target's slot on each of
/// the K days before the target's day.
WindowStats slot_history_stats(const TimeSeries& series, std::size_t target_index, std::size_t K);

/// Records before the first predictable target: K days of slot history
/// ahead of the K-step input window.
std::size_t warmup_length(std::size_t K, std::size_t slots_per_day) noexcept;

/// Builds one sample per predictable target position. When targets is
/// given only those series indices are considered; the windows may still
/// reach back before them for context. Positions whose window, statistics
/// or target touch a missing reading are skipped.
std::vector<Sample> build_samples(const TimeSeries& series, std::size_t K,
                                  const FeatureOptions& options = {},
                                  std::optional<std::span<const std::size_t>> targets = std::nullopt);

/// Builds the sample for one target position, or nullopt if its history is
/// incomplete.
std::optional<Sample> try_build_sample(const TimeSeries& series, std::span<const double> loads,
                                       std::size_t target_index, std::size_t K,
                                       const FeatureOptions& options);

} // namespace deepdeff

#pragma once

#include "deepdeff/numerics.hpp"
#include "deepdeff/series.hpp"

#include <array>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace deepdeff {

/// Column mapping for a delimited text file with a header row.
struct CsvSchema {
    std::string timestamp_column;
    std::string time_column;   // optional second column appended to the timestamp text
    std::string load_column;
    std::string entity_column; // optional; rows are grouped by its value
    std::string timestamp_format = "%Y-%m-%d %H:%M:%S";
    char delimiter = ',';
    LoadUnit unit = LoadUnit::Kilowatt;
    int interval_minutes = 30;
    /// Added to every parsed timestamp. Hour-ending data uses -60 so hour
    /// 1..24 maps onto slots 0..23.
    int timestamp_shift_minutes = 0;
};

/// Reads one series. When the schema names an entity column the file must
/// hold exactly one entity, otherwise use load_csv_entities.
///
/// Rows are sorted by time, duplicate timestamps are averaged, and missing
/// grid points become NaN records (see find_gaps). Unparseable rows raise
/// InputError naming the line.
TimeSeries load_csv(const std::filesystem::path& path, const CsvSchema& schema);

/// Reads every entity of a long-format file, keyed by entity id.
std::map<std::string, TimeSeries> load_csv_entities(const std::filesystem::path& path,
                                                    const CsvSchema& schema);

/// Arithmetic mean over clock-aligned buckets of target_interval_minutes.
/// Buckets with no readings are missing in the output.
TimeSeries resample_average(const TimeSeries& series, int target_interval_minutes);

TimeSeries apply_offset(const TimeSeries& series, double offset);

/// Fills slot, weekday and holiday (Saturday/Sunday) on every record.
TimeSeries annotate_calendar(const TimeSeries& series);

struct DateRange {
    std::chrono::year_month_day first;
    std::chrono::year_month_day last; // inclusive
};

enum class SplitMode { DateRanges, MonthWise };

struct SplitSpec {
    SplitMode mode = SplitMode::DateRanges;
    std::array<DateRange, 3> ranges{}; // train, validation, test
    unsigned train_last_day = 21;      // month-wise boundaries
    unsigned validation_last_day = 26;

    static SplitSpec date_ranges(DateRange train, DateRange validation, DateRange test);
    static SplitSpec month_wise(unsigned train_last_day = 21, unsigned validation_last_day = 26);
};

/// Record indices (into the split series) of each partition. Month-wise
/// partitions are not contiguous, so indices are kept rather than copies;
/// features for a partition are built from the whole series so windows
/// can reach back into earlier records.
struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
    std::vector<std::size_t> test;
};

SplitIndices split(const TimeSeries& series, const SplitSpec& spec);

/// Copies the records at indices into a new series (not necessarily uniform).
TimeSeries select(const TimeSeries& series, const std::vector<std::size_t>& indices);

// Canonical cache: timestamp (ISO-8601), load, slot, weekday, holiday.
void write_canonical_csv(const TimeSeries& series, const std::filesystem::path& path);
TimeSeries read_canonical_csv(const std::filesystem::path& path, int interval_minutes);

/// Everything needed to turn one dataset's raw files into split series.
struct DatasetPreset {
    std::string name;
    CsvSchema schema;
    std::optional<int> resample_minutes; // for 1-min sources
    double offset = 0.0;                 // added after resampling
    SplitSpec split;
};

/// Presets: sgsc, ampds, rte, ercot, precon, canonical.
DatasetPreset dataset_preset(const std::string& name);
std::vector<std::string> dataset_preset_names();

/// Resample, offset and annotate according to the preset.
TimeSeries preprocess(const TimeSeries& raw, const DatasetPreset& preset);

/// Synthetic load: daily sinusoid, weekday/weekend modulation, Gaussian
/// noise. Strictly positive for the default parameters.
struct SyntheticSpec {
    std::chrono::year_month_day start{std::chrono::year{2013}, std::chrono::month{1},
                                      std::chrono::day{1}};
    std::size_t days = 60;
    int interval_minutes = 30;
    double base = 2.0;
    double daily_amplitude = 0.8;
    double weekend_factor = 1.25;
    double weekday_ripple = 0.05; // per-weekday scale step
    double noise_std = 0.1;
    double floor = 0.05;
};

TimeSeries synthetic_series(const SyntheticSpec& spec, Rng& rng, std::string source_id = "synthetic");

} // namespace deepdeff

#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace deepdeff {

/// Seconds since 1970-01-01 00:00 in the dataset's own civil time. No time
/// zone or DST conversion is applied anywhere: every day has exactly
/// 86400 / interval slots.
using Timestamp = std::int64_t;

inline constexpr Timestamp kSecondsPerDay = 86400;

enum class LoadUnit { Kilowatt, Ampere, Megawatt };

std::string_view to_string(LoadUnit unit) noexcept;
LoadUnit parse_load_unit(std::string_view text);

/// One reading. Missing readings carry a NaN load.
struct RawRecord {
    Timestamp timestamp = 0;
    double load = 0.0;
    std::size_t slot = 0;    // intra-day interval index
    std::size_t weekday = 0; // 0 = Monday ... 6 = Sunday
    int holiday = 0;         // 1 on Saturday and Sunday

    bool missing() const noexcept;
};

/// Uniformly spaced, strictly increasing readings. Gaps in the source data
/// are kept as records with NaN loads so indices stay on the time grid.
struct TimeSeries {
    int interval_minutes = 30;
    LoadUnit unit = LoadUnit::Kilowatt;
    std::string source_id;
    std::vector<RawRecord> records;
    bool calendar_annotated = false;

    std::size_t size() const noexcept { return records.size(); }
    bool empty() const noexcept { return records.empty(); }
    Timestamp interval_seconds() const noexcept { return Timestamp{interval_minutes} * 60; }
    std::size_t slots_per_day() const noexcept;
    std::vector<double> loads() const;
    std::size_t missing_count() const noexcept;
};

struct Gap {
    Timestamp first_missing = 0;
    std::size_t length = 0; // consecutive missing readings
};

std::vector<Gap> find_gaps(const TimeSeries& series);

/// Throws InputError unless timestamps are strictly increasing with the
/// declared spacing.
void validate_uniform(const TimeSeries& series);

// Calendar helpers over civil timestamps.

std::chrono::year_month_day civil_date(Timestamp ts);
Timestamp to_timestamp(std::chrono::year_month_day date, int hour = 0, int minute = 0,
                       int second = 0);
std::size_t weekday_index(Timestamp ts); // Monday = 0
std::size_t slot_of(Timestamp ts, int interval_minutes);

/// "YYYY-MM-DDTHH:MM:SS".
std::string format_iso8601(Timestamp ts);
/// Accepts "YYYY-MM-DD", "YYYY-MM-DDTHH:MM[:SS]" and a space separator.
Timestamp parse_iso8601(std::string_view text);
std::chrono::year_month_day parse_date(std::string_view text);
std::string format_date(std::chrono::year_month_day date);

/// Parses text with a strptime-style format (std::get_time). The format
/// "unix" reads integer epoch seconds. An hour field of 24 rolls into the
/// next day, which hour-ending market data uses.
Timestamp parse_timestamp(std::string_view text, std::string_view format);

} // namespace deepdeff

#include "deepdeff/series.hpp"

#include "deepdeff/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <iomanip>
#include <sstream>

namespace deepdeff {

std::string_view to_string(LoadUnit unit) noexcept
{
    switch (unit) {
    case LoadUnit::Kilowatt:
        return "kW";
    case LoadUnit::Ampere:
        return "A";
    case LoadUnit::Megawatt:
        return "MW";
    }
    return "kW";
}

LoadUnit parse_load_unit(std::string_view text)
{
    if (text == "kW" || text == "kw" || text == "KW") {
        return LoadUnit::Kilowatt;
    }
    if (text == "A" || text == "a") {
        return LoadUnit::Ampere;
    }
    if (text == "MW" || text == "mw") {
        return LoadUnit::Megawatt;
    }
    throw ConfigError("unknown load unit '" + std::string(text) + "'");
}

bool RawRecord::missing() const noexcept
{
    return std::isnan(load);
}

std::size_t TimeSeries::slots_per_day() const noexcept
{
    return static_cast<std::size_t>(kSecondsPerDay / interval_seconds());
}

std::vector<double> TimeSeries::loads() const
{
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        out.push_back(r.load);
    }
    return out;
}

std::size_t TimeSeries::missing_count() const noexcept
{
    return static_cast<std::size_t>(
        std::count_if(records.begin(), records.end(), [](const RawRecord& r) { return r.missing(); }));
}

std::vector<Gap> find_gaps(const TimeSeries& series)
{
    std::vector<Gap> gaps;
    for (const auto& r : series.records) {
        if (!r.missing()) {
            continue;
        }
        if (!gaps.empty() &&
            gaps.back().first_missing +
                    static_cast<Timestamp>(gaps.back().length) * series.interval_seconds() ==
                r.timestamp) {
            ++gaps.back().length;
        } else {
            gaps.push_back({r.timestamp, 1});
        }
    }
    return gaps;
}

void validate_uniform(const TimeSeries& series)
{
    if (series.interval_minutes <= 0 || kSecondsPerDay % series.interval_seconds() != 0) {
        throw InputError("interval of " + std::to_string(series.interval_minutes) +
                         " minutes does not divide a day");
    }
    for (std::size_t i = 1; i < series.records.size(); ++i) {
        if (series.records[i].timestamp - series.records[i - 1].timestamp !=
            series.interval_seconds()) {
            throw InputError("series is not uniformly spaced at " +
                             format_iso8601(series.records[i].timestamp));
        }
    }
}

std::chrono::year_month_day civil_date(Timestamp ts)
{
    using namespace std::chrono;
    const auto day_count = static_cast<int>((ts >= 0 ? ts : ts - (kSecondsPerDay - 1)) / kSecondsPerDay);
    return year_month_day{sys_days{days{day_count}}};
}

Timestamp to_timestamp(std::chrono::year_month_day date, int hour, int minute, int second)
{
    using namespace std::chrono;
    const auto days_since_epoch = sys_days{date}.time_since_epoch().count();
    return Timestamp{days_since_epoch} * kSecondsPerDay + hour * 3600 + minute * 60 + second;
}

namespace {
Timestamp seconds_of_day(Timestamp ts)
{
    const Timestamp r = ts % kSecondsPerDay;
    return r < 0 ? r + kSecondsPerDay : r;
}
} // namespace

std::size_t weekday_index(Timestamp ts)
{
    using namespace std::chrono;
    const weekday wd{sys_days{civil_date(ts)}};
    return static_cast<std::size_t>(wd.iso_encoding() - 1);
}

std::size_t slot_of(Timestamp ts, int interval_minutes)
{
    return static_cast<std::size_t>(seconds_of_day(ts) / (Timestamp{interval_minutes} * 60));
}

std::string format_iso8601(Timestamp ts)
{
    const auto date = civil_date(ts);
    const Timestamp sod = seconds_of_day(ts);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(date.year()),
                  static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()),
                  static_cast<int>(sod / 3600), static_cast<int>(sod % 3600 / 60),
                  static_cast<int>(sod % 60));
    return buf;
}

std::string format_date(std::chrono::year_month_day date)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()),
                  static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
    return buf;
}

namespace {

int read_int(std::string_view text, std::size_t pos, std::size_t len, std::string_view whole)
{
    if (pos + len > text.size()) {
        throw InputError("malformed timestamp '" + std::string(whole) + "'");
    }
    int value = 0;
    const auto* first = text.data() + pos;
    const auto [ptr, ec] = std::from_chars(first, first + len, value);
    if (ec != std::errc{} || ptr != first + len) {
        throw InputError("malformed timestamp '" + std::string(whole) + "'");
    }
    return value;
}

std::chrono::year_month_day checked_date(int y, int m, int d, std::string_view whole)
{
    using namespace std::chrono;
    const year_month_day date{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
    if (!date.ok()) {
        throw InputError("invalid calendar date in '" + std::string(whole) + "'");
    }
    return date;
}

} // namespace

std::chrono::year_month_day parse_date(std::string_view text)
{
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
        throw InputError("expected a YYYY-MM-DD date, got '" + std::string(text) + "'");
    }
    return checked_date(read_int(text, 0, 4, text), read_int(text, 5, 2, text),
                        read_int(text, 8, 2, text), text);
}

Timestamp parse_iso8601(std::string_view text)
{
    const auto date = parse_date(text.substr(0, std::min<std::size_t>(10, text.size())));
    if (text.size() == 10) {
        return to_timestamp(date);
    }
    if (text.size() < 16 || (text[10] != 'T' && text[10] != ' ') || text[13] != ':') {
        throw InputError("malformed ISO-8601 timestamp '" + std::string(text) + "'");
    }
    const int hour = read_int(text, 11, 2, text);
    const int minute = read_int(text, 14, 2, text);
    int second = 0;
    if (text.size() >= 19 && text[16] == ':') {
        second = read_int(text, 17, 2, text);
    }
    if (hour > 23 || minute > 59 || second > 59) {
        throw InputError("time of day out of range in '" + std::string(text) + "'");
    }
    return to_timestamp(date, hour, minute, second);
}

Timestamp parse_timestamp(std::string_view text, std::string_view format)
{
    // Trim surrounding whitespace and quotes.
    while (!text.empty() && (text.front() == ' ' || text.front() == '"')) {
        text.remove_prefix(1);
    }
    while (!text.empty() && (text.back() == ' ' || text.back() == '"' || text.back() == '\r')) {
        text.remove_suffix(1);
    }
    if (format == "unix") {
        Timestamp value = 0;
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
        if (ec != std::errc{} || ptr != text.data() + text.size()) {
            throw InputError("malformed epoch timestamp '" + std::string(text) + "'");
        }
        return value;
    }
    if (format == "iso8601") {
        return parse_iso8601(text);
    }

    std::string buffer(text);
    bool hour_24 = false;
    if (format.find("%H") != std::string_view::npos) {
        for (const char* marker : {" 24:", "T24:"}) {
            if (const auto pos = buffer.find(marker); pos != std::string::npos) {
                buffer.replace(pos + 1, 2, "00");
                hour_24 = true;
                break;
            }
        }
    }
    std::tm tm{};
    std::istringstream in(buffer);
    in >> std::get_time(&tm, std::string(format).c_str());
    if (in.fail()) {
        throw InputError("timestamp '" + std::string(text) + "' does not match format '" +
                         std::string(format) + "'");
    }
    const auto date = checked_date(tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, text);
    Timestamp ts = to_timestamp(date, tm.tm_hour, tm.tm_min, tm.tm_sec);
    if (hour_24) {
        ts += kSecondsPerDay;
    }
    return ts;
}

} // namespace deepdeff

#include "deepdeff/data.hpp"

#include "deepdeff/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

namespace deepdeff {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> split_fields(const std::string& line, char delimiter)
{
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (ch == '"') {
            if (quoted && i + 1 < line.size() && line[i + 1] == '"') {
                current.push_back('"');
                ++i;
            } else {
                quoted = !quoted;
            }
        } else if (ch == delimiter && !quoted) {
            fields.push_back(std::move(current));
            current.clear();
        } else if (ch != '\r') {
            current.push_back(ch);
        }
    }
    fields.push_back(std::move(current));
    return fields;
}

std::string trim(std::string s)
{
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name,
                         const std::filesystem::path& path)
{
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
        throw InputError(path.string() + ": header has no column '" + name + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
}

struct Reading {
    Timestamp ts;
    double load;
    std::size_t line;
};

TimeSeries assemble(std::vector<Reading> readings, const CsvSchema& schema, std::string source_id,
                     const std::filesystem::path& path)
{
    TimeSeries series;
    series.interval_minutes = schema.interval_minutes;
    series.unit = schema.unit;
    series.source_id = std::move(source_id);
    if (readings.empty()) {
        return series;
    }

    std::stable_sort(readings.begin(), readings.end(),
                     [](const Reading& a, const Reading& b) { return a.ts < b.ts; });

    // Duplicate timestamps collapse to the mean of their readings.
    std::vector<Reading> unique;
    for (std::size_t i = 0; i < readings.size();) {
        std::size_t j = i;
        double sum = 0.0;
        std::size_t count = 0;
        while (j < readings.size() && readings[j].ts == readings[i].ts) {
            if (!std::isnan(readings[j].load)) {
                sum += readings[j].load;
                ++count;
            }
            ++j;
        }
        unique.push_back({readings[i].ts, count ? sum / static_cast<double>(count) : kMissing,
                          readings[i].line});
        i = j;
    }

    const Timestamp step = series.interval_seconds();
    std::erase_if(unique, [&](const Reading& r) {
        return std::isnan(r.load) && (r.ts - unique.front().ts) % step != 0;
    });
    const Timestamp t0 = unique.front().ts;
    for (const auto& r : unique) {
        if ((r.ts - t0) % step != 0) {
            throw InputError(path.string() + ":" + std::to_string(r.line) + ": timestamp " +
                             format_iso8601(r.ts) + " is off the " +
                             std::to_string(schema.interval_minutes) + "-minute grid");
        }
    }
    const auto n = static_cast<std::size_t>((unique.back().ts - t0) / step) + 1;
    series.records.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        series.records[i].timestamp = t0 + static_cast<Timestamp>(i) * step;
        series.records[i].load = kMissing;
    }
    for (const auto& r : unique) {
        series.records[static_cast<std::size_t>((r.ts - t0) / step)].load = r.load;
    }
    return series;
}

void check_schema(const CsvSchema& schema)
{
    if (schema.timestamp_column.empty() || schema.load_column.empty()) {
        throw ConfigError("CSV schema must name timestamp and load columns");
    }
    if (schema.interval_minutes <= 0 || 1440 % schema.interval_minutes != 0) {
        throw ConfigError("CSV schema interval of " + std::to_string(schema.interval_minutes) +
                          " minutes does not divide a day");
    }
}

} // namespace

std::map<std::string, TimeSeries> load_csv_entities(const std::filesystem::path& path,
                                                    const CsvSchema& schema)
{
    check_schema(schema);
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line) || trim(line).empty()) {
        throw InputError(path.string() + ": empty file");
    }
    std::vector<std::string> header = split_fields(line, schema.delimiter);
    for (auto& h : header) {
        h = trim(h);
    }
    if (!header.empty() && header[0].starts_with("\xEF\xBB\xBF")) {
        header[0].erase(0, 3);
    }
    const std::size_t ts_col = column_index(header, schema.timestamp_column, path);
    const std::size_t load_col = column_index(header, schema.load_column, path);
    constexpr std::size_t kAbsent = std::string::npos;
    const std::size_t time_col =
        schema.time_column.empty() ? kAbsent : column_index(header, schema.time_column, path);
    const std::size_t entity_col =
        schema.entity_column.empty() ? kAbsent : column_index(header, schema.entity_column, path);

    std::map<std::string, std::vector<Reading>> grouped;
    std::size_t line_number = 1;
    std::size_t data_rows = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (trim(line).empty()) {
            continue;
        }
        const auto fields = split_fields(line, schema.delimiter);
        const auto location = path.string() + ":" + std::to_string(line_number);
        const std::size_t needed =
            std::max({ts_col, load_col, time_col == kAbsent ? 0 : time_col,
                      entity_col == kAbsent ? 0 : entity_col}) + 1;
        if (fields.size() < needed) {
            throw InputError(location + ": expected at least " + std::to_string(needed) +
                             " fields, found " + std::to_string(fields.size()));
        }
        std::string stamp = trim(fields[ts_col]);
        if (time_col != kAbsent) {
            stamp += " " + trim(fields[time_col]);
        }
        Timestamp ts = 0;
        try {
            ts = parse_timestamp(stamp, schema.timestamp_format);
        } catch (const InputError& e) {
            throw InputError(location + ": " + e.what());
        }
        ts += Timestamp{schema.timestamp_shift_minutes} * 60;

        const std::string load_text = trim(fields[load_col]);
        double load = kMissing;
        if (!load_text.empty()) {
            char* end = nullptr;
            load = std::strtod(load_text.c_str(), &end);
            if (end != load_text.c_str() + load_text.size() || !std::isfinite(load)) {
                throw InputError(location + ": unparseable load value '" + load_text + "'");
            }
        }
        const std::string entity = entity_col != kAbsent ? trim(fields[entity_col]) : std::string{};
        grouped[entity].push_back({ts, load, line_number});
        ++data_rows;
    }
    if (data_rows == 0) {
        throw InputError(path.string() + ": no data rows");
    }

    std::map<std::string, TimeSeries> out;
    for (auto& [entity, readings] : grouped) {
        const std::string id = entity.empty() ? path.stem().string() : entity;
        out.emplace(entity, assemble(std::move(readings), schema, id, path));
    }
    return out;
}

TimeSeries load_csv(const std::filesystem::path& path, const CsvSchema& schema)
{
    auto all = load_csv_entities(path, schema);
    if (all.size() != 1) {
        throw InputError(path.string() + ": holds " + std::to_string(all.size()) +
                         " entities; select one with load_csv_entities");
    }
    return std::move(all.begin()->second);
}

TimeSeries resample_average(const TimeSeries& series, int target_interval_minutes)
{
    if (target_interval_minutes <= 0 || series.interval_minutes <= 0 ||
        target_interval_minutes % series.interval_minutes != 0) {
        throw ConfigError("cannot resample " + std::to_string(series.interval_minutes) +
                          "-minute data to " + std::to_string(target_interval_minutes) +
                          " minutes: not an integer multiple");
    }
    if (1440 % target_interval_minutes != 0) {
        throw ConfigError("resample interval of " + std::to_string(target_interval_minutes) +
                          " minutes does not divide a day");
    }
    TimeSeries out;
    out.interval_minutes = target_interval_minutes;
    out.unit = series.unit;
    out.source_id = series.source_id;
    if (series.empty()) {
        return out;
    }

    const Timestamp width = Timestamp{target_interval_minutes} * 60;
    const auto bucket_of = [width](Timestamp ts) {
        const Timestamp q = ts / width;
        return (ts % width < 0 ? q - 1 : q) * width;
    };
    const Timestamp first = bucket_of(series.records.front().timestamp);
    const Timestamp last = bucket_of(series.records.back().timestamp);
    const auto n = static_cast<std::size_t>((last - first) / width) + 1;

    std::vector<double> sum(n, 0.0);
    std::vector<std::size_t> count(n, 0);
    for (const auto& r : series.records) {
        if (r.missing()) {
            continue;
        }
        const auto b = static_cast<std::size_t>((bucket_of(r.timestamp) - first) / width);
        sum[b] += r.load;
        ++count[b];
    }
    out.records.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.records[i].timestamp = first + static_cast<Timestamp>(i) * width;
        out.records[i].load = count[i] ? sum[i] / static_cast<double>(count[i]) : kMissing;
    }
    return series.calendar_annotated ? annotate_calendar(out) : out;
}

TimeSeries apply_offset(const TimeSeries& series, double offset)
{
    TimeSeries out = series;
    for (auto& r : out.records) {
        r.load += offset;
    }
    return out;
}

TimeSeries annotate_calendar(const TimeSeries& series)
{
    TimeSeries out = series;
    for (auto& r : out.records) {
        r.slot = slot_of(r.timestamp, out.interval_minutes);
        r.weekday = weekday_index(r.timestamp);
        r.holiday = r.weekday >= 5 ? 1 : 0;
    }
    out.calendar_annotated = true;
    return out;
}

SplitSpec SplitSpec::date_ranges(DateRange train, DateRange validation, DateRange test)
{
    SplitSpec spec;
    spec.mode = SplitMode::DateRanges;
    spec.ranges = {train, validation, test};
    return spec;
}

SplitSpec SplitSpec::month_wise(unsigned train_last_day, unsigned validation_last_day)
{
    SplitSpec spec;
    spec.mode = SplitMode::MonthWise;
    spec.train_last_day = train_last_day;
    spec.validation_last_day = validation_last_day;
    return spec;
}

namespace {

const char* partition_name(std::size_t i)
{
    static constexpr const char* names[] = {"train", "validation", "test"};
    return names[i];
}

} // namespace

SplitIndices split(const TimeSeries& series, const SplitSpec& spec)
{
    if (series.empty()) {
        throw ConfigError("cannot split an empty series");
    }
    SplitIndices out;
    std::array<std::vector<std::size_t>*, 3> parts{&out.train, &out.validation, &out.test};

    if (spec.mode == SplitMode::MonthWise) {
        if (!(0 < spec.train_last_day && spec.train_last_day < spec.validation_last_day &&
              spec.validation_last_day < 28)) {
            throw ConfigError("month-wise split needs 0 < train day < validation day < 28");
        }
        for (std::size_t i = 0; i < series.size(); ++i) {
            const unsigned day = static_cast<unsigned>(civil_date(series.records[i].timestamp).day());
            const std::size_t part = day <= spec.train_last_day        ? 0
                                     : day <= spec.validation_last_day ? 1
                                                                       : 2;
            parts[part]->push_back(i);
        }
    } else {
        for (std::size_t p = 0; p < 3; ++p) {
            const auto& r = spec.ranges[p];
            if (!r.first.ok() || !r.last.ok() || r.last < r.first) {
                throw ConfigError(std::string(partition_name(p)) + " range " +
                                  format_date(r.first) + " .. " + format_date(r.last) +
                                  " is invalid");
            }
            if (p > 0 && !(spec.ranges[p - 1].last < r.first)) {
                throw ConfigError(std::string(partition_name(p - 1)) + " and " + partition_name(p) +
                                  " ranges overlap or are out of order");
            }
        }
        for (std::size_t i = 0; i < series.size(); ++i) {
            const auto date = civil_date(series.records[i].timestamp);
            for (std::size_t p = 0; p < 3; ++p) {
                if (spec.ranges[p].first <= date && date <= spec.ranges[p].last) {
                    parts[p]->push_back(i);
                    break;
                }
            }
        }
    }

    for (std::size_t p = 0; p < 3; ++p) {
        if (parts[p]->empty()) {
            throw ConfigError(std::string(partition_name(p)) +
                              " partition has no records inside the series span " +
                              format_iso8601(series.records.front().timestamp) + " .. " +
                              format_iso8601(series.records.back().timestamp));
        }
    }
    return out;
}

TimeSeries select(const TimeSeries& series, const std::vector<std::size_t>& indices)
{
    TimeSeries out;
    out.interval_minutes = series.interval_minutes;
    out.unit = series.unit;
    out.source_id = series.source_id;
    out.calendar_annotated = series.calendar_annotated;
    out.records.reserve(indices.size());
    for (const auto i : indices) {
        out.records.push_back(series.records.at(i));
    }
    return out;
}

void write_canonical_csv(const TimeSeries& series, const std::filesystem::path& path)
{
    const TimeSeries annotated = series.calendar_annotated ? series : annotate_calendar(series);
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << "timestamp,load,slot,weekday,holiday\n";
    char buf[64];
    for (const auto& r : annotated.records) {
        out << format_iso8601(r.timestamp) << ',';
        if (!r.missing()) {
            std::snprintf(buf, sizeof buf, "%.17g", r.load);
            out << buf;
        }
        out << ',' << r.slot << ',' << r.weekday << ',' << r.holiday << '\n';
    }
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

TimeSeries read_canonical_csv(const std::filesystem::path& path, int interval_minutes)
{
    CsvSchema schema = dataset_preset("canonical").schema;
    schema.interval_minutes = interval_minutes;
    return annotate_calendar(load_csv(path, schema));
}

DatasetPreset dataset_preset(const std::string& name)
{
    using namespace std::chrono;
    const auto d = [](int y, unsigned m, unsigned day_of_month) {
        return year_month_day{year{y}, month{m}, day{day_of_month}};
    };

    DatasetPreset p;
    p.name = name;
    if (name == "sgsc") {
        p.schema.entity_column = "CUSTOMER_ID";
        p.schema.timestamp_column = "READING_DATETIME";
        p.schema.load_column = "GENERAL_SUPPLY_KWH";
        p.schema.timestamp_format = "%Y-%m-%d %H:%M:%S";
        p.schema.interval_minutes = 30;
        p.schema.unit = LoadUnit::Kilowatt;
        p.split = SplitSpec::date_ranges({d(2013, 6, 1), d(2013, 8, 5)}, {d(2013, 8, 6), d(2013, 8, 22)},
                                         {d(2013, 8, 23), d(2013, 8, 31)});
    } else if (name == "ampds") {
        p.schema.timestamp_column = "TS";
        p.schema.load_column = "I";
        p.schema.timestamp_format = "unix";
        p.schema.interval_minutes = 1;
        p.schema.unit = LoadUnit::Ampere;
        p.resample_minutes = 30;
        p.split = SplitSpec::date_ranges({d(2012, 4, 1), d(2012, 12, 17)},
                                         {d(2012, 12, 18), d(2013, 2, 23)},
                                         {d(2013, 2, 24), d(2013, 4, 1)});
    } else if (name == "rte") {
        p.schema.timestamp_column = "Date";
        p.schema.time_column = "Heures";
        p.schema.load_column = "Consommation";
        p.schema.timestamp_format = "%Y-%m-%d %H:%M";
        p.schema.interval_minutes = 30;
        p.schema.unit = LoadUnit::Megawatt;
        p.split = SplitSpec::date_ranges({d(2013, 1, 1), d(2015, 11, 18)},
                                         {d(2015, 11, 19), d(2016, 8, 7)},
                                         {d(2016, 8, 8), d(2016, 12, 31)});
    } else if (name == "ercot") {
        p.schema.timestamp_column = "Hour_End";
        p.schema.load_column = "ERCOT";
        p.schema.timestamp_format = "%m/%d/%Y %H:%M";
        p.schema.interval_minutes = 60;
        p.schema.unit = LoadUnit::Megawatt;
        p.schema.timestamp_shift_minutes = -60;
        p.split = SplitSpec::date_ranges({d(2011, 1, 1), d(2013, 5, 26)},
                                         {d(2013, 5, 27), d(2013, 12, 31)},
                                         {d(2014, 1, 1), d(2015, 12, 31)});
    } else if (name == "precon") {
        p.schema.timestamp_column = "Date_Time";
        p.schema.load_column = "Usage_kW";
        p.schema.timestamp_format = "%Y-%m-%d %H:%M:%S";
        p.schema.interval_minutes = 1;
        p.schema.unit = LoadUnit::Kilowatt;
        p.resample_minutes = 30;
        p.offset = 0.1;
        p.split = SplitSpec::month_wise(21, 26);
    } else if (name == "canonical") {
        p.schema.timestamp_column = "timestamp";
        p.schema.load_column = "load";
        p.schema.timestamp_format = "iso8601";
        p.schema.interval_minutes = 30;
        p.split = SplitSpec::month_wise(21, 26);
    } else {
        throw ConfigError("unknown dataset preset '" + name + "'");
    }
    return p;
}

std::vector<std::string> dataset_preset_names()
{
    return {"sgsc", "ampds", "rte", "ercot", "precon", "canonical"};
}

TimeSeries preprocess(const TimeSeries& raw, const DatasetPreset& preset)
{
    TimeSeries series = raw;
    if (preset.resample_minutes && *preset.resample_minutes != series.interval_minutes) {
        series = resample_average(series, *preset.resample_minutes);
    }
    if (preset.offset != 0.0) {
        series = apply_offset(series, preset.offset);
    }
    return annotate_calendar(series);
}

TimeSeries synthetic_series(const SyntheticSpec& spec, Rng& rng, std::string source_id)
{
    TimeSeries series;
    series.interval_minutes = spec.interval_minutes;
    series.unit = LoadUnit::Kilowatt;
    series.source_id = std::move(source_id);
    const Timestamp step = series.interval_seconds();
    const std::size_t per_day = series.slots_per_day();
    const Timestamp start = to_timestamp(spec.start);
    series.records.resize(spec.days * per_day);
    for (std::size_t i = 0; i < series.records.size(); ++i) {
        auto& r = series.records[i];
        r.timestamp = start + static_cast<Timestamp>(i) * step;
        const std::size_t wd = weekday_index(r.timestamp);
        const double phase = 2.0 * std::numbers::pi * static_cast<double>(i % per_day) /
                             static_cast<double>(per_day);
        const double level = spec.base * (1.0 + spec.weekday_ripple * (static_cast<double>(wd) - 3.0)) *
                             (wd >= 5 ? spec.weekend_factor : 1.0);
        const double value = level + spec.daily_amplitude * std::sin(phase - std::numbers::pi / 2.0) +
                             spec.noise_std * rng.normal();
        r.load = std::max(spec.floor, value);
    }
    return annotate_calendar(series);
}

} // namespace deepdeff

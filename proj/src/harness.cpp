#include "deepdeff/harness.hpp"

#include "deepdeff/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace deepdeff {

using nlohmann::json;

namespace {

std::chrono::year_month_day date_field(const json& j, const char* what)
{
    if (!j.is_string()) {
        throw ConfigError(std::string(what) + " must be a YYYY-MM-DD string");
    }
    try {
        return parse_date(j.get<std::string>());
    } catch (const InputError& e) {
        throw ConfigError(std::string(what) + ": " + e.what());
    }
}

DateRange range_field(const json& j, const char* what)
{
    if (!j.is_array() || j.size() != 2) {
        throw ConfigError(std::string(what) + " must be a [first, last] date pair");
    }
    return {date_field(j[0], what), date_field(j[1], what)};
}

SplitSpec parse_split(const json& j)
{
    const auto mode = j.value("mode", std::string("date-ranges"));
    if (mode == "month-wise") {
        return SplitSpec::month_wise(j.value("train_last_day", 21u), j.value("validation_last_day", 26u));
    }
    if (mode != "date-ranges") {
        throw ConfigError("unknown split mode '" + mode + "'");
    }
    for (const char* key : {"train", "validation", "test"}) {
        if (!j.contains(key)) {
            throw ConfigError(std::string("date-range split needs a '") + key + "' range");
        }
    }
    return SplitSpec::date_ranges(range_field(j["train"], "train"),
                                  range_field(j["validation"], "validation"),
                                  range_field(j["test"], "test"));
}

void apply_schema_overrides(CsvSchema& s, const json& j)
{
    s.timestamp_column = j.value("timestamp_column", s.timestamp_column);
    s.time_column = j.value("time_column", s.time_column);
    s.load_column = j.value("load_column", s.load_column);
    s.entity_column = j.value("entity_column", s.entity_column);
    s.timestamp_format = j.value("timestamp_format", s.timestamp_format);
    if (j.contains("delimiter")) {
        const auto d = j["delimiter"].get<std::string>();
        if (d.size() != 1) {
            throw ConfigError("delimiter must be a single character");
        }
        s.delimiter = d[0];
    }
    if (j.contains("unit")) {
        s.unit = parse_load_unit(j["unit"].get<std::string>());
    }
    s.interval_minutes = j.value("interval_minutes", s.interval_minutes);
    s.timestamp_shift_minutes = j.value("timestamp_shift_minutes", s.timestamp_shift_minutes);
}

SyntheticSpec parse_synthetic(const json& j)
{
    SyntheticSpec s;
    if (j.contains("start")) {
        s.start = date_field(j["start"], "synthetic.start");
    }
    s.days = j.value("days", s.days);
    s.interval_minutes = j.value("interval_minutes", s.interval_minutes);
    s.base = j.value("base", s.base);
    s.daily_amplitude = j.value("daily_amplitude", s.daily_amplitude);
    s.weekend_factor = j.value("weekend_factor", s.weekend_factor);
    s.weekday_ripple = j.value("weekday_ripple", s.weekday_ripple);
    s.noise_std = j.value("noise_std", s.noise_std);
    s.floor = j.value("floor", s.floor);
    return s;
}

std::uint64_t fnv1a(std::string_view text, std::uint64_t h = 0xcbf29ce484222325ULL)
{
    for (const unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace

void ExperimentConfig::validate() const
{
    if (methods.empty()) {
        throw ConfigError("experiment needs at least one method");
    }
    if (timesteps.empty()) {
        throw ConfigError("experiment needs at least one time-step count");
    }
    if (std::any_of(timesteps.begin(), timesteps.end(), [](std::size_t k) { return k == 0; })) {
        throw ConfigError("time-step counts must be positive");
    }
    if (synthetic ? synthetic_entities.empty() : data_path.empty()) {
        throw ConfigError(synthetic ? "synthetic dataset needs at least one entity"
                                    : "dataset needs a path");
    }
    if (jobs == 0) {
        throw ConfigError("jobs must be positive");
    }
    train.validate();
}

ExperimentConfig parse_experiment_config(const std::string& json_text,
                                         const std::filesystem::path& base_dir)
{
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("experiment config is not valid JSON: ") + e.what());
    }

    ExperimentConfig c;
    try {
        if (j.contains("synthetic")) {
            const auto& s = j["synthetic"];
            c.synthetic = parse_synthetic(s);
            c.synthetic_entities = s.value("entities", std::vector<std::string>{"synthetic"});
            c.synthetic_shared_profile = s.value("shared_profile", false);
            c.preset = dataset_preset("canonical");
            c.preset.schema.interval_minutes = c.synthetic->interval_minutes;
            if (s.contains("split")) {
                c.preset.split = parse_split(s["split"]);
            }
            c.preset.name = "synthetic";
        } else if (j.contains("dataset")) {
            const auto& d = j["dataset"];
            c.preset = dataset_preset(d.value("preset", std::string("canonical")));
            if (d.contains("schema")) {
                apply_schema_overrides(c.preset.schema, d["schema"]);
            }
            if (d.contains("split")) {
                c.preset.split = parse_split(d["split"]);
            }
            if (d.contains("offset")) {
                c.preset.offset = d["offset"].get<double>();
            }
            if (d.contains("resample_minutes")) {
                const auto& r = d["resample_minutes"];
                c.preset.resample_minutes = r.is_null() ? std::nullopt : std::optional<int>(r.get<int>());
            }
            const auto path = std::filesystem::path(d.value("path", std::string{}));
            c.data_path = path.empty() || path.is_absolute() || base_dir.empty() ? path : base_dir / path;
            c.entities = d.value("entities", std::vector<std::string>{});
        } else {
            throw ConfigError("experiment config needs a 'dataset' or 'synthetic' section");
        }

        for (const auto& m : j.value("methods", std::vector<std::string>{})) {
            c.methods.push_back(Method::parse(m));
        }
        c.timesteps = j.value("timesteps", std::vector<std::size_t>{});

        const auto model = j.value("model", std::string("both"));
        if (model == "both") {
            c.models = ModelSelection::Both;
        } else if (model == "deepdeff") {
            c.models = ModelSelection::DeepDeff;
        } else if (model == "basic") {
            c.models = ModelSelection::Basic;
        } else {
            throw ConfigError("model must be deepdeff, basic or both; got '" + model + "'");
        }

        if (j.contains("train")) {
            const auto& t = j["train"];
            c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
            c.train.dropout = t.value("dropout", c.train.dropout);
            c.train.epochs = t.value("epochs", c.train.epochs);
            c.train.batch_size = t.value("batch_size", c.train.batch_size);
            c.train.patience = t.value("patience", c.train.patience);
            c.hidden = t.value("hidden", c.hidden);
            c.dense = t.value("dense", c.dense);
        }

        const auto layout = j.value("derived_layout", std::string("per-row"));
        if (layout == "per-row") {
            c.features.layout = DerivedLayout::PerRow;
        } else if (layout == "single-vector") {
            c.features.layout = DerivedLayout::SingleVector;
        } else {
            throw ConfigError("derived_layout must be per-row or single-vector");
        }

        if (j.contains("output_dir")) {
            const std::filesystem::path out = j["output_dir"].get<std::string>();
            c.output_dir = out.is_absolute() || base_dir.empty() ? out : base_dir / out;
        }
        c.seed = j.value("seed", c.seed);
        c.jobs = j.value("jobs", c.jobs);
        c.decorrelate_entities = j.value("decorrelate_entities", c.decorrelate_entities);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("experiment config: ") + e.what());
    }
    c.validate();
    return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_experiment_config(buffer.str(), path.parent_path());
}

std::uint64_t derive_seed(std::uint64_t master, const std::string& entity, const std::string& method,
                          std::size_t timesteps)
{
    std::uint64_t h = mix64(master);
    h = fnv1a(entity, h);
    h = fnv1a("\x1f", h);
    h = fnv1a(method, h);
    h ^= mix64(timesteps);
    return mix64(h);
}

void ResultTable::check_consistency() const
{
    for (const auto& row : rows) {
        if (row.entity_mapes.empty()) {
            if (!std::isnan(row.average_mape)) {
                throw FormatError("row " + row.method + " K=" + std::to_string(row.timesteps) +
                                  " has an average but no entity results");
            }
            continue;
        }
        double sum = 0.0;
        for (const auto& [entity, value] : row.entity_mapes) {
            sum += value;
        }
        const double mean = sum / static_cast<double>(row.entity_mapes.size());
        if (!(std::abs(mean - row.average_mape) <= 1e-9 * std::max(1.0, std::abs(mean)))) {
            throw FormatError("row " + row.method + " K=" + std::to_string(row.timesteps) +
                              " stores average " + std::to_string(row.average_mape) +
                              " but its entities average " + std::to_string(mean));
        }
    }
}

ResultTable aggregate(const std::vector<EntityResult>& results, const std::vector<Method>& method_order)
{
    auto method_rank = [&](const std::string& label) {
        for (std::size_t i = 0; i < method_order.size(); ++i) {
            if (method_order[i].label() == label) {
                return i;
            }
        }
        return method_order.size();
    };
    std::vector<const EntityResult*> sorted;
    for (const auto& r : results) {
        sorted.push_back(&r);
    }
    std::sort(sorted.begin(), sorted.end(), [&](const EntityResult* a, const EntityResult* b) {
        return std::tuple(a->timesteps, method_rank(a->method), a->method, a->kind, a->entity) <
               std::tuple(b->timesteps, method_rank(b->method), b->method, b->kind, b->entity);
    });

    ResultTable table;
    for (const auto* r : sorted) {
        if (table.rows.empty() || table.rows.back().method != r->method ||
            table.rows.back().timesteps != r->timesteps || table.rows.back().kind != r->kind) {
            table.rows.push_back({r->method, r->timesteps, r->kind, {}, {}, 0.0});
        }
        auto& row = table.rows.back();
        if (r->mape) {
            row.entity_mapes.emplace_back(r->entity, *r->mape);
        } else {
            row.entity_errors.emplace_back(r->entity, r->error);
        }
    }
    for (auto& row : table.rows) {
        if (row.entity_mapes.empty()) {
            row.average_mape = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        double sum = 0.0;
        for (const auto& [entity, value] : row.entity_mapes) {
            sum += value;
        }
        row.average_mape = sum / static_cast<double>(row.entity_mapes.size());
    }
    return table;
}

std::vector<LoadedEntity> load_entities(const ExperimentConfig& config)
{
    std::vector<LoadedEntity> out;
    if (config.synthetic) {
        for (const auto& id : config.synthetic_entities) {
            Rng rng(mix64(config.seed ^ (config.synthetic_shared_profile ? 0 : fnv1a(id))));
            out.push_back({id, synthetic_series(*config.synthetic, rng, id), {}});
        }
        return out;
    }

    std::map<std::string, TimeSeries> raw = load_csv_entities(config.data_path, config.preset.schema);
    std::vector<std::string> ids = config.entities;
    if (ids.empty()) {
        for (const auto& [id, series] : raw) {
            ids.push_back(id.empty() ? series.source_id : id);
        }
    }
    for (const auto& id : ids) {
        auto it = raw.find(id);
        if (it == raw.end() && raw.size() == 1 && raw.begin()->first.empty()) {
            it = raw.begin(); // single-entity file: any id names it
        }
        if (it == raw.end()) {
            out.push_back({id, std::nullopt, "entity '" + id + "' not found in " + config.data_path.string()});
            continue;
        }
        try {
            auto series = preprocess(it->second, config.preset);
            series.source_id = id;
            out.push_back({id, std::move(series), {}});
        } catch (const Error& e) {
            out.push_back({id, std::nullopt, e.what()});
        }
    }
    return out;
}

namespace {

struct Job {
    std::size_t entity;
    Method method;
    std::size_t timesteps;
    ModelKind kind;
};

std::string safe_file_component(const std::string& id)
{
    std::string out;
    for (const char c : id) {
        out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.' ? c : '_');
    }
    return out.empty() ? "entity" : out;
}

struct SplitSamples {
    std::vector<Sample> train, validation, test;
};

SplitSamples build_split_samples(const TimeSeries& series, const SplitSpec& spec, std::size_t K,
                                 const FeatureOptions& features)
{
    const auto parts = split(series, spec);
    SplitSamples out{build_samples(series, K, features, parts.train),
                     build_samples(series, K, features, parts.validation),
                     build_samples(series, K, features, parts.test)};
    if (out.train.empty() || out.validation.empty() || out.test.empty()) {
        throw InputError("series " + series.source_id + " yields " + std::to_string(out.train.size()) +
                         "/" + std::to_string(out.validation.size()) + "/" +
                         std::to_string(out.test.size()) + " train/validation/test samples at K=" +
                         std::to_string(K));
    }
    return out;
}

EntityResult run_job(const ExperimentConfig& config, const LoadedEntity& entity, const Job& job)
{
    EntityResult result{entity.id, job.method.label(), job.timesteps, job.kind, std::nullopt, {}, 0, 0.0, 0};
    if (!entity.series) {
        result.error = entity.error;
        return result;
    }
    const TimeSeries& series = *entity.series;
    const auto samples = build_split_samples(series, config.preset.split, job.timesteps, config.features);

    ModelSpec spec;
    spec.kind = job.kind;
    spec.method = job.method;
    spec.timesteps = job.timesteps;
    spec.basic_features = basic_feature_count(series.slots_per_day());
    spec.derived_features = job.kind == ModelKind::DeepDeff ? kDerivedFeatureCount : 0;
    spec.hidden = config.hidden;
    spec.dense = config.dense;

    const std::uint64_t seed = derive_seed(config.seed, config.decorrelate_entities ? entity.id : std::string{}, result.method, job.timesteps);
    Rng init_rng(seed);
    Model model = build_model(spec, init_rng);

    TrainConfig tc = config.train;
    tc.seed = mix64(seed);
    tc.loss = job.kind == ModelKind::DeepDeff ? LossKind::Mape : LossKind::Mae;
    // Job-level parallelism already occupies the worker pool.
    tc.parallel = config.jobs == 1;

    TrainReport report = train(model, samples.train, samples.validation, tc);
    const double test_mape = evaluate(model, samples.test);
    report.test_mape = test_mape;

    result.mape = test_mape;
    result.best_epoch = report.best_epoch;
    result.best_validation_mape = report.best_validation_mape;
    result.test_points = samples.test.size();

    if (!config.output_dir.empty()) {
        const auto dir = config.output_dir / job_directory_name(result.method, job.timesteps, job.kind);
        std::filesystem::create_directories(dir);
        const auto name = safe_file_component(entity.id);
        emit_plot_data(model, samples.test, dir / ("predictions_" + name + ".csv"));
        emit_train_report(report, dir / ("train_report_" + name + ".csv"));
        save_weights(model, dir / ("weights_" + name + ".txt"));
    }
    return result;
}

} // namespace

std::string job_directory_name(const std::string& method, std::size_t timesteps, ModelKind kind)
{
    return method + "_k" + std::to_string(timesteps) + "_" + std::string(to_string(kind));
}

ExperimentRun run_experiment(const ExperimentConfig& config)
{
    config.validate();
    const auto entities = load_entities(config);
    if (std::none_of(entities.begin(), entities.end(), [](const LoadedEntity& e) { return e.series.has_value(); })) {
        std::string reasons;
        for (const auto& e : entities) {
            reasons += "\n  " + e.id + ": " + e.error;
        }
        throw InputError("no valid entities to run" + reasons);
    }

    std::vector<ModelKind> kinds;
    if (config.models != ModelSelection::Basic) {
        kinds.push_back(ModelKind::DeepDeff);
    }
    if (config.models != ModelSelection::DeepDeff) {
        kinds.push_back(ModelKind::Basic);
    }

    std::vector<Job> jobs;
    for (std::size_t e = 0; e < entities.size(); ++e) {
        for (const auto& m : config.methods) {
            for (const auto k : config.timesteps) {
                for (const auto kind : kinds) {
                    jobs.push_back({e, m, k, kind});
                }
            }
        }
    }

    if (!config.output_dir.empty()) {
        std::filesystem::create_directories(config.output_dir);
    }

    std::vector<EntityResult> results(jobs.size());
    auto run_one = [&](std::size_t i) {
        const auto& job = jobs[i];
        try {
            results[i] = run_job(config, entities[job.entity], job);
        } catch (const std::exception& ex) {
            results[i] = EntityResult{entities[job.entity].id, job.method.label(), job.timesteps,
                                      job.kind, std::nullopt, ex.what(), 0, 0.0, 0};
        }
    };
    if (config.jobs <= 1) {
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            run_one(i);
        }
    } else {
        const auto n = static_cast<long long>(jobs.size());
#pragma omp parallel for schedule(dynamic) num_threads(static_cast<int>(config.jobs))
        for (long long i = 0; i < n; ++i) {
            run_one(static_cast<std::size_t>(i));
        }
    }

    ExperimentRun run;
    run.table = aggregate(results, config.methods);
    std::sort(results.begin(), results.end(), [&](const EntityResult& a, const EntityResult& b) {
        return std::tuple(a.entity, a.method, a.timesteps, a.kind) <
               std::tuple(b.entity, b.method, b.timesteps, b.kind);
    });
    run.entries = std::move(results);
    return run;
}

ReportFormat parse_report_format(std::string_view name)
{
    if (name == "csv") {
        return ReportFormat::Csv;
    }
    if (name == "json") {
        return ReportFormat::Json;
    }
    if (name == "table") {
        return ReportFormat::Table;
    }
    throw ConfigError("unknown report format '" + std::string(name) + "' (csv, json or table)");
}

namespace {

std::string number(double v)
{
    if (std::isnan(v)) {
        return "";
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string csv_escape(const std::string& s)
{
    if (s.find_first_of(",\"\n;=") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (const char c : s) {
        out += c == '"' ? "\"\"" : std::string(1, c);
    }
    return out + "\"";
}

} // namespace

std::string render_csv(const ResultTable& table)
{
    std::ostringstream out;
    out << "method,timesteps,model,entities,failed,average_mape,entity_mapes\n";
    for (const auto& row : table.rows) {
        std::string per_entity;
        for (const auto& [entity, value] : row.entity_mapes) {
            per_entity += (per_entity.empty() ? "" : ";") + entity + "=" + number(value);
        }
        out << row.method << ',' << row.timesteps << ',' << to_string(row.kind) << ','
            << row.entity_mapes.size() << ',' << row.entity_errors.size() << ','
            << number(row.average_mape) << ',' << csv_escape(per_entity) << '\n';
    }
    return out.str();
}

std::string render_json(const ResultTable& table)
{
    json rows = json::array();
    for (const auto& row : table.rows) {
        json entities = json::array();
        for (const auto& [entity, value] : row.entity_mapes) {
            entities.push_back({{"entity", entity}, {"mape", value}});
        }
        json errors = json::array();
        for (const auto& [entity, message] : row.entity_errors) {
            errors.push_back({{"entity", entity}, {"error", message}});
        }
        rows.push_back({{"method", row.method},
                        {"timesteps", row.timesteps},
                        {"model", std::string(to_string(row.kind))},
                        {"entities", entities},
                        {"errors", errors},
                        {"average_mape", std::isnan(row.average_mape) ? json(nullptr) : json(row.average_mape)}});
    }
    return json{{"rows", rows}}.dump(2) + "\n";
}

ResultTable parse_json_table(const std::string& json_text)
{
    ResultTable table;
    try {
        const auto j = json::parse(json_text);
        for (const auto& r : j.at("rows")) {
            ResultRow row;
            row.method = r.at("method").get<std::string>();
            row.timesteps = r.at("timesteps").get<std::size_t>();
            row.kind = parse_model_kind(r.at("model").get<std::string>());
            for (const auto& e : r.at("entities")) {
                row.entity_mapes.emplace_back(e.at("entity").get<std::string>(), e.at("mape").get<double>());
            }
            for (const auto& e : r.value("errors", json::array())) {
                row.entity_errors.emplace_back(e.at("entity").get<std::string>(), e.at("error").get<std::string>());
            }
            const auto& avg = r.at("average_mape");
            row.average_mape = avg.is_null() ? std::numeric_limits<double>::quiet_NaN() : avg.get<double>();
            table.rows.push_back(std::move(row));
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("results JSON: ") + e.what());
    } catch (const ConfigError& e) {
        throw FormatError(std::string("results JSON: ") + e.what());
    }
    table.check_consistency();
    return table;
}

std::string render_text_table(const ResultTable& table)
{
    struct Line {
        std::string method;
        std::size_t timesteps;
        std::optional<double> deepdeff;
        std::optional<double> basic;
    };
    std::vector<Line> lines;
    for (const auto& row : table.rows) {
        auto it = std::find_if(lines.begin(), lines.end(), [&](const Line& l) {
            return l.method == row.method && l.timesteps == row.timesteps;
        });
        if (it == lines.end()) {
            lines.push_back({row.method, row.timesteps, std::nullopt, std::nullopt});
            it = std::prev(lines.end());
        }
        const std::optional<double> value =
            std::isnan(row.average_mape) ? std::nullopt : std::optional<double>(row.average_mape);
        (row.kind == ModelKind::DeepDeff ? it->deepdeff : it->basic) = value;
    }

    const auto cell = [](const std::optional<double>& v) {
        if (!v) {
            return std::string("-");
        }
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", *v);
        return std::string(buf);
    };
    std::ostringstream out;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-8s %-10s %-21s\n", "", "", "Avg.MAPE %");
    out << buf;
    std::snprintf(buf, sizeof buf, "%-8s %-10s %-10s %-10s\n", "Method", "Time-steps", "DeepDeFF", "Basic");
    out << buf;
    for (const auto& l : lines) {
        std::snprintf(buf, sizeof buf, "%-8s %-10zu %-10s %-10s\n", l.method.c_str(), l.timesteps,
                      cell(l.deepdeff).c_str(), cell(l.basic).c_str());
        out << buf;
    }
    return out.str();
}

std::filesystem::path emit_report(const ResultTable& table, ReportFormat format,
                                  const std::filesystem::path& dir)
{
    if (table.rows.empty()) {
        throw InputError("emit_report: empty result table");
    }
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    std::filesystem::path path;
    std::string text;
    switch (format) {
    case ReportFormat::Csv:
        path = dir / "results.csv";
        text = render_csv(table);
        break;
    case ReportFormat::Json:
        path = dir / "results.json";
        text = render_json(table);
        break;
    case ReportFormat::Table:
        path = dir / "results.txt";
        text = render_text_table(table);
        break;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << text;
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
    return path;
}

void emit_plot_data(const Model& model, std::span<const Sample> samples, const std::filesystem::path& path)
{
    std::vector<const Sample*> ordered;
    for (const auto& s : samples) {
        ordered.push_back(&s);
    }
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const Sample* a, const Sample* b) { return a->target_time < b->target_time; });
    const auto predictions = predict_all(model, samples);

    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << "timestamp,actual,predicted\n";
    for (const auto* s : ordered) {
        const auto i = static_cast<std::size_t>(s - samples.data());
        out << format_iso8601(s->target_time) << ',' << number(s->target) << ',' << number(predictions[i]) << '\n';
    }
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

void emit_train_report(const TrainReport& report, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << "epoch,train_loss,validation_mape\n";
    for (const auto& e : report.epochs) {
        out << e.epoch << ',' << number(e.train_loss) << ',' << number(e.validation_mape) << '\n';
    }
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

double predict_entity(const ExperimentConfig& config, const std::string& entity,
                      const std::filesystem::path& weights, const std::filesystem::path& out_csv)
{
    ExperimentConfig single = config;
    if (!config.synthetic) {
        single.entities = {entity};
    } else {
        single.synthetic_entities = {entity};
    }
    const auto loaded = load_entities(single);
    if (loaded.empty() || !loaded.front().series) {
        throw InputError(loaded.empty() ? "entity '" + entity + "' not found" : loaded.front().error);
    }
    const auto& series = *loaded.front().series;
    const Model model = load_weights(weights);
    const auto parts = split(series, config.preset.split);
    const auto test = build_samples(series, model.spec.timesteps, config.features, parts.test);
    if (test.empty()) {
        throw InputError("entity '" + entity + "' has no test samples at K=" +
                         std::to_string(model.spec.timesteps));
    }
    for (const auto& s : test) {
        check_sample(model, s);
    }
    if (out_csv.has_parent_path()) {
        std::filesystem::create_directories(out_csv.parent_path());
    }
    emit_plot_data(model, test, out_csv);
    return evaluate(model, test);
}

} // namespace deepdeff

// Command-line front end: ingest, run, report, predict.

#include "deepdeff/error.hpp"
#include "deepdeff/harness.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace deepdeff;

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::string render(const ResultTable& table, ReportFormat format)
{
    switch (format) {
    case ReportFormat::Csv:
        return render_csv(table);
    case ReportFormat::Json:
        return render_json(table);
    case ReportFormat::Table:
        return render_text_table(table);
    }
    return {};
}

int cmd_ingest(const std::filesystem::path& config_path, const std::filesystem::path& out_dir)
{
    const auto config = load_experiment_config(config_path);
    std::filesystem::create_directories(out_dir);
    int failures = 0;
    for (const auto& entity : load_entities(config)) {
        if (!entity.series) {
            std::cerr << entity.id << ": " << entity.error << '\n';
            ++failures;
            continue;
        }
        const auto& s = *entity.series;
        std::string name = entity.id;
        for (auto& c : name) {
            if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') {
                c = '_';
            }
        }
        const auto path = out_dir / (name + ".csv");
        write_canonical_csv(s, path);
        const auto gaps = find_gaps(s);
        std::cout << entity.id << ": " << s.size() << " records at " << s.interval_minutes
                  << " min, " << s.missing_count() << " missing in " << gaps.size() << " gaps -> "
                  << path.string() << '\n';
    }
    return failures == 0 ? 0 : 1;
}

int cmd_run(const std::filesystem::path& config_path, const std::optional<std::filesystem::path>& out,
            const std::optional<std::uint64_t>& seed, const std::optional<std::size_t>& jobs,
            ReportFormat format)
{
    auto config = load_experiment_config(config_path);
    if (out) {
        config.output_dir = *out;
    }
    if (seed) {
        config.seed = *seed;
    }
    if (jobs) {
        config.jobs = *jobs;
    }
    config.validate();
    if (config.output_dir.empty()) {
        config.output_dir = "results";
    }

    const auto run = run_experiment(config);
    emit_report(run.table, ReportFormat::Csv, config.output_dir);
    emit_report(run.table, ReportFormat::Json, config.output_dir);
    if (format == ReportFormat::Table) {
        emit_report(run.table, ReportFormat::Table, config.output_dir);
    }
    std::cout << render(run.table, format);

    int failed = 0;
    for (const auto& e : run.entries) {
        if (!e.mape) {
            std::cerr << "failed: " << e.entity << ' ' << e.method << " K=" << e.timesteps << ' '
                      << to_string(e.kind) << ": " << e.error << '\n';
            ++failed;
        }
    }
    return failed == 0 ? 0 : 2;
}

int cmd_report(const std::filesystem::path& results, const std::optional<std::filesystem::path>& out,
               ReportFormat format)
{
    const auto table = parse_json_table(read_file(results));
    if (out) {
        std::cout << emit_report(table, format, *out).string() << '\n';
    } else {
        std::cout << render(table, format);
    }
    return 0;
}

int cmd_predict(const std::filesystem::path& config_path, const std::filesystem::path& weights,
                const std::string& entity, const std::optional<std::filesystem::path>& out)
{
    const auto config = load_experiment_config(config_path);
    std::filesystem::path target = out.value_or(".");
    if (std::filesystem::is_directory(target) || !target.has_extension()) {
        target /= "predictions_" + entity + ".csv";
    }
    const double test_mape = predict_entity(config, entity, weights, target);
    std::cout << entity << ": test MAPE " << test_mape << "% -> " << target.string() << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Short-term load forecasting with dual-branch recurrent networks"};
    app.require_subcommand(1);

    std::filesystem::path config_path;
    std::optional<std::filesystem::path> out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> jobs;
    std::string format_name = "table";
    std::filesystem::path results_path;
    std::filesystem::path weights_path;
    std::string entity;

    auto* ingest = app.add_subcommand("ingest", "Build the canonical CSV cache for every entity");
    ingest->add_option("--config", config_path, "Experiment config (JSON)")->required();
    ingest->add_option("--out", out, "Cache directory")->required();

    auto* run = app.add_subcommand("run", "Run the method x time-steps experiment matrix");
    run->add_option("--config", config_path, "Experiment config (JSON)")->required();
    run->add_option("--out", out, "Output directory (overrides output_dir)");
    run->add_option("--seed", seed, "Master seed (overrides config)");
    run->add_option("--jobs", jobs, "Worker threads across entities");
    run->add_option("--format", format_name, "Console report format")
        ->check(CLI::IsMember({"csv", "json", "table"}));

    auto* report = app.add_subcommand("report", "Re-render a saved results.json");
    report->add_option("--results", results_path, "results.json from a previous run")->required();
    report->add_option("--out", out, "Directory to write the rendered report into");
    report->add_option("--format", format_name, "Report format")
        ->check(CLI::IsMember({"csv", "json", "table"}));

    auto* predict = app.add_subcommand("predict", "Predict one entity's test split with saved weights");
    predict->add_option("--config", config_path, "Experiment config (JSON)")->required();
    predict->add_option("--weights", weights_path, "Weights file written by run")->required();
    predict->add_option("--entity", entity, "Entity id")->required();
    predict->add_option("--out", out, "Output CSV path or directory");

    CLI11_PARSE(app, argc, argv);

    try {
        const auto format = parse_report_format(format_name);
        if (*ingest) {
            return cmd_ingest(config_path, *out);
        }
        if (*run) {
            return cmd_run(config_path, out, seed, jobs, format);
        }
        if (*report) {
            return cmd_report(results_path, out, format);
        }
        if (*predict) {
            return cmd_predict(config_path, weights_path, entity, out);
        }
    } catch (const deepdeff::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

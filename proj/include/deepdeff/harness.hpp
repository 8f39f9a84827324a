#pragma once

#include "deepdeff/data.hpp"
#include "deepdeff/features.hpp"
#include "deepdeff/model.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace deepdeff {

enum class ModelSelection { DeepDeff, Basic, Both };

/// One experiment: a dataset, the entities to model, and the
/// method x time-steps x model-kind matrix to run for each entity.
///
/// JSON layout (all keys but dataset/methods/timesteps optional):
///
///   {
///     "dataset": {"preset": "precon", "path": "house3.csv",
///                 "entities": ["3"], "schema": {...}, "split": {...},
///                 "offset": 0.1, "resample_minutes": 30},
///     "synthetic": {"days": 60, "entities": ["a", "b"], "noise_std": 0.1,
///                   "shared_profile": false},
///     "methods": ["BGRU", "GRU"],
///     "timesteps": [2, 6, 12],
///     "model": "both",
///     "train": {"learning_rate": 0.01, "dropout": 0.2, "epochs": 200,
///               "batch_size": 32, "patience": 20, "hidden": 20, "dense": 20},
///     "derived_layout": "per-row",
///     "output_dir": "out", "seed": 42, "jobs": 1,
///     "decorrelate_entities": true
///   }
///
/// Either "dataset" or "synthetic" supplies the series.
struct ExperimentConfig {
    DatasetPreset preset;
    std::filesystem::path data_path;
    std::vector<std::string> entities; // empty: every entity in the file
    std::optional<SyntheticSpec> synthetic;
    std::vector<std::string> synthetic_entities;
    bool synthetic_shared_profile = false; // every entity gets the same draw

    std::vector<Method> methods;
    std::vector<std::size_t> timesteps;
    ModelSelection models = ModelSelection::Both;
    TrainConfig train;
    std::size_t hidden = 20;
    std::size_t dense = 20;
    FeatureOptions features;

    std::filesystem::path output_dir;
    std::uint64_t seed = 42;
    /// When false every entity trains from the same seed stream, so
    /// identical series give identical results.
    bool decorrelate_entities = true;
    std::size_t jobs = 1;

    void validate() const;
};

ExperimentConfig parse_experiment_config(const std::string& json_text,
                                         const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Decorrelated seed for one (entity, method, time-steps) cell of the matrix.
std::uint64_t derive_seed(std::uint64_t master, const std::string& entity, const std::string& method,
                          std::size_t timesteps);

/// Outcome of one (entity, method, time-steps, kind) job.
struct EntityResult {
    std::string entity;
    std::string method;
    std::size_t timesteps = 0;
    ModelKind kind = ModelKind::DeepDeff;
    std::optional<double> mape;
    std::string error; // set when the entity's pipeline failed
    std::size_t best_epoch = 0;
    double best_validation_mape = 0.0;
    std::size_t test_points = 0;
};

/// Aggregate across entities for one (method, time-steps, kind).
struct ResultRow {
    std::string method;
    std::size_t timesteps = 0;
    ModelKind kind = ModelKind::DeepDeff;
    std::vector<std::pair<std::string, double>> entity_mapes;
    std::vector<std::pair<std::string, std::string>> entity_errors;
    double average_mape = 0.0;

    friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

struct ResultTable {
    std::vector<ResultRow> rows;

    /// Throws FormatError if a stored average disagrees with its entries.
    void check_consistency() const;

    friend bool operator==(const ResultTable&, const ResultTable&) = default;
};

/// Groups entity results into rows ordered by (method, time-steps, kind)
/// in configuration order; entities sorted by id within each row.
ResultTable aggregate(const std::vector<EntityResult>& results,
                      const std::vector<Method>& method_order = Method::all());

/// Preprocessed, calendar-annotated series for every configured entity.
/// Entities that fail to load map to an error message instead.
struct LoadedEntity {
    std::string id;
    std::optional<TimeSeries> series;
    std::string error;
};
std::vector<LoadedEntity> load_entities(const ExperimentConfig& config);

struct ExperimentRun {
    std::vector<EntityResult> entries;
    ResultTable table;
};

/// Runs the whole matrix. Each job ingests, splits, builds samples, trains
/// and evaluates independently; a failure is recorded in its entry and
/// never affects other entities. Writes per-job predictions, training
/// curves and weights under config.output_dir when it is set. Throws
/// InputError when no entity could be loaded.
ExperimentRun run_experiment(const ExperimentConfig& config);

enum class ReportFormat { Csv, Json, Table };
ReportFormat parse_report_format(std::string_view name);

std::string render_csv(const ResultTable& table);
std::string render_json(const ResultTable& table);
/// Method | Time-steps | DeepDeFF | Basic, one line per (method, time-steps).
std::string render_text_table(const ResultTable& table);
ResultTable parse_json_table(const std::string& json_text);

/// Writes results.csv / results.json / results.txt into dir. Returns the path.
std::filesystem::path emit_report(const ResultTable& table, ReportFormat format,
                                  const std::filesystem::path& dir);

/// timestamp,actual,predicted, one row per sample in time order.
void emit_plot_data(const Model& model, std::span<const Sample> samples,
                    const std::filesystem::path& path);

/// epoch,train_loss,validation_mape.
void emit_train_report(const TrainReport& report, const std::filesystem::path& path);

/// Subdirectory of output_dir holding one job's artifacts, e.g. "BGRU_k2_deepdeff".
std::string job_directory_name(const std::string& method, std::size_t timesteps, ModelKind kind);

/// Loads an entity, restores saved weights and writes plot data for its
/// test partition. Returns the test MAPE.
double predict_entity(const ExperimentConfig& config, const std::string& entity,
                      const std::filesystem::path& weights, const std::filesystem::path& out_csv);

} // namespace deepdeff

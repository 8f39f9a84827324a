#pragma once

#include "deepdeff/cells.hpp"
#include "deepdeff/features.hpp"
#include "deepdeff/numerics.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace deepdeff {

enum class ModelKind {
    DeepDeff, // basic + derived branches, merged
    Basic,    // two stacked recurrent layers over the basic sequence only
};

std::string_view to_string(ModelKind kind) noexcept;
ModelKind parse_model_kind(std::string_view name);

enum class LossKind { Mape, Mae };

std::string_view to_string(LossKind kind) noexcept;

/// Method label as printed in result tables: RNN, BRNN, GRU, BGRU, LSTM, BLSTM.
struct Method {
    CellKind cell = CellKind::Gru;
    bool bidirectional = true;

    std::string label() const;
    static Method parse(std::string_view label);
    static std::vector<Method> all();

    friend bool operator==(const Method&, const Method&) = default;
};

struct ModelSpec {
    ModelKind kind = ModelKind::DeepDeff;
    Method method;
    std::size_t timesteps = 2;
    std::size_t basic_features = basic_feature_count(48);
    std::size_t derived_features = kDerivedFeatureCount;
    std::size_t hidden = 20;
    std::size_t dense = 20;

    std::size_t branch_width() const noexcept { return method.bidirectional ? 2 * hidden : hidden; }
    /// Width of the concatenated branch outputs feeding the dense layer.
    std::size_t merge_width() const noexcept
    {
        return kind == ModelKind::DeepDeff ? 2 * branch_width() : branch_width();
    }

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// One recurrent layer: a forward cell and, when bidirectional, a reverse
/// cell reading the time-reversed sequence.
struct RecurrentLayer {
    CellParams forward;
    std::optional<CellParams> reverse;

    friend bool operator==(const RecurrentLayer&, const RecurrentLayer&) = default;
};

/// prediction = head(relu(dense(concat(branch outputs)))). The DeepDeFF
/// model has a one-layer basic branch and a one-layer derived branch; the
/// baseline has a two-layer basic branch and no derived branch. Dropout
/// applies to each branch output while training.
struct Model {
    ModelSpec spec;
    std::vector<RecurrentLayer> basic_branch;
    std::vector<RecurrentLayer> derived_branch;
    Matrix dense_weights; // merge_width x dense
    Matrix dense_bias;    // 1 x dense
    Matrix head_weights;  // dense x 1
    Matrix head_bias;     // 1 x 1

    std::size_t parameter_count() const;

    friend bool operator==(const Model&, const Model&) = default;
};

/// Parameters with zero values, in the given architecture.
Model zero_model(const ModelSpec& spec);

/// Glorot-initialized DeepDeFF network.
Model build_deepdeff(const ModelSpec& spec, Rng& rng);

/// Glorot-initialized basic-features baseline (two stacked recurrent layers).
Model build_baseline(Method method, std::size_t timesteps, std::size_t basic_features, Rng& rng,
                     std::size_t hidden = 20, std::size_t dense = 20);

/// Dispatches on spec.kind.
Model build_model(const ModelSpec& spec, Rng& rng);

/// Every parameter matrix in a fixed order, with stable names used by the
/// weights file.
struct ParameterRef {
    std::string name;
    Matrix* value;
};
struct ConstParameterRef {
    std::string name;
    const Matrix* value;
};
std::vector<ParameterRef> parameters(Model& model);
std::vector<ConstParameterRef> parameters(const Model& model);

/// Throws ShapeError unless the sample matches the model's K and widths.
void check_sample(const Model& model, const Sample& sample);

/// Dropout scale factors for one forward pass, one vector per branch.
struct DropoutMasks {
    std::vector<double> basic;
    std::vector<double> derived;
};

DropoutMasks draw_dropout_masks(const Model& model, double rate, Rng& rng);

/// Single prediction. With training set, dropout masks are drawn from rng.
double forward(const Model& model, const Sample& sample, bool training, Rng& rng,
               double dropout_rate = 0.2);

/// Inference without dropout.
double predict(const Model& model, const Sample& sample);

/// Predictions for every sample, computed in parallel.
std::vector<double> predict_all(const Model& model, std::span<const Sample> samples);
/// Serial reference for predict_all.
std::vector<double> predict_all_serial(const Model& model, std::span<const Sample> samples);

// Metrics

/// 100/N * sum |(actual - pred) / actual|. Throws DivideByZeroError on a
/// zero actual and ShapeError on a length mismatch or empty input.
double mape(std::span<const double> predictions, std::span<const double> actuals);
double mae(std::span<const double> predictions, std::span<const double> actuals);

/// Per-sample loss and its derivative with respect to the prediction, for
/// a batch of n samples.
double loss_value(LossKind loss, double prediction, double target, std::size_t n);
double loss_derivative(LossKind loss, double prediction, double target, std::size_t n);

/// Gradient of one sample's loss contribution accumulated into grad (a
/// model with identical architecture). Returns the prediction.
double accumulate_sample_gradient(const Model& model, const Sample& sample,
                                  const DropoutMasks* masks, LossKind loss, std::size_t batch_size,
                                  Model& grad);

/// Sum of per-sample gradients over a batch. Samples are summed in fixed
/// chunks and the chunk sums are added in order; chunks run in parallel in
/// batch_gradient and one after another in batch_gradient_serial, so the
/// two agree bitwise for any thread count.
struct BatchGradient {
    Model grad;
    double loss = 0.0; // batch loss (mean form of the configured loss)
};

BatchGradient batch_gradient(const Model& model, std::span<const Sample* const> batch,
                             std::span<const DropoutMasks> masks, LossKind loss);
BatchGradient batch_gradient_serial(const Model& model, std::span<const Sample* const> batch,
                                    std::span<const DropoutMasks> masks, LossKind loss);

struct TrainConfig {
    double learning_rate = 0.01;
    double dropout = 0.2;
    std::size_t epochs = 200;
    std::size_t batch_size = 32;
    std::uint64_t seed = 42;
    LossKind loss = LossKind::Mape;
    std::size_t patience = 20; // 0 disables early stopping
    bool parallel = true;

    void validate() const;
};

struct EpochRecord {
    std::size_t epoch = 0; // 1-based
    double train_loss = 0.0;
    double validation_mape = 0.0;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0; // 0 when no epoch ran
    double best_validation_mape = 0.0;
    std::optional<double> test_mape;
};

/// Mini-batch Adam on the configured loss. Validation MAPE (dropout off)
/// is recorded after each epoch and the best epoch's weights are restored
/// before returning. Throws TrainingError if the loss becomes non-finite.
TrainReport train(Model& model, std::span<const Sample> train_samples,
                  std::span<const Sample> validation_samples, const TrainConfig& config);

/// Test MAPE with dropout off.
double evaluate(const Model& model, std::span<const Sample> samples);

// Weights file. Text container, one item per line:
//
//   deepdeff-weights 1
//   kind <deepdeff|basic>
//   cell <rnn|gru|lstm>
//   bidirectional <0|1>
//   timesteps <K>
//   basic_features <f>
//   derived_features <4>
//   hidden <H>
//   dense <D>
//   parameters <count>
//   param <name> <rows> <cols>
//   <rows*cols hexadecimal floats, one row per line>
//   ...
//   end
//
// Hexadecimal floats make the round trip bitwise exact.
void save_weights(const Model& model, const std::filesystem::path& path);
Model load_weights(const std::filesystem::path& path);

} // namespace deepdeff

#include "deepdeff/model.hpp"

#include "deepdeff/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <sstream>

namespace deepdeff {

std::string_view to_string(ModelKind kind) noexcept
{
    return kind == ModelKind::DeepDeff ? "deepdeff" : "basic";
}

ModelKind parse_model_kind(std::string_view name)
{
    if (name == "deepdeff" || name == "DeepDeFF") {
        return ModelKind::DeepDeff;
    }
    if (name == "basic" || name == "Basic") {
        return ModelKind::Basic;
    }
    throw ConfigError("unknown model kind '" + std::string(name) + "'");
}

std::string_view to_string(LossKind kind) noexcept
{
    return kind == LossKind::Mape ? "mape" : "mae";
}

std::string Method::label() const
{
    std::string cell_name(to_string(cell));
    std::transform(cell_name.begin(), cell_name.end(), cell_name.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return (bidirectional ? "B" : "") + cell_name;
}

Method Method::parse(std::string_view label)
{
    for (const auto& m : all()) {
        if (m.label() == label) {
            return m;
        }
    }
    throw ConfigError("unknown method '" + std::string(label) +
                      "' (expected RNN, BRNN, GRU, BGRU, LSTM or BLSTM)");
}

std::vector<Method> Method::all()
{
    return {{CellKind::Rnn, false}, {CellKind::Rnn, true},  {CellKind::Gru, false},
            {CellKind::Gru, true},  {CellKind::Lstm, false}, {CellKind::Lstm, true}};
}

namespace {

RecurrentLayer make_layer(const Method& method, std::size_t input_size, std::size_t hidden, Rng* rng)
{
    RecurrentLayer layer;
    if (rng != nullptr) {
        layer.forward = CellParams::initialized(method.cell, input_size, hidden, *rng);
        if (method.bidirectional) {
            layer.reverse = CellParams::initialized(method.cell, input_size, hidden, *rng);
        }
    } else {
        layer.forward = CellParams::zeros(method.cell, input_size, hidden);
        if (method.bidirectional) {
            layer.reverse = CellParams::zeros(method.cell, input_size, hidden);
        }
    }
    return layer;
}

void check_spec(const ModelSpec& spec)
{
    if (spec.timesteps == 0 || spec.basic_features == 0 || spec.hidden == 0 || spec.dense == 0) {
        throw ConfigError("model dimensions must be positive");
    }
    if (spec.kind == ModelKind::DeepDeff && spec.derived_features == 0) {
        throw ConfigError("DeepDeFF model needs derived features");
    }
}

Model make_model(const ModelSpec& spec, Rng* rng)
{
    check_spec(spec);
    Model m;
    m.spec = spec;
    const std::size_t width = spec.branch_width();
    m.basic_branch.push_back(make_layer(spec.method, spec.basic_features, spec.hidden, rng));
    if (spec.kind == ModelKind::Basic) {
        m.basic_branch.push_back(make_layer(spec.method, width, spec.hidden, rng));
    } else {
        m.derived_branch.push_back(make_layer(spec.method, spec.derived_features, spec.hidden, rng));
    }
    if (rng != nullptr) {
        m.dense_weights = glorot_uniform(spec.merge_width(), spec.dense, *rng);
        m.head_weights = glorot_uniform(spec.dense, 1, *rng);
    } else {
        m.dense_weights = Matrix(spec.merge_width(), spec.dense);
        m.head_weights = Matrix(spec.dense, 1);
    }
    m.dense_bias = Matrix(1, spec.dense);
    m.head_bias = Matrix(1, 1);
    return m;
}

} // namespace

Model zero_model(const ModelSpec& spec)
{
    return make_model(spec, nullptr);
}

Model build_deepdeff(const ModelSpec& spec, Rng& rng)
{
    ModelSpec s = spec;
    s.kind = ModelKind::DeepDeff;
    return make_model(s, &rng);
}

Model build_baseline(Method method, std::size_t timesteps, std::size_t basic_features, Rng& rng,
                     std::size_t hidden, std::size_t dense)
{
    ModelSpec s;
    s.kind = ModelKind::Basic;
    s.method = method;
    s.timesteps = timesteps;
    s.basic_features = basic_features;
    s.derived_features = 0;
    s.hidden = hidden;
    s.dense = dense;
    return make_model(s, &rng);
}

Model build_model(const ModelSpec& spec, Rng& rng)
{
    if (spec.kind == ModelKind::Basic) {
        return build_baseline(spec.method, spec.timesteps, spec.basic_features, rng, spec.hidden,
                              spec.dense);
    }
    return build_deepdeff(spec, rng);
}

namespace {

template <typename M, typename Ref>
std::vector<Ref> collect_parameters(M& model)
{
    std::vector<Ref> out;
    auto add_cell = [&out](const std::string& prefix, auto& cell) {
        for (std::size_t g = 0; g < cell.input_weights.size(); ++g) {
            const auto gate = std::to_string(g);
            out.push_back({prefix + ".input_weights." + gate, &cell.input_weights[g]});
            out.push_back({prefix + ".hidden_weights." + gate, &cell.hidden_weights[g]});
            out.push_back({prefix + ".bias." + gate, &cell.bias[g]});
        }
    };
    auto add_branch = [&](const std::string& name, auto& layers) {
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const auto prefix = name + "." + std::to_string(l);
            add_cell(prefix + ".forward", layers[l].forward);
            if (layers[l].reverse) {
                add_cell(prefix + ".reverse", *layers[l].reverse);
            }
        }
    };
    add_branch("basic", model.basic_branch);
    add_branch("derived", model.derived_branch);
    out.push_back({"dense.weights", &model.dense_weights});
    out.push_back({"dense.bias", &model.dense_bias});
    out.push_back({"head.weights", &model.head_weights});
    out.push_back({"head.bias", &model.head_bias});
    return out;
}

} // namespace

std::vector<ParameterRef> parameters(Model& model)
{
    return collect_parameters<Model, ParameterRef>(model);
}

std::vector<ConstParameterRef> parameters(const Model& model)
{
    return collect_parameters<const Model, ConstParameterRef>(model);
}

std::size_t Model::parameter_count() const
{
    std::size_t n = 0;
    for (const auto& p : parameters(*this)) {
        n += p.value->size();
    }
    return n;
}

void check_sample(const Model& model, const Sample& sample)
{
    const auto& s = model.spec;
    if (sample.basic.rows() != s.timesteps || sample.basic.cols() != s.basic_features) {
        throw ShapeError("sample basic sequence " + sample.basic.shape_string() +
                         " does not match model (K=" + std::to_string(s.timesteps) +
                         ", f_basic=" + std::to_string(s.basic_features) + ")");
    }
    if (s.kind == ModelKind::DeepDeff &&
        (sample.derived.rows() != s.timesteps || sample.derived.cols() != s.derived_features)) {
        throw ShapeError("sample derived sequence " + sample.derived.shape_string() +
                         " does not match model (K=" + std::to_string(s.timesteps) +
                         ", f_derived=" + std::to_string(s.derived_features) + ")");
    }
}

DropoutMasks draw_dropout_masks(const Model& model, double rate, Rng& rng)
{
    DropoutMasks masks;
    masks.basic = dropout_mask(model.spec.branch_width(), rate, rng);
    if (model.spec.kind == ModelKind::DeepDeff) {
        masks.derived = dropout_mask(model.spec.branch_width(), rate, rng);
    }
    return masks;
}

namespace {

struct LayerCache {
    SequenceTape forward;
    std::optional<SequenceTape> reverse;
};

struct BranchCache {
    std::vector<LayerCache> layers;
    std::vector<double> output; // before dropout
};

struct ForwardCache {
    BranchCache basic;
    BranchCache derived;
    std::vector<double> merged; // after dropout
    std::vector<double> dense_pre;
    std::vector<double> dense_out;
    double prediction = 0.0;
};

BranchCache branch_forward(const std::vector<RecurrentLayer>& layers, const Matrix& inputs)
{
    BranchCache cache;
    Matrix x = inputs;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        auto fwd = forward_sequence(layer.forward, x, Direction::Forward);
        std::optional<SequenceResult> rev;
        if (layer.reverse) {
            rev = forward_sequence(*layer.reverse, x, Direction::Reverse);
        }
        const bool last = l + 1 == layers.size();
        if (last) {
            cache.output = fwd.last.h;
            if (rev) {
                cache.output.insert(cache.output.end(), rev->last.h.begin(), rev->last.h.end());
            }
        } else {
            const Matrix fwd_seq = fwd.tape.hidden_sequence();
            const std::size_t H = fwd_seq.cols();
            Matrix next(x.rows(), rev ? 2 * H : H);
            const Matrix rev_seq = rev ? rev->tape.hidden_sequence() : Matrix{};
            for (std::size_t t = 0; t < x.rows(); ++t) {
                std::copy(fwd_seq.row(t).begin(), fwd_seq.row(t).end(), next.row(t).begin());
                if (rev) {
                    std::copy(rev_seq.row(t).begin(), rev_seq.row(t).end(),
                              next.row(t).begin() + static_cast<std::ptrdiff_t>(H));
                }
            }
            x = std::move(next);
        }
        cache.layers.push_back({std::move(fwd.tape),
                                rev ? std::optional<SequenceTape>(std::move(rev->tape)) : std::nullopt});
    }
    return cache;
}

void add_cell(CellParams& acc, const CellParams& g)
{
    for (std::size_t i = 0; i < acc.input_weights.size(); ++i) {
        add_in_place(acc.input_weights[i], g.input_weights[i]);
        add_in_place(acc.hidden_weights[i], g.hidden_weights[i]);
        add_in_place(acc.bias[i], g.bias[i]);
    }
}

void branch_backward(const std::vector<RecurrentLayer>& layers, const BranchCache& cache,
                     std::span<const double> d_output, std::vector<RecurrentLayer>& grads)
{
    Matrix d_seq; // gradient on the current layer's hidden sequence (below the top)
    for (std::size_t l = layers.size(); l-- > 0;) {
        const auto& layer = layers[l];
        const auto& lc = cache.layers[l];
        const std::size_t H = layer.forward.hidden_size;
        const bool top = l + 1 == layers.size();

        CellGradients gf, gr;
        if (top) {
            gf = backprop_sequence(layer.forward, lc.forward, d_output.subspan(0, H));
            if (layer.reverse) {
                gr = backprop_sequence(*layer.reverse, *lc.reverse, d_output.subspan(H, H));
            }
        } else {
            Matrix d_fwd(d_seq.rows(), H);
            Matrix d_rev = layer.reverse ? Matrix(d_seq.rows(), H) : Matrix{};
            for (std::size_t t = 0; t < d_seq.rows(); ++t) {
                const auto row = d_seq.row(t);
                std::copy(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(H),
                          d_fwd.row(t).begin());
                if (layer.reverse) {
                    std::copy(row.begin() + static_cast<std::ptrdiff_t>(H), row.end(),
                              d_rev.row(t).begin());
                }
            }
            gf = backprop_sequence(layer.forward, lc.forward, d_fwd);
            if (layer.reverse) {
                gr = backprop_sequence(*layer.reverse, *lc.reverse, d_rev);
            }
        }
        add_cell(grads[l].forward, gf.params);
        if (layer.reverse) {
            add_cell(*grads[l].reverse, gr.params);
            add_in_place(gf.inputs, gr.inputs);
        }
        d_seq = std::move(gf.inputs);
    }
}

ForwardCache forward_cached(const Model& model, const Sample& sample, const DropoutMasks* masks)
{
    check_sample(model, sample);
    ForwardCache cache;
    cache.basic = branch_forward(model.basic_branch, sample.basic);
    if (!model.derived_branch.empty()) {
        cache.derived = branch_forward(model.derived_branch, sample.derived);
    }

    cache.merged = cache.basic.output;
    if (masks != nullptr && !masks->basic.empty()) {
        for (std::size_t i = 0; i < cache.merged.size(); ++i) {
            cache.merged[i] *= masks->basic[i];
        }
    }
    if (!model.derived_branch.empty()) {
        const std::size_t offset = cache.merged.size();
        cache.merged.insert(cache.merged.end(), cache.derived.output.begin(),
                            cache.derived.output.end());
        if (masks != nullptr && !masks->derived.empty()) {
            for (std::size_t i = 0; i < masks->derived.size(); ++i) {
                cache.merged[offset + i] *= masks->derived[i];
            }
        }
    }

    const auto bias = model.dense_bias.values();
    cache.dense_pre.assign(bias.begin(), bias.end());
    add_vec_mat(cache.merged, model.dense_weights, cache.dense_pre);
    cache.dense_out.resize(cache.dense_pre.size());
    for (std::size_t j = 0; j < cache.dense_pre.size(); ++j) {
        cache.dense_out[j] = std::max(0.0, cache.dense_pre[j]);
    }
    std::vector<double> out{model.head_bias(0, 0)};
    add_vec_mat(cache.dense_out, model.head_weights, out);
    cache.prediction = out[0];
    return cache;
}

// d(prediction)-scaled gradient into grad.
void backward(const Model& model, const ForwardCache& cache, const DropoutMasks* masks,
              double d_prediction, Model& grad)
{
    const std::vector<double> d_out{d_prediction};
    add_outer(cache.dense_out, d_out, grad.head_weights);
    grad.head_bias(0, 0) += d_prediction;

    std::vector<double> d_dense(cache.dense_out.size(), 0.0);
    add_mat_vec(model.head_weights, d_out, d_dense);
    for (std::size_t j = 0; j < d_dense.size(); ++j) {
        if (cache.dense_pre[j] <= 0.0) {
            d_dense[j] = 0.0;
        }
    }
    add_outer(cache.merged, d_dense, grad.dense_weights);
    auto db = grad.dense_bias.values();
    for (std::size_t j = 0; j < d_dense.size(); ++j) {
        db[j] += d_dense[j];
    }

    std::vector<double> d_merged(cache.merged.size(), 0.0);
    add_mat_vec(model.dense_weights, d_dense, d_merged);

    const std::size_t width = cache.basic.output.size();
    std::vector<double> d_basic(d_merged.begin(), d_merged.begin() + static_cast<std::ptrdiff_t>(width));
    if (masks != nullptr && !masks->basic.empty()) {
        for (std::size_t i = 0; i < width; ++i) {
            d_basic[i] *= masks->basic[i];
        }
    }
    branch_backward(model.basic_branch, cache.basic, d_basic, grad.basic_branch);

    if (!model.derived_branch.empty()) {
        std::vector<double> d_derived(d_merged.begin() + static_cast<std::ptrdiff_t>(width),
                                      d_merged.end());
        if (masks != nullptr && !masks->derived.empty()) {
            for (std::size_t i = 0; i < d_derived.size(); ++i) {
                d_derived[i] *= masks->derived[i];
            }
        }
        branch_backward(model.derived_branch, cache.derived, d_derived, grad.derived_branch);
    }
}

} // namespace

double forward(const Model& model, const Sample& sample, bool training, Rng& rng, double dropout_rate)
{
    validate_dropout_rate(dropout_rate);
    if (training && dropout_rate > 0.0) {
        const auto masks = draw_dropout_masks(model, dropout_rate, rng);
        return forward_cached(model, sample, &masks).prediction;
    }
    return forward_cached(model, sample, nullptr).prediction;
}

double predict(const Model& model, const Sample& sample)
{
    return forward_cached(model, sample, nullptr).prediction;
}

std::vector<double> predict_all(const Model& model, std::span<const Sample> samples)
{
    for (const auto& s : samples) {
        check_sample(model, s);
    }
    std::vector<double> out(samples.size());
    const auto n = static_cast<long long>(samples.size());
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(i)] = predict(model, samples[static_cast<std::size_t>(i)]);
    }
    return out;
}

std::vector<double> predict_all_serial(const Model& model, std::span<const Sample> samples)
{
    std::vector<double> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
        out.push_back(predict(model, s));
    }
    return out;
}

namespace {
void check_metric_inputs(std::span<const double> predictions, std::span<const double> actuals,
                         const char* name)
{
    if (predictions.size() != actuals.size()) {
        throw ShapeError(std::string(name) + ": " + std::to_string(predictions.size()) +
                         " predictions for " + std::to_string(actuals.size()) + " actuals");
    }
    if (predictions.empty()) {
        throw ShapeError(std::string(name) + ": empty input");
    }
}
} // namespace

double mape(std::span<const double> predictions, std::span<const double> actuals)
{
    check_metric_inputs(predictions, actuals, "mape");
    double sum = 0.0;
    for (std::size_t i = 0; i < actuals.size(); ++i) {
        if (actuals[i] == 0.0) {
            throw DivideByZeroError("mape: actual value at position " + std::to_string(i) +
                                    " is zero");
        }
        sum += std::abs((actuals[i] - predictions[i]) / actuals[i]);
    }
    return 100.0 * sum / static_cast<double>(actuals.size());
}

double mae(std::span<const double> predictions, std::span<const double> actuals)
{
    check_metric_inputs(predictions, actuals, "mae");
    double sum = 0.0;
    for (std::size_t i = 0; i < actuals.size(); ++i) {
        sum += std::abs(actuals[i] - predictions[i]);
    }
    return sum / static_cast<double>(actuals.size());
}

double loss_value(LossKind loss, double prediction, double target, std::size_t n)
{
    const double scale = 1.0 / static_cast<double>(n);
    if (loss == LossKind::Mae) {
        return scale * std::abs(target - prediction);
    }
    if (target == 0.0) {
        throw DivideByZeroError("MAPE loss: zero target");
    }
    return 100.0 * scale * std::abs((target - prediction) / target);
}

double loss_derivative(LossKind loss, double prediction, double target, std::size_t n)
{
    const double scale = 1.0 / static_cast<double>(n);
    const double diff = prediction - target;
    const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
    if (loss == LossKind::Mae) {
        return scale * sign;
    }
    if (target == 0.0) {
        throw DivideByZeroError("MAPE loss: zero target");
    }
    return 100.0 * scale * sign / std::abs(target);
}

double accumulate_sample_gradient(const Model& model, const Sample& sample,
                                  const DropoutMasks* masks, LossKind loss, std::size_t batch_size,
                                  Model& grad)
{
    const auto cache = forward_cached(model, sample, masks);
    const double d = loss_derivative(loss, cache.prediction, sample.target, batch_size);
    backward(model, cache, masks, d, grad);
    return cache.prediction;
}

namespace {

void zero_parameters(Model& m)
{
    for (auto& p : parameters(m)) {
        p.value->fill(0.0);
    }
}

void add_model(Model& acc, const Model& g)
{
    auto a = parameters(acc);
    const auto b = parameters(g);
    for (std::size_t i = 0; i < a.size(); ++i) {
        add_in_place(*a[i].value, *b[i].value);
    }
}

void check_batch(std::span<const Sample* const> batch, std::span<const DropoutMasks> masks)
{
    if (batch.empty()) {
        throw InputError("batch_gradient: empty batch");
    }
    if (!masks.empty() && masks.size() != batch.size()) {
        throw ShapeError("batch_gradient: " + std::to_string(masks.size()) + " dropout masks for " +
                         std::to_string(batch.size()) + " samples");
    }
}

} // namespace

namespace {

// Samples are summed in fixed chunks, then chunks are summed in order. The
// tree depends only on the batch, so the serial and parallel paths agree
// bitwise for any thread count.
constexpr std::size_t kGradientChunk = 4;

struct ChunkSum {
    Model grad;
    double loss = 0.0;
};

void accumulate_chunk(const Model& model, std::span<const Sample* const> batch,
                      std::span<const DropoutMasks> masks, LossKind loss, std::size_t chunk,
                      Model& scratch, ChunkSum& out)
{
    const std::size_t first = chunk * kGradientChunk;
    const std::size_t last = std::min(batch.size(), first + kGradientChunk);
    for (std::size_t i = first; i < last; ++i) {
        zero_parameters(scratch);
        const double p = accumulate_sample_gradient(model, *batch[i], masks.empty() ? nullptr : &masks[i],
                                                    loss, batch.size(), scratch);
        add_model(out.grad, scratch);
        out.loss += loss_value(loss, p, batch[i]->target, batch.size());
    }
}

BatchGradient reduce_chunks(const Model& model, const std::vector<ChunkSum>& chunks)
{
    BatchGradient out{zero_model(model.spec), 0.0};
    for (const auto& c : chunks) {
        add_model(out.grad, c.grad);
        out.loss += c.loss;
    }
    return out;
}

std::size_t chunk_count(std::size_t n) { return (n + kGradientChunk - 1) / kGradientChunk; }

} // namespace

BatchGradient batch_gradient_serial(const Model& model, std::span<const Sample* const> batch,
                                    std::span<const DropoutMasks> masks, LossKind loss)
{
    check_batch(batch, masks);
    std::vector<ChunkSum> chunks(chunk_count(batch.size()), ChunkSum{zero_model(model.spec), 0.0});
    Model scratch = zero_model(model.spec);
    for (std::size_t c = 0; c < chunks.size(); ++c) {
        accumulate_chunk(model, batch, masks, loss, c, scratch, chunks[c]);
    }
    return reduce_chunks(model, chunks);
}

BatchGradient batch_gradient(const Model& model, std::span<const Sample* const> batch,
                             std::span<const DropoutMasks> masks, LossKind loss)
{
    check_batch(batch, masks);
    const std::size_t n_chunks = chunk_count(batch.size());
    std::vector<ChunkSum> chunks(n_chunks, ChunkSum{zero_model(model.spec), 0.0});
    std::vector<std::exception_ptr> errors(n_chunks);

#pragma omp parallel
    {
        Model scratch = zero_model(model.spec);
#pragma omp for schedule(static)
        for (long long c = 0; c < static_cast<long long>(n_chunks); ++c) {
            const auto k = static_cast<std::size_t>(c);
            try {
                accumulate_chunk(model, batch, masks, loss, k, scratch, chunks[k]);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    return reduce_chunks(model, chunks);
}

void TrainConfig::validate() const
{
    if (!(learning_rate > 0.0)) {
        throw ConfigError("learning rate must be positive");
    }
    validate_dropout_rate(dropout);
    if (batch_size == 0) {
        throw ConfigError("batch size must be positive");
    }
}

double evaluate(const Model& model, std::span<const Sample> samples)
{
    if (samples.empty()) {
        throw InputError("evaluate: no samples");
    }
    const auto predictions = predict_all(model, samples);
    std::vector<double> actuals;
    actuals.reserve(samples.size());
    for (const auto& s : samples) {
        actuals.push_back(s.target);
    }
    return mape(predictions, actuals);
}

TrainReport train(Model& model, std::span<const Sample> train_samples,
                  std::span<const Sample> validation_samples, const TrainConfig& config)
{
    config.validate();
    TrainReport report;
    if (config.epochs == 0) {
        return report;
    }
    if (train_samples.empty() || validation_samples.empty()) {
        throw InputError("train: training and validation sets must be nonempty");
    }
    for (const auto& s : train_samples) {
        check_sample(model, s);
    }
    for (const auto& s : validation_samples) {
        check_sample(model, s);
    }

    Rng rng(config.seed);
    std::vector<AdamState> optimizer;
    for (const auto& p : parameters(std::as_const(model))) {
        optimizer.emplace_back(*p.value, config.learning_rate);
    }

    std::vector<std::size_t> order(train_samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }

    Model best = model;
    report.best_validation_mape = std::numeric_limits<double>::infinity();
    std::vector<const Sample*> batch;
    std::vector<DropoutMasks> masks;

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            batch.clear();
            masks.clear();
            for (std::size_t i = start; i < end; ++i) {
                batch.push_back(&train_samples[order[i]]);
                if (config.dropout > 0.0) {
                    masks.push_back(draw_dropout_masks(model, config.dropout, rng));
                }
            }
            auto step = config.parallel ? batch_gradient(model, batch, masks, config.loss)
                                        : batch_gradient_serial(model, batch, masks, config.loss);
            if (!std::isfinite(step.loss)) {
                throw TrainingError("training diverged: non-finite loss in epoch " +
                                    std::to_string(epoch));
            }
            epoch_loss += step.loss * static_cast<double>(end - start);

            auto params = parameters(model);
            const auto grads = parameters(std::as_const(step.grad));
            for (std::size_t i = 0; i < params.size(); ++i) {
                adam_step(*params[i].value, *grads[i].value, optimizer[i]);
            }
        }
        epoch_loss /= static_cast<double>(order.size());

        const double val = evaluate(model, validation_samples);
        if (!std::isfinite(val)) {
            throw TrainingError("training diverged: non-finite validation MAPE in epoch " +
                                std::to_string(epoch));
        }
        report.epochs.push_back({epoch, epoch_loss, val});
        if (val < report.best_validation_mape) {
            report.best_validation_mape = val;
            report.best_epoch = epoch;
            best = model;
        }
        if (config.patience > 0 && epoch - report.best_epoch >= config.patience) {
            break;
        }
    }
    model = std::move(best);
    return report;
}

void save_weights(const Model& model, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    const auto& s = model.spec;
    const auto params = parameters(model);
    out << "deepdeff-weights 1\n"
        << "kind " << to_string(s.kind) << '\n'
        << "cell " << to_string(s.method.cell) << '\n'
        << "bidirectional " << (s.method.bidirectional ? 1 : 0) << '\n'
        << "timesteps " << s.timesteps << '\n'
        << "basic_features " << s.basic_features << '\n'
        << "derived_features " << s.derived_features << '\n'
        << "hidden " << s.hidden << '\n'
        << "dense " << s.dense << '\n'
        << "parameters " << params.size() << '\n';
    char buf[64];
    for (const auto& p : params) {
        out << "param " << p.name << ' ' << p.value->rows() << ' ' << p.value->cols() << '\n';
        for (std::size_t r = 0; r < p.value->rows(); ++r) {
            const auto row = p.value->row(r);
            for (std::size_t c = 0; c < row.size(); ++c) {
                std::snprintf(buf, sizeof buf, "%a", row[c]);
                out << (c ? " " : "") << buf;
            }
            out << '\n';
        }
    }
    out << "end\n";
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

namespace {

class WeightsReader {
public:
    WeightsReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

    std::string word(const char* what)
    {
        std::string w;
        if (!(in_ >> w)) {
            fail(std::string("truncated before ") + what);
        }
        return w;
    }

    void expect(const std::string& keyword)
    {
        const auto w = word(keyword.c_str());
        if (w != keyword) {
            fail("expected '" + keyword + "', found '" + w + "'");
        }
    }

    std::size_t count(const std::string& keyword)
    {
        expect(keyword);
        return integer(keyword.c_str());
    }

    std::size_t integer(const char* what)
    {
        const std::string keyword(what);
        const auto w = word(what);
        std::size_t pos = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(w, &pos);
        } catch (const std::exception&) {
            fail("bad integer '" + w + "' for " + keyword);
        }
        if (pos != w.size()) {
            fail("bad integer '" + w + "' for " + keyword);
        }
        return static_cast<std::size_t>(v);
    }

    double number()
    {
        const auto w = word("parameter value");
        char* end = nullptr;
        const double v = std::strtod(w.c_str(), &end);
        if (end != w.c_str() + w.size()) {
            fail("bad number '" + w + "'");
        }
        return v;
    }

    [[noreturn]] void fail(const std::string& message) const
    {
        throw FormatError(source_ + ": " + message);
    }

private:
    std::istream& in_;
    std::string source_;
};

} // namespace

Model load_weights(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    WeightsReader reader(in, path.string());
    reader.expect("deepdeff-weights");
    const auto version = reader.word("version");
    if (version != "1") {
        reader.fail("unsupported weights version '" + version + "'");
    }

    ModelSpec spec;
    reader.expect("kind");
    try {
        spec.kind = parse_model_kind(reader.word("kind"));
        reader.expect("cell");
        spec.method.cell = parse_cell_kind(reader.word("cell"));
    } catch (const ConfigError& e) {
        reader.fail(e.what());
    }
    spec.method.bidirectional = reader.count("bidirectional") != 0;
    spec.timesteps = reader.count("timesteps");
    spec.basic_features = reader.count("basic_features");
    spec.derived_features = reader.count("derived_features");
    spec.hidden = reader.count("hidden");
    spec.dense = reader.count("dense");

    Model model;
    try {
        model = zero_model(spec);
    } catch (const Error& e) {
        reader.fail(std::string("invalid architecture: ") + e.what());
    }
    auto params = parameters(model);
    const std::size_t n = reader.count("parameters");
    if (n != params.size()) {
        reader.fail("architecture has " + std::to_string(params.size()) +
                    " parameter matrices but file lists " + std::to_string(n));
    }
    for (auto& p : params) {
        reader.expect("param");
        const auto name = reader.word("parameter name");
        if (name != p.name) {
            reader.fail("expected parameter '" + p.name + "', found '" + name + "'");
        }
        const auto rows = reader.integer("rows");
        const auto cols = reader.integer("cols");
        if (rows != p.value->rows() || cols != p.value->cols()) {
            reader.fail("parameter '" + name + "' has shape " + std::to_string(rows) + "x" +
                        std::to_string(cols) + ", architecture expects " +
                        p.value->shape_string());
        }
        for (auto& v : p.value->values()) {
            v = reader.number();
        }
    }
    reader.expect("end");
    return model;
}

} // namespace deepdeff

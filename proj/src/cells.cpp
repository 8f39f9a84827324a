#include "deepdeff/cells.hpp"

#include "deepdeff/error.hpp"

#include <algorithm>
#include <cmath>

namespace deepdeff {

std::string_view to_string(CellKind kind) noexcept
{
    switch (kind) {
    case CellKind::Rnn:
        return "rnn";
    case CellKind::Gru:
        return "gru";
    case CellKind::Lstm:
        return "lstm";
    }
    return "rnn";
}

CellKind parse_cell_kind(std::string_view name)
{
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (lower == "rnn") {
        return CellKind::Rnn;
    }
    if (lower == "gru") {
        return CellKind::Gru;
    }
    if (lower == "lstm") {
        return CellKind::Lstm;
    }
    throw ConfigError("unknown cell type '" + std::string(name) + "'");
}

std::size_t gate_count(CellKind kind) noexcept
{
    switch (kind) {
    case CellKind::Rnn:
        return 1;
    case CellKind::Gru:
        return 3;
    case CellKind::Lstm:
        return 4;
    }
    return 1;
}

CellParams CellParams::zeros(CellKind kind, std::size_t input_size, std::size_t hidden_size)
{
    CellParams p;
    p.kind = kind;
    p.input_size = input_size;
    p.hidden_size = hidden_size;
    const std::size_t gates = gate_count(kind);
    for (std::size_t g = 0; g < gates; ++g) {
        p.input_weights.emplace_back(input_size, hidden_size);
        p.hidden_weights.emplace_back(hidden_size, hidden_size);
        p.bias.emplace_back(1, hidden_size);
    }
    return p;
}

CellParams CellParams::initialized(CellKind kind, std::size_t input_size, std::size_t hidden_size,
                                   Rng& rng)
{
    CellParams p = zeros(kind, input_size, hidden_size);
    for (std::size_t g = 0; g < p.input_weights.size(); ++g) {
        p.input_weights[g] = glorot_uniform(input_size, hidden_size, rng);
        p.hidden_weights[g] = glorot_uniform(hidden_size, hidden_size, rng);
    }
    if (kind == CellKind::Lstm) {
        p.bias[lstm_gate::forget].fill(1.0);
    }
    return p;
}

void CellParams::validate() const
{
    const std::size_t gates = gate_count(kind);
    if (input_weights.size() != gates || hidden_weights.size() != gates || bias.size() != gates) {
        throw ShapeError(std::string(to_string(kind)) + " cell expects " + std::to_string(gates) +
                         " gate blocks");
    }
    const Matrix wx(input_size, hidden_size);
    const Matrix wh(hidden_size, hidden_size);
    const Matrix b(1, hidden_size);
    for (std::size_t g = 0; g < gates; ++g) {
        require_same_shape(input_weights[g], wx, "cell input weights");
        require_same_shape(hidden_weights[g], wh, "cell hidden weights");
        require_same_shape(bias[g], b, "cell bias");
    }
}

std::size_t CellParams::parameter_count() const noexcept
{
    return gate_count(kind) * (input_size * hidden_size + hidden_size * hidden_size + hidden_size);
}

CellState CellState::zeros(const CellParams& params)
{
    CellState s;
    s.h.assign(params.hidden_size, 0.0);
    if (params.kind == CellKind::Lstm) {
        s.c.assign(params.hidden_size, 0.0);
    }
    return s;
}

namespace {

inline double sigmoid(double x) noexcept
{
    return 1.0 / (1.0 + std::exp(-x));
}

void check_step_shapes(const CellParams& params, std::span<const double> x, const CellState& state)
{
    if (x.size() != params.input_size) {
        throw ShapeError("cell_step: input of length " + std::to_string(x.size()) +
                         " for a cell expecting " + std::to_string(params.input_size));
    }
    if (state.h.size() != params.hidden_size) {
        throw ShapeError("cell_step: hidden state of length " + std::to_string(state.h.size()) +
                         " for hidden size " + std::to_string(params.hidden_size));
    }
    if (params.kind == CellKind::Lstm && state.c.size() != params.hidden_size) {
        throw ShapeError("cell_step: LSTM cell state of length " + std::to_string(state.c.size()) +
                         " for hidden size " + std::to_string(params.hidden_size));
    }
}

// pre = x.Wx[g] + h.Wh[g] + b[g]
std::vector<double> gate_preactivation(const CellParams& p, std::size_t g, std::span<const double> x,
                                       std::span<const double> h)
{
    const auto b = p.bias[g].values();
    std::vector<double> pre(b.begin(), b.end());
    add_vec_mat(x, p.input_weights[g], pre);
    add_vec_mat(h, p.hidden_weights[g], pre);
    return pre;
}

} // namespace

CellState cell_step(const CellParams& params, std::span<const double> x, const CellState& state,
                    StepRecord* record)
{
    check_step_shapes(params, x, state);
    const std::size_t H = params.hidden_size;
    CellState next;
    std::vector<double> gates(gate_count(params.kind) * H);

    switch (params.kind) {
    case CellKind::Rnn: {
        auto pre = gate_preactivation(params, 0, x, state.h);
        next.h.resize(H);
        for (std::size_t j = 0; j < H; ++j) {
            next.h[j] = std::tanh(pre[j]);
            gates[j] = next.h[j];
        }
        break;
    }
    case CellKind::Gru: {
        auto pre_z = gate_preactivation(params, gru_gate::update, x, state.h);
        auto pre_r = gate_preactivation(params, gru_gate::reset, x, state.h);
        std::vector<double> reset_h(H);
        for (std::size_t j = 0; j < H; ++j) {
            pre_z[j] = sigmoid(pre_z[j]);
            pre_r[j] = sigmoid(pre_r[j]);
            reset_h[j] = pre_r[j] * state.h[j];
        }
        const auto bn = params.bias[gru_gate::candidate].values();
        std::vector<double> pre_n(bn.begin(), bn.end());
        add_vec_mat(x, params.input_weights[gru_gate::candidate], pre_n);
        add_vec_mat(reset_h, params.hidden_weights[gru_gate::candidate], pre_n);
        next.h.resize(H);
        for (std::size_t j = 0; j < H; ++j) {
            const double z = pre_z[j];
            const double n = std::tanh(pre_n[j]);
            next.h[j] = z * state.h[j] + (1.0 - z) * n;
            gates[gru_gate::update * H + j] = z;
            gates[gru_gate::reset * H + j] = pre_r[j];
            gates[gru_gate::candidate * H + j] = n;
        }
        break;
    }
    case CellKind::Lstm: {
        next.h.resize(H);
        next.c.resize(H);
        for (std::size_t g = 0; g < 4; ++g) {
            auto pre = gate_preactivation(params, g, x, state.h);
            for (std::size_t j = 0; j < H; ++j) {
                gates[g * H + j] = g == lstm_gate::cell ? std::tanh(pre[j]) : sigmoid(pre[j]);
            }
        }
        for (std::size_t j = 0; j < H; ++j) {
            const double i = gates[lstm_gate::input * H + j];
            const double f = gates[lstm_gate::forget * H + j];
            const double g = gates[lstm_gate::cell * H + j];
            const double o = gates[lstm_gate::output * H + j];
            next.c[j] = f * state.c[j] + i * g;
            next.h[j] = o * std::tanh(next.c[j]);
        }
        break;
    }
    }

    if (record != nullptr) {
        record->x.assign(x.begin(), x.end());
        record->h_prev = state.h;
        record->c_prev = state.c;
        record->gates = std::move(gates);
        record->c = next.c;
        record->h = next.h;
    }
    return next;
}

Matrix SequenceTape::hidden_sequence() const
{
    Matrix out(steps.size(), hidden_size);
    for (const auto& step : steps) {
        std::copy(step.h.begin(), step.h.end(), out.row(step.time_index).begin());
    }
    return out;
}

SequenceResult forward_sequence(const CellParams& params, const Matrix& inputs, Direction direction)
{
    if (inputs.empty() || inputs.rows() == 0) {
        throw InputError("forward_sequence: empty input sequence");
    }
    if (inputs.cols() != params.input_size) {
        throw ShapeError("forward_sequence: inputs " + inputs.shape_string() +
                         " for a cell expecting " + std::to_string(params.input_size) +
                         " features");
    }
    params.validate();

    SequenceResult result;
    result.tape.kind = params.kind;
    result.tape.input_size = params.input_size;
    result.tape.hidden_size = params.hidden_size;
    result.tape.direction = direction;
    result.tape.steps.resize(inputs.rows());

    CellState state = CellState::zeros(params);
    const std::size_t K = inputs.rows();
    for (std::size_t s = 0; s < K; ++s) {
        const std::size_t t = direction == Direction::Forward ? s : K - 1 - s;
        auto& record = result.tape.steps[s];
        record.time_index = t;
        state = cell_step(params, inputs.row(t), state, &record);
    }
    result.last = std::move(state);
    return result;
}

namespace {

void check_tape(const CellParams& params, const SequenceTape& tape)
{
    if (tape.kind != params.kind || tape.input_size != params.input_size ||
        tape.hidden_size != params.hidden_size) {
        throw ShapeError("backprop_sequence: tape recorded for a " +
                         std::string(to_string(tape.kind)) + " cell (" +
                         std::to_string(tape.input_size) + " -> " +
                         std::to_string(tape.hidden_size) + ") but parameters describe a " +
                         std::string(to_string(params.kind)) + " cell (" +
                         std::to_string(params.input_size) + " -> " +
                         std::to_string(params.hidden_size) + ")");
    }
    if (tape.steps.empty()) {
        throw InputError("backprop_sequence: empty tape");
    }
}

// Accumulates the gradients of one step into grads. dh and dc enter as the
// gradient on this step's outputs and leave as the gradient on its inputs
// (h_prev, c_prev).
void backprop_step(const CellParams& p, const StepRecord& step, std::vector<double>& dh,
                   std::vector<double>& dc, CellParams& grads, std::span<double> dx)
{
    const std::size_t H = p.hidden_size;
    std::vector<double> dh_prev(H, 0.0);

    auto accumulate_gate = [&](std::size_t g, std::span<const double> d_pre,
                               std::span<const double> hidden_input) {
        add_outer(step.x, d_pre, grads.input_weights[g]);
        add_outer(hidden_input, d_pre, grads.hidden_weights[g]);
        auto db = grads.bias[g].values();
        for (std::size_t j = 0; j < H; ++j) {
            db[j] += d_pre[j];
        }
        add_mat_vec(p.input_weights[g], d_pre, dx);
    };

    switch (p.kind) {
    case CellKind::Rnn: {
        std::vector<double> d_pre(H);
        for (std::size_t j = 0; j < H; ++j) {
            d_pre[j] = dh[j] * (1.0 - step.h[j] * step.h[j]);
        }
        accumulate_gate(0, d_pre, step.h_prev);
        add_mat_vec(p.hidden_weights[0], d_pre, dh_prev);
        break;
    }
    case CellKind::Gru: {
        const double* z = &step.gates[gru_gate::update * H];
        const double* r = &step.gates[gru_gate::reset * H];
        const double* n = &step.gates[gru_gate::candidate * H];
        std::vector<double> d_pre_z(H), d_pre_r(H), d_pre_n(H), reset_h(H), d_reset_h(H, 0.0);
        for (std::size_t j = 0; j < H; ++j) {
            const double dz = dh[j] * (step.h_prev[j] - n[j]);
            const double dn = dh[j] * (1.0 - z[j]);
            dh_prev[j] += dh[j] * z[j];
            d_pre_z[j] = dz * z[j] * (1.0 - z[j]);
            d_pre_n[j] = dn * (1.0 - n[j] * n[j]);
            reset_h[j] = r[j] * step.h_prev[j];
        }
        accumulate_gate(gru_gate::candidate, d_pre_n, reset_h);
        add_mat_vec(p.hidden_weights[gru_gate::candidate], d_pre_n, d_reset_h);
        for (std::size_t j = 0; j < H; ++j) {
            const double dr = d_reset_h[j] * step.h_prev[j];
            dh_prev[j] += d_reset_h[j] * r[j];
            d_pre_r[j] = dr * r[j] * (1.0 - r[j]);
        }
        accumulate_gate(gru_gate::update, d_pre_z, step.h_prev);
        accumulate_gate(gru_gate::reset, d_pre_r, step.h_prev);
        add_mat_vec(p.hidden_weights[gru_gate::update], d_pre_z, dh_prev);
        add_mat_vec(p.hidden_weights[gru_gate::reset], d_pre_r, dh_prev);
        break;
    }
    case CellKind::Lstm: {
        const double* i = &step.gates[lstm_gate::input * H];
        const double* f = &step.gates[lstm_gate::forget * H];
        const double* g = &step.gates[lstm_gate::cell * H];
        const double* o = &step.gates[lstm_gate::output * H];
        std::vector<double> d_pre(4 * H);
        std::vector<double> dc_prev(H);
        for (std::size_t j = 0; j < H; ++j) {
            const double tc = std::tanh(step.c[j]);
            const double d_o = dh[j] * tc;
            const double d_c = dc[j] + dh[j] * o[j] * (1.0 - tc * tc);
            d_pre[lstm_gate::input * H + j] = d_c * g[j] * i[j] * (1.0 - i[j]);
            d_pre[lstm_gate::forget * H + j] = d_c * step.c_prev[j] * f[j] * (1.0 - f[j]);
            d_pre[lstm_gate::cell * H + j] = d_c * i[j] * (1.0 - g[j] * g[j]);
            d_pre[lstm_gate::output * H + j] = d_o * o[j] * (1.0 - o[j]);
            dc_prev[j] = d_c * f[j];
        }
        for (std::size_t gi = 0; gi < 4; ++gi) {
            const std::span<const double> block(&d_pre[gi * H], H);
            accumulate_gate(gi, block, step.h_prev);
            add_mat_vec(p.hidden_weights[gi], block, dh_prev);
        }
        dc = std::move(dc_prev);
        break;
    }
    }
    dh = std::move(dh_prev);
}

CellGradients backprop_impl(const CellParams& params, const SequenceTape& tape,
                            std::span<const double> d_last_hidden, const Matrix* d_sequence)
{
    check_tape(params, tape);
    const std::size_t H = params.hidden_size;
    const std::size_t K = tape.length();

    CellGradients out{CellParams::zeros(params.kind, params.input_size, H),
                      Matrix(K, params.input_size)};

    std::vector<double> dh(H, 0.0);
    std::vector<double> dc(params.kind == CellKind::Lstm ? H : 0, 0.0);
    if (!d_last_hidden.empty()) {
        std::copy(d_last_hidden.begin(), d_last_hidden.end(), dh.begin());
    }

    for (std::size_t s = K; s-- > 0;) {
        const auto& step = tape.steps[s];
        if (d_sequence != nullptr) {
            const auto d_row = d_sequence->row(step.time_index);
            for (std::size_t j = 0; j < H; ++j) {
                dh[j] += d_row[j];
            }
        }
        backprop_step(params, step, dh, dc, out.params, out.inputs.row(step.time_index));
    }
    return out;
}

} // namespace

CellGradients backprop_sequence(const CellParams& params, const SequenceTape& tape,
                                std::span<const double> d_last_hidden)
{
    if (d_last_hidden.size() != params.hidden_size) {
        throw ShapeError("backprop_sequence: upstream gradient of length " +
                         std::to_string(d_last_hidden.size()) + " for hidden size " +
                         std::to_string(params.hidden_size));
    }
    return backprop_impl(params, tape, d_last_hidden, nullptr);
}

CellGradients backprop_sequence(const CellParams& params, const SequenceTape& tape,
                                const Matrix& d_hidden_sequence)
{
    if (d_hidden_sequence.rows() != tape.length() || d_hidden_sequence.cols() != params.hidden_size) {
        throw ShapeError("backprop_sequence: hidden-sequence gradient " +
                         d_hidden_sequence.shape_string() + " for a tape of length " +
                         std::to_string(tape.length()) + " and hidden size " +
                         std::to_string(params.hidden_size));
    }
    return backprop_impl(params, tape, {}, &d_hidden_sequence);
}

std::vector<double> bidirectional_forward(const CellParams& forward_params,
                                          const CellParams& reverse_params, const Matrix& inputs)
{
    if (forward_params.kind != reverse_params.kind ||
        forward_params.input_size != reverse_params.input_size ||
        forward_params.hidden_size != reverse_params.hidden_size) {
        throw ShapeError("bidirectional_forward: forward and reverse cells disagree on shape");
    }
    const auto fwd = forward_sequence(forward_params, inputs, Direction::Forward);
    const auto rev = forward_sequence(reverse_params, inputs, Direction::Reverse);
    std::vector<double> out = fwd.last.h;
    out.insert(out.end(), rev.last.h.begin(), rev.last.h.end());
    return out;
}

void validate_dropout_rate(double rate)
{
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
    }
}

std::vector<double> dropout_mask(std::size_t n, double rate, Rng& rng)
{
    validate_dropout_rate(rate);
    std::vector<double> mask(n, 1.0);
    if (rate == 0.0) {
        return mask;
    }
    const double keep_scale = 1.0 / (1.0 - rate);
    for (auto& m : mask) {
        m = rng.uniform() < rate ? 0.0 : keep_scale;
    }
    return mask;
}

std::vector<double> dropout(std::span<const double> values, double rate, Rng& rng, bool training)
{
    validate_dropout_rate(rate);
    std::vector<double> out(values.begin(), values.end());
    if (!training || rate == 0.0) {
        return out;
    }
    const auto mask = dropout_mask(values.size(), rate, rng);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] *= mask[i];
    }
    return out;
}

} // namespace deepdeff

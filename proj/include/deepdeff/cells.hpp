#pragma once

#include "deepdeff/numerics.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace deepdeff {

enum class CellKind { Rnn, Gru, Lstm };

std::string_view to_string(CellKind kind) noexcept;
CellKind parse_cell_kind(std::string_view name);

/// Number of gate blocks a cell carries: RNN 1 (candidate), GRU 3 (z, r, n),
/// LSTM 4 (i, f, g, o).
std::size_t gate_count(CellKind kind) noexcept;

namespace gru_gate {
inline constexpr std::size_t update = 0;
inline constexpr std::size_t reset = 1;
inline constexpr std::size_t candidate = 2;
} // namespace gru_gate

namespace lstm_gate {
inline constexpr std::size_t input = 0;
inline constexpr std::size_t forget = 1;
inline constexpr std::size_t cell = 2;
inline constexpr std::size_t output = 3;
} // namespace lstm_gate

/// Weights of one recurrent cell. For every gate g:
///   pre_g = x . input_weights[g] + h . hidden_weights[g] + bias[g]
/// with input_weights[g] of shape (f x H), hidden_weights[g] (H x H) and
/// bias[g] (1 x H).
///
/// RNN:  h' = tanh(pre)
/// GRU:  z = sig(pre_z), r = sig(pre_r),
///       n = tanh(x.Wn + (r*h).Un + bn), h' = z*h + (1-z)*n
/// LSTM: i, f, o = sig(pre), g = tanh(pre_g), c' = f*c + i*g, h' = o*tanh(c')
struct CellParams {
    CellKind kind = CellKind::Rnn;
    std::size_t input_size = 0;
    std::size_t hidden_size = 0;
    std::vector<Matrix> input_weights;
    std::vector<Matrix> hidden_weights;
    std::vector<Matrix> bias;

    /// All-zero parameters of the right shapes.
    static CellParams zeros(CellKind kind, std::size_t input_size, std::size_t hidden_size);
    /// Glorot-uniform weights, zero biases, LSTM forget bias 1.
    static CellParams initialized(CellKind kind, std::size_t input_size, std::size_t hidden_size,
                                  Rng& rng);

    /// Throws ShapeError if any matrix disagrees with the declared sizes.
    void validate() const;
    std::size_t parameter_count() const noexcept;

    friend bool operator==(const CellParams&, const CellParams&) = default;
};

using RnnCellParams = CellParams;
using GruCellParams = CellParams;
using LstmCellParams = CellParams;

/// Hidden state, plus the cell state for LSTM (empty otherwise).
struct CellState {
    std::vector<double> h;
    std::vector<double> c;

    static CellState zeros(const CellParams& params);
};

enum class Direction { Forward, Reverse };

/// One unrolled step: everything backprop needs to revisit it.
struct StepRecord {
    std::size_t time_index = 0; // position in the original (unreversed) input
    std::vector<double> x;
    std::vector<double> h_prev;
    std::vector<double> c_prev;
    std::vector<double> gates; // gate_count x H activations, gate-major
    std::vector<double> c;
    std::vector<double> h;
};

/// Per-invocation record of a forward pass, in processing order.
struct SequenceTape {
    CellKind kind = CellKind::Rnn;
    std::size_t input_size = 0;
    std::size_t hidden_size = 0;
    Direction direction = Direction::Forward;
    std::vector<StepRecord> steps;

    std::size_t length() const noexcept { return steps.size(); }
    /// Hidden outputs as a (K x H) matrix indexed by original time.
    Matrix hidden_sequence() const;
};

struct SequenceResult {
    CellState last;
    SequenceTape tape;
};

/// Single step of the cell from state. Records the step if record != null.
CellState cell_step(const CellParams& params, std::span<const double> x, const CellState& state,
                    StepRecord* record = nullptr);

/// Unrolls the cell over the rows of inputs (K x f), starting from a zero
/// state. Reverse processes row K-1 first.
SequenceResult forward_sequence(const CellParams& params, const Matrix& inputs,
                                Direction direction = Direction::Forward);

struct CellGradients {
    CellParams params;
    Matrix inputs; // (K x f), original time order
};

/// BPTT from a gradient on the final hidden state of the processed order.
CellGradients backprop_sequence(const CellParams& params, const SequenceTape& tape,
                                std::span<const double> d_last_hidden);

/// BPTT from gradients on every hidden output, given as (K x H) indexed by
/// original time. Used when a layer feeds its whole sequence upward.
CellGradients backprop_sequence(const CellParams& params, const SequenceTape& tape,
                                const Matrix& d_hidden_sequence);

/// [forward final state | reverse final state], length 2H.
std::vector<double> bidirectional_forward(const CellParams& forward_params,
                                          const CellParams& reverse_params,
                                          const Matrix& inputs);

/// Scale factors for inverted dropout: each entry 0 with probability rate,
/// otherwise 1 / (1 - rate).
std::vector<double> dropout_mask(std::size_t n, double rate, Rng& rng);

/// Inverted dropout. Identity when training is false or rate is 0.
std::vector<double> dropout(std::span<const double> values, double rate, Rng& rng, bool training);

/// Throws ConfigError unless 0 <= rate < 1.
void validate_dropout_rate(double rate);

} // namespace deepdeff

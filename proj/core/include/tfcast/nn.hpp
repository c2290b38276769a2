#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tfcast/linalg.hpp"
#include "tfcast/random.hpp"

namespace tfcast {

/// A trainable matrix and the gradient accumulated into it.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Matrix value);

  void zero_grad() { grad.fill(0.0); }

  std::string name;
  Matrix value;
  Matrix grad;
};

enum class Activation { linear, relu };
enum class Mode { train, infer };

/// Time-major input: one (features x batch) matrix per step.
using Sequence = std::vector<Matrix>;

// ---------------------------------------------------------------------------
// Dense

struct DenseTape {
  Matrix input;
  Matrix output;
  Activation activation = Activation::linear;
};

struct DenseStep {
  Matrix output;
  DenseTape tape;
};

/// activation(W·x + b), b broadcast across the batch columns.
DenseStep dense_forward(const Parameter& weight, const Parameter& bias, const Matrix& x,
                        Activation activation);
/// Accumulates into weight.grad / bias.grad and returns dL/dx.
Matrix dense_backward(Parameter& weight, Parameter& bias, const DenseTape& tape,
                      const Matrix& dy);

// ---------------------------------------------------------------------------
// Vanilla RNN cell: h_t = tanh(W · [h_{t-1}; x_t]), W of shape (hidden, hidden + input).

struct RnnTape {
  Matrix input;  // [h_prev; x]
  Matrix h;
};

struct RnnStep {
  Matrix h;
  RnnTape tape;
};

struct RnnCellGrads {
  Matrix dh_prev;
  Matrix dx;
};

RnnStep rnn_cell_forward(const Parameter& weight, const Matrix& h_prev, const Matrix& x);
RnnCellGrads rnn_cell_backward(Parameter& weight, const RnnTape& tape, const Matrix& dh);

// ---------------------------------------------------------------------------
// LSTM cell. The fused weight has shape (4·hidden, hidden + input) with gate
// row blocks in the order i, f, o, g; the bias is a (4·hidden x 1) column.

struct LstmState {
  Matrix h;  // hidden x batch
  Matrix c;  // hidden x batch

  static LstmState zeros(std::size_t hidden, std::size_t batch) {
    return {Matrix(hidden, batch), Matrix(hidden, batch)};
  }
};

struct LstmTape {
  Matrix input;  // [h_prev; x]
  Matrix i, f, o, g;
  Matrix c_prev;
  Matrix c;
  Matrix tanh_c;
};

struct LstmStep {
  LstmState state;
  LstmTape tape;
};

struct LstmCellGrads {
  Matrix dh_prev;
  Matrix dc_prev;
  Matrix dx;
};

enum class LstmGate : std::size_t { input = 0, forget = 1, output = 2, candidate = 3 };

LstmStep lstm_cell_forward(const Parameter& weight, const Parameter& bias,
                           const LstmState& prev, const Matrix& x);
/// dh and dc are the gradients arriving at h_t and c_t from later steps and
/// layers above. Weight and bias gradients are accumulated, not overwritten.
LstmCellGrads lstm_cell_backward(Parameter& weight, Parameter& bias, const LstmTape& tape,
                                 const Matrix& dh, const Matrix& dc);

// ---------------------------------------------------------------------------
// Inverted dropout.

struct DropoutResult {
  Matrix output;
  Matrix mask;  // 0 for dropped entries, 1/(1-p) for survivors
};

DropoutResult dropout_forward(const Matrix& x, double p, Mode mode, Rng& rng);

// ---------------------------------------------------------------------------
// Layers. A layer owns its parameters; tapes are owned by the caller so a
// frozen layer can run inference from several threads.

class DenseLayer {
 public:
  using Tape = DenseTape;

  DenseLayer(const std::string& name, std::size_t in, std::size_t out, Activation activation,
             Rng& rng);

  Matrix forward(const Matrix& x, Tape* tape) const;
  Matrix backward(const Tape& tape, const Matrix& dy);

  std::size_t input_size() const { return weight_.value.cols(); }
  std::size_t output_size() const { return weight_.value.rows(); }
  Activation activation() const { return activation_; }

  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }
  const Parameter& weight() const { return weight_; }
  const Parameter& bias() const { return bias_; }

 private:
  Parameter weight_;
  Parameter bias_;
  Activation activation_;
};

class RnnLayer {
 public:
  using Tape = std::vector<RnnTape>;

  RnnLayer(const std::string& name, std::size_t in, std::size_t hidden, Rng& rng);

  /// Hidden state after every step, starting from h₀ = 0.
  Sequence forward(const Sequence& xs, Tape* tape) const;
  /// dhs[t] is the gradient reaching h_t from outside the recurrence. Returns dL/dx_t.
  Sequence backward(const Tape& tape, const Sequence& dhs);

  std::size_t input_size() const { return weight_.value.cols() - hidden_size(); }
  std::size_t hidden_size() const { return weight_.value.rows(); }

  std::vector<Parameter*> parameters() { return {&weight_}; }
  Parameter& weight() { return weight_; }

 private:
  Parameter weight_;
};

class LstmLayer {
 public:
  using Tape = std::vector<LstmTape>;

  /// Weights uniform in ±1/√(hidden + input); forget-gate bias 1, other biases 0.
  LstmLayer(const std::string& name, std::size_t in, std::size_t hidden, Rng& rng);

  Sequence forward(const Sequence& xs, Tape* tape) const;
  Sequence backward(const Tape& tape, const Sequence& dhs);

  std::size_t input_size() const { return weight_.value.cols() - hidden_size(); }
  std::size_t hidden_size() const { return weight_.value.rows() / 4; }

  std::vector<Parameter*> parameters() { return {&weight_, &bias_}; }
  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }

 private:
  Parameter weight_;
  Parameter bias_;
};

}  // namespace tfcast

#include "tfcast/nn.hpp"

#include <cmath>

#include "tfcast/errors.hpp"

namespace tfcast {
namespace {

[[noreturn]] void dim_error(const std::string& what) { throw DimensionError(what); }

Matrix stack_gates(const Matrix& a, const Matrix& b, const Matrix& c, const Matrix& d) {
  Matrix out(a.rows() * 4, a.cols());
  out.set_row_block(0, a);
  out.set_row_block(a.rows(), b);
  out.set_row_block(2 * a.rows(), c);
  out.set_row_block(3 * a.rows(), d);
  return out;
}

void check_sequence(const Sequence& xs, std::size_t input_size, const std::string& layer) {
  if (xs.empty()) throw UsageError(layer + ": empty input sequence");
  for (const auto& x : xs) {
    if (x.rows() != input_size || x.cols() != xs.front().cols()) {
      dim_error(layer + ": step input " + x.shape_string() + " does not match input size " +
                std::to_string(input_size));
    }
  }
}

}  // namespace

Parameter::Parameter(std::string name_, Matrix value_)
    : name(std::move(name_)), value(std::move(value_)), grad(value.rows(), value.cols()) {}

// ---------------------------------------------------------------------------

DenseStep dense_forward(const Parameter& weight, const Parameter& bias, const Matrix& x,
                        Activation activation) {
  if (weight.value.cols() != x.rows()) {
    dim_error("dense " + weight.name + ": weight " + weight.value.shape_string() +
              " cannot multiply input " + x.shape_string());
  }
  if (bias.value.rows() != weight.value.rows() || bias.value.cols() != 1) {
    dim_error("dense " + weight.name + ": bias " + bias.value.shape_string() +
              " does not match weight " + weight.value.shape_string());
  }
  Matrix z = add_column(matmul(weight.value, x), bias.value);
  if (activation == Activation::relu) z = relu(z);
  DenseStep step;
  step.output = z;
  step.tape = DenseTape{x, std::move(z), activation};
  return step;
}

Matrix dense_backward(Parameter& weight, Parameter& bias, const DenseTape& tape,
                      const Matrix& dy) {
  if (!dy.same_shape(tape.output)) {
    dim_error("dense " + weight.name + " backward: gradient " + dy.shape_string() +
              " does not match output " + tape.output.shape_string());
  }
  Matrix dz = dy;
  if (tape.activation == Activation::relu) {
    for (std::size_t k = 0; k < dz.size(); ++k)
      if (tape.output[k] <= 0.0) dz[k] = 0.0;
  }
  matmul_nt_accumulate(dz, tape.input, weight.grad);
  bias.grad += row_sums(dz);
  return matmul_tn(weight.value, dz);
}

// ---------------------------------------------------------------------------

RnnStep rnn_cell_forward(const Parameter& weight, const Matrix& h_prev, const Matrix& x) {
  const std::size_t hidden = weight.value.rows();
  if (h_prev.rows() != hidden || weight.value.cols() != hidden + x.rows() ||
      h_prev.cols() != x.cols()) {
    dim_error("rnn cell " + weight.name + ": weight " + weight.value.shape_string() +
              " incompatible with h_prev " + h_prev.shape_string() + " and x " +
              x.shape_string());
  }
  RnnStep step;
  step.tape.input = concat_rows(h_prev, x);
  step.h = tanh(matmul(weight.value, step.tape.input));
  step.tape.h = step.h;
  return step;
}

RnnCellGrads rnn_cell_backward(Parameter& weight, const RnnTape& tape, const Matrix& dh) {
  if (!dh.same_shape(tape.h)) {
    dim_error("rnn cell " + weight.name + " backward: gradient " + dh.shape_string() +
              " does not match state " + tape.h.shape_string());
  }
  const Matrix dz = hadamard(dh, tanh_derivative_from_output(tape.h));
  matmul_nt_accumulate(dz, tape.input, weight.grad);
  const Matrix dinput = matmul_tn(weight.value, dz);
  const std::size_t hidden = weight.value.rows();
  return {dinput.row_block(0, hidden), dinput.row_block(hidden, dinput.rows() - hidden)};
}

// ---------------------------------------------------------------------------

LstmStep lstm_cell_forward(const Parameter& weight, const Parameter& bias,
                           const LstmState& prev, const Matrix& x) {
  const std::size_t rows = weight.value.rows();
  if (rows == 0 || rows % 4 != 0) {
    dim_error("lstm cell " + weight.name + ": fused weight " + weight.value.shape_string() +
              " must have 4·hidden rows");
  }
  const std::size_t hidden = rows / 4;
  if (weight.value.cols() != hidden + x.rows() || prev.h.rows() != hidden ||
      !prev.h.same_shape(prev.c) || prev.h.cols() != x.cols()) {
    dim_error("lstm cell " + weight.name + ": weight " + weight.value.shape_string() +
              " incompatible with h_prev " + prev.h.shape_string() + ", c_prev " +
              prev.c.shape_string() + " and x " + x.shape_string());
  }
  if (bias.value.rows() != rows || bias.value.cols() != 1) {
    dim_error("lstm cell " + weight.name + ": bias " + bias.value.shape_string() +
              " must be (" + std::to_string(rows) + "x1)");
  }

  LstmStep step;
  LstmTape& t = step.tape;
  t.input = concat_rows(prev.h, x);
  const Matrix z = add_column(matmul(weight.value, t.input), bias.value);
  t.i = sigmoid(z.row_block(0, hidden));
  t.f = sigmoid(z.row_block(hidden, hidden));
  t.o = sigmoid(z.row_block(2 * hidden, hidden));
  t.g = tanh(z.row_block(3 * hidden, hidden));
  t.c_prev = prev.c;
  t.c = hadamard(t.f, prev.c) + hadamard(t.i, t.g);
  t.tanh_c = tanh(t.c);
  step.state.h = hadamard(t.o, t.tanh_c);
  step.state.c = t.c;
  return step;
}

LstmCellGrads lstm_cell_backward(Parameter& weight, Parameter& bias, const LstmTape& tape,
                                 const Matrix& dh, const Matrix& dc) {
  if (!dh.same_shape(tape.c) || !dc.same_shape(tape.c)) {
    dim_error("lstm cell " + weight.name + " backward: gradients " + dh.shape_string() + ", " +
              dc.shape_string() + " do not match state " + tape.c.shape_string());
  }
  const std::size_t hidden = tape.c.rows();

  const Matrix d_o = hadamard(dh, tape.tanh_c);
  const Matrix dc_total =
      dc + hadamard(hadamard(dh, tape.o), tanh_derivative_from_output(tape.tanh_c));
  const Matrix d_f = hadamard(dc_total, tape.c_prev);
  const Matrix d_i = hadamard(dc_total, tape.g);
  const Matrix d_g = hadamard(dc_total, tape.i);

  const Matrix dz = stack_gates(hadamard(d_i, sigmoid_derivative_from_output(tape.i)),
                                hadamard(d_f, sigmoid_derivative_from_output(tape.f)),
                                hadamard(d_o, sigmoid_derivative_from_output(tape.o)),
                                hadamard(d_g, tanh_derivative_from_output(tape.g)));

  matmul_nt_accumulate(dz, tape.input, weight.grad);
  bias.grad += row_sums(dz);

  const Matrix dinput = matmul_tn(weight.value, dz);
  LstmCellGrads grads;
  grads.dh_prev = dinput.row_block(0, hidden);
  grads.dx = dinput.row_block(hidden, dinput.rows() - hidden);
  grads.dc_prev = hadamard(dc_total, tape.f);
  return grads;
}

// ---------------------------------------------------------------------------

DropoutResult dropout_forward(const Matrix& x, double p, Mode mode, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw UsageError("dropout: probability " + std::to_string(p) + " outside [0, 1)");
  }
  if (mode == Mode::infer || p == 0.0) return {x, Matrix(x.rows(), x.cols(), 1.0)};
  const double keep_scale = 1.0 / (1.0 - p);
  Matrix mask(x.rows(), x.cols());
  for (double& m : mask.values()) m = rng.uniform() < p ? 0.0 : keep_scale;
  return {hadamard(x, mask), std::move(mask)};
}

// ---------------------------------------------------------------------------

DenseLayer::DenseLayer(const std::string& name, std::size_t in, std::size_t out,
                       Activation activation, Rng& rng)
    : weight_(name + ".weight",
              rng.uniform_matrix(out, in, -1.0 / std::sqrt(static_cast<double>(in)),
                                 1.0 / std::sqrt(static_cast<double>(in)))),
      bias_(name + ".bias", Matrix(out, 1)),
      activation_(activation) {}

Matrix DenseLayer::forward(const Matrix& x, Tape* tape) const {
  DenseStep step = dense_forward(weight_, bias_, x, activation_);
  if (tape) *tape = std::move(step.tape);
  return std::move(step.output);
}

Matrix DenseLayer::backward(const Tape& tape, const Matrix& dy) {
  return dense_backward(weight_, bias_, tape, dy);
}

RnnLayer::RnnLayer(const std::string& name, std::size_t in, std::size_t hidden, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in + hidden));
  weight_ = Parameter(name + ".weight", rng.uniform_matrix(hidden, hidden + in, -bound, bound));
}

Sequence RnnLayer::forward(const Sequence& xs, Tape* tape) const {
  check_sequence(xs, input_size(), weight_.name);
  if (tape) tape->clear();
  Sequence hs;
  hs.reserve(xs.size());
  Matrix h(hidden_size(), xs.front().cols());
  for (const auto& x : xs) {
    RnnStep step = rnn_cell_forward(weight_, h, x);
    h = std::move(step.h);
    hs.push_back(h);
    if (tape) tape->push_back(std::move(step.tape));
  }
  return hs;
}

Sequence RnnLayer::backward(const Tape& tape, const Sequence& dhs) {
  if (tape.size() != dhs.size()) {
    throw StateError(weight_.name + ": backward over " + std::to_string(dhs.size()) +
                     " steps but tape holds " + std::to_string(tape.size()));
  }
  Sequence dxs(tape.size());
  Matrix carry(hidden_size(), tape.empty() ? 0 : tape.front().h.cols());
  for (std::size_t t = tape.size(); t-- > 0;) {
    RnnCellGrads g = rnn_cell_backward(weight_, tape[t], dhs[t] + carry);
    carry = std::move(g.dh_prev);
    dxs[t] = std::move(g.dx);
  }
  return dxs;
}

LstmLayer::LstmLayer(const std::string& name, std::size_t in, std::size_t hidden, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in + hidden));
  weight_ =
      Parameter(name + ".weight", rng.uniform_matrix(4 * hidden, hidden + in, -bound, bound));
  Matrix b(4 * hidden, 1);
  for (std::size_t k = hidden; k < 2 * hidden; ++k) b[k] = 1.0;
  bias_ = Parameter(name + ".bias", std::move(b));
}

Sequence LstmLayer::forward(const Sequence& xs, Tape* tape) const {
  check_sequence(xs, input_size(), weight_.name);
  if (tape) tape->clear();
  Sequence hs;
  hs.reserve(xs.size());
  LstmState state = LstmState::zeros(hidden_size(), xs.front().cols());
  for (const auto& x : xs) {
    LstmStep step = lstm_cell_forward(weight_, bias_, state, x);
    state = std::move(step.state);
    hs.push_back(state.h);
    if (tape) tape->push_back(std::move(step.tape));
  }
  return hs;
}

Sequence LstmLayer::backward(const Tape& tape, const Sequence& dhs) {
  if (tape.size() != dhs.size()) {
    throw StateError(weight_.name + ": backward over " + std::to_string(dhs.size()) +
                     " steps but tape holds " + std::to_string(tape.size()));
  }
  Sequence dxs(tape.size());
  const std::size_t batch = tape.empty() ? 0 : tape.front().c.cols();
  Matrix dh_carry(hidden_size(), batch);
  Matrix dc_carry(hidden_size(), batch);
  for (std::size_t t = tape.size(); t-- > 0;) {
    LstmCellGrads g = lstm_cell_backward(weight_, bias_, tape[t], dhs[t] + dh_carry, dc_carry);
    dh_carry = std::move(g.dh_prev);
    dc_carry = std::move(g.dc_prev);
    dxs[t] = std::move(g.dx);
  }
  return dxs;
}

}  // namespace tfcast

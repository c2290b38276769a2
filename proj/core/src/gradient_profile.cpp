#include "tfcast/gradient_profile.hpp"

#include <cmath>

#include "tfcast/errors.hpp"
#include "tfcast/nn.hpp"

namespace tfcast {

Matrix scaled_orthogonal(std::size_t n, double scale, Rng& rng) {
  Matrix q = rng.normal_matrix(n, n);
  // Modified Gram-Schmidt over columns.
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < j; ++k) {
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += q(i, j) * q(i, k);
      for (std::size_t i = 0; i < n; ++i) q(i, j) -= dot * q(i, k);
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) norm += q(i, j) * q(i, j);
    norm = std::sqrt(norm);
    if (norm < 1e-12) throw NumericError("scaled_orthogonal: degenerate draw");
    for (std::size_t i = 0; i < n; ++i) q(i, j) /= norm;
  }
  q *= scale;
  return q;
}

std::vector<double> rnn_gradient_norm_profile(CellKind cell, double spectral_scale,
                                              std::size_t steps,
                                              const GradientProfileOptions& options) {
  if (steps < 2) throw UsageError("gradient profile: need at least 2 steps");
  const std::size_t hidden = options.hidden_size;
  const std::size_t input = options.input_size;
  Rng rng(options.seed);

  Sequence xs;
  for (std::size_t t = 0; t < steps; ++t)
    xs.push_back(rng.uniform_matrix(input, 1, -options.input_amplitude, options.input_amplitude));
  const Matrix readout = rng.normal_matrix(hidden, 1);

  std::vector<double> norms;
  norms.reserve(steps);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden + input));

  if (cell == CellKind::rnn) {
    Matrix w(hidden, hidden + input);
    const Matrix recurrent = scaled_orthogonal(hidden, spectral_scale, rng);
    const Matrix input_w = rng.uniform_matrix(hidden, input, -bound, bound);
    for (std::size_t i = 0; i < hidden; ++i) {
      for (std::size_t j = 0; j < hidden; ++j) w(i, j) = recurrent(i, j);
      for (std::size_t j = 0; j < input; ++j) w(i, hidden + j) = input_w(i, j);
    }
    Parameter weight("profile.rnn", std::move(w));

    std::vector<RnnTape> tape;
    Matrix h(hidden, 1);
    for (const auto& x : xs) {
      RnnStep s = rnn_cell_forward(weight, h, x);
      h = std::move(s.h);
      tape.push_back(std::move(s.tape));
    }
    // loss = readoutᵀ h_T, so ∂loss/∂h_T = readout.
    Matrix dh = readout;
    for (std::size_t t = steps; t-- > 0;) {
      norms.push_back(frobenius_norm(dh));
      dh = rnn_cell_backward(weight, tape[t], dh).dh_prev;
    }
    return norms;
  }

  Matrix w = rng.uniform_matrix(4 * hidden, hidden + input, -bound, bound);
  // Scale the recurrent column block (all four gates) to the requested norm.
  Matrix recurrent(4 * hidden, hidden);
  for (std::size_t i = 0; i < 4 * hidden; ++i)
    for (std::size_t j = 0; j < hidden; ++j) recurrent(i, j) = w(i, j);
  const double current = spectral_norm(recurrent);
  for (std::size_t i = 0; i < 4 * hidden; ++i)
    for (std::size_t j = 0; j < hidden; ++j) w(i, j) *= spectral_scale / current;
  Matrix b(4 * hidden, 1);
  for (std::size_t k = hidden; k < 2 * hidden; ++k) b[k] = options.forget_bias;
  Parameter weight("profile.lstm.weight", std::move(w));
  Parameter bias("profile.lstm.bias", std::move(b));

  std::vector<LstmTape> tape;
  LstmState state = LstmState::zeros(hidden, 1);
  for (const auto& x : xs) {
    LstmStep s = lstm_cell_forward(weight, bias, state, x);
    state = std::move(s.state);
    tape.push_back(std::move(s.tape));
  }
  Matrix dh = readout;
  Matrix dc(hidden, 1);
  for (std::size_t t = steps; t-- > 0;) {
    norms.push_back(frobenius_norm(dh));
    LstmCellGrads g = lstm_cell_backward(weight, bias, tape[t], dh, dc);
    dh = std::move(g.dh_prev);
    dc = std::move(g.dc_prev);
  }
  return norms;
}

}  // namespace tfcast

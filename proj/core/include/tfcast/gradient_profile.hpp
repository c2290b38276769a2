#pragma once

#include <cstdint>
#include <vector>

#include "tfcast/linalg.hpp"
#include "tfcast/random.hpp"

namespace tfcast {

enum class CellKind { rnn, lstm };

struct GradientProfileOptions {
  std::size_t hidden_size = 16;
  std::size_t input_size = 1;
  /// Inputs are drawn uniformly from ±input_amplitude. The default keeps the
  /// vanilla RNN near its small-signal regime, where the backward pass is the
  /// repeated product of Wᵀ with tanh' ≈ 1.
  double input_amplitude = 1e-4;
  /// Forget-gate bias for the LSTM variant.
  double forget_bias = 3.0;
  std::uint64_t seed = 0;
};

/// Random (n x n) matrix whose singular values all equal `scale`
/// (scaled orthogonal matrix, Gram-Schmidt on a Gaussian draw).
Matrix scaled_orthogonal(std::size_t n, double scale, Rng& rng);

/// Runs one cell over `steps` steps with the recurrent weight block scaled to
/// spectral norm `spectral_scale`, then backpropagates a loss on the final
/// hidden state. Returns ‖∂loss/∂h_t‖ for t = steps, steps-1, ..., 1.
std::vector<double> rnn_gradient_norm_profile(CellKind cell, double spectral_scale,
                                              std::size_t steps,
                                              const GradientProfileOptions& options = {});

}  // namespace tfcast

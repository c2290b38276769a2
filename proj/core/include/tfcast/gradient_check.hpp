#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "tfcast/models.hpp"

namespace tfcast {

struct GradCheckOptions {
  double tolerance = 1e-4;
  /// Central-difference step.
  double step = 1e-5;
  std::size_t batch = 2;
  std::uint64_t seed = 0;
  /// Denominator floor of the relative error, so entries whose true gradient
  /// is ~0 are judged by absolute error instead.
  double denominator_floor = 1e-6;
  /// Uniform ±jitter added to every parameter before checking, so zero-init
  /// biases do not leave ReLU units sitting exactly on their kink.
  double jitter = 0.1;
};

struct ParameterCheck {
  std::string name;
  std::size_t entries = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

struct GradCheckReport {
  std::vector<ParameterCheck> parameters;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

/// |a − n| / max(|a|, |n|, floor)
double relative_error(double analytic, double numeric, double floor);

using ModelFactory = std::function<std::unique_ptr<Model>()>;

/// Builds a model, feeds it a random sequence of topology().window_len steps
/// and compares every analytic gradient entry of the MSE loss with a central
/// finite difference. The forward passes run in train mode with a re-seeded
/// generator so dropout masks are identical across perturbations.
GradCheckReport gradient_check(const ModelFactory& factory, const GradCheckOptions& options = {});

}  // namespace tfcast

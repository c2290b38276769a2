#pragma once

#include <cstddef>
#include <span>

namespace tfcast {

struct MetricsReport {
  double mae = 0.0;
  double mse = 0.0;
  double rmse = 0.0;
  std::size_t n = 0;
};

/// MAE, MSE and RMSE = √MSE of predicted vs actual. Throws UsageError on
/// empty or mismatched inputs.
MetricsReport compute_metrics(std::span<const double> predicted, std::span<const double> actual);

}  // namespace tfcast

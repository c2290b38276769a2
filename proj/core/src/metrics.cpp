#include "tfcast/metrics.hpp"

#include <cmath>
#include <string>

#include "tfcast/errors.hpp"

namespace tfcast {

MetricsReport compute_metrics(std::span<const double> predicted, std::span<const double> actual) {
  if (predicted.size() != actual.size()) {
    throw UsageError("metrics: " + std::to_string(predicted.size()) + " predictions for " +
                     std::to_string(actual.size()) + " targets");
  }
  if (predicted.empty()) throw UsageError("metrics: empty split");
  double abs_sum = 0.0, sq_sum = 0.0;
  for (std::size_t k = 0; k < predicted.size(); ++k) {
    const double r = predicted[k] - actual[k];
    abs_sum += std::abs(r);
    sq_sum += r * r;
  }
  MetricsReport m;
  m.n = predicted.size();
  const auto n = static_cast<double>(m.n);
  m.mae = abs_sum / n;
  m.mse = sq_sum / n;
  m.rmse = std::sqrt(m.mse);
  return m;
}

}  // namespace tfcast

#include "tfcast/gradient_check.hpp"

#include <algorithm>
#include <cmath>

#include "tfcast/errors.hpp"

namespace tfcast {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport gradient_check(const ModelFactory& factory, const GradCheckOptions& options) {
  auto model = factory();
  if (!model) throw UsageError("gradient_check: factory returned no model");
  const Topology& topo = model->topology();

  Rng data_rng(options.seed);
  Sequence xs;
  for (std::size_t t = 0; t < topo.window_len; ++t)
    xs.push_back(data_rng.uniform_matrix(topo.input_size, options.batch, -1.0, 1.0));
  const Matrix target = data_rng.uniform_matrix(1, options.batch, -1.0, 1.0);
  const std::uint64_t dropout_seed = stream_seed(options.seed, 7);
  if (options.jitter > 0.0) {
    for (Parameter* p : model->parameters()) p->value += data_rng.uniform_matrix(
        p->value.rows(), p->value.cols(), -options.jitter, options.jitter);
  }

  auto loss_at = [&]() {
    Rng rng(dropout_seed);
    const Matrix prediction = model->forward(xs, Mode::train, rng);
    model->clear_tape();
    return mse_loss(prediction, target);
  };

  model->zero_grad();
  {
    Rng rng(dropout_seed);
    const Matrix prediction = model->forward(xs, Mode::train, rng);
    bptt(*model, prediction, target);
  }

  GradCheckReport report;
  report.tolerance = options.tolerance;
  for (Parameter* p : model->parameters()) {
    ParameterCheck check;
    check.name = p->name;
    check.entries = p->value.size();
    for (std::size_t k = 0; k < p->value.size(); ++k) {
      const double original = p->value[k];
      p->value[k] = original + options.step;
      const double plus = loss_at();
      p->value[k] = original - options.step;
      const double minus = loss_at();
      p->value[k] = original;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double analytic = p->grad[k];
      check.max_abs_error = std::max(check.max_abs_error, std::abs(analytic - numeric));
      check.max_rel_error = std::max(check.max_rel_error,
                                     relative_error(analytic, numeric, options.denominator_floor));
    }
    report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
    report.parameters.push_back(std::move(check));
  }
  report.passed = report.max_rel_error <= options.tolerance;
  return report;
}

}  // namespace tfcast

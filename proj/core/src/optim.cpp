#include "tfcast/optim.hpp"

#include <algorithm>
#include <cmath>

#include "tfcast/errors.hpp"

namespace tfcast {

double global_grad_norm(std::span<Parameter* const> params) {
  std::vector<const Matrix*> grads;
  grads.reserve(params.size());
  for (const Parameter* p : params) grads.push_back(&p->grad);
  return l2_norm(grads);
}

double clip_gradients(std::span<Parameter* const> params, const ClipPolicy& policy) {
  for (const Parameter* p : params) {
    if (!p->grad.all_finite()) {
      throw NumericError("non-finite gradient in parameter " + p->name);
    }
  }
  if (!policy.enabled) return 1.0;
  if (!(policy.threshold > 0.0)) throw UsageError("clip threshold must be positive");
  const double norm = global_grad_norm(params);
  if (norm <= policy.threshold) return 1.0;
  const double scale = policy.threshold / norm;
  for (Parameter* p : params) p->grad *= scale;
  return scale;
}

std::string to_string(OptimizerKind kind) {
  return kind == OptimizerKind::sgd ? "sgd" : "adam";
}

OptimizerKind parse_optimizer_kind(const std::string& text) {
  if (text == "sgd") return OptimizerKind::sgd;
  if (text == "adam") return OptimizerKind::adam;
  throw UsageError("unknown optimizer '" + text + "' (expected sgd or adam)");
}

// ---------------------------------------------------------------------------

Optimizer::Optimizer(OptimizerOptions options) : options_(options) {
  if (!(options_.learning_rate >= 0.0)) throw UsageError("learning rate must be non-negative");
}

void Optimizer::attach(std::span<Parameter* const> params) {
  shapes_.clear();
  for (const Parameter* p : params) shapes_.emplace_back(p->value.rows(), p->value.cols());
  init_state(params);
  steps_ = 0;
  attached_ = true;
}

void Optimizer::step(std::span<Parameter* const> params) {
  if (!attached_) throw StateError("optimizer step before attach()");
  if (params.size() != shapes_.size()) {
    throw StateError("optimizer attached to " + std::to_string(shapes_.size()) +
                     " parameters, stepped with " + std::to_string(params.size()));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& v = params[k]->value;
    if (v.rows() != shapes_[k].first || v.cols() != shapes_[k].second ||
        !params[k]->grad.same_shape(v)) {
      throw StateError("optimizer state does not match parameter " + params[k]->name);
    }
  }
  ++steps_;
  update(params);
}

void Sgd::init_state(std::span<Parameter* const> params) {
  velocity_.clear();
  for (const Parameter* p : params) velocity_.emplace_back(p->value.rows(), p->value.cols());
}

void Sgd::update(std::span<Parameter* const> params) {
  const double lr = options_.learning_rate;
  const double mu = options_.momentum;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto w = params[k]->value.values();
    auto g = params[k]->grad.values();
    auto buf = velocity_[k].values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (mu != 0.0) {
        buf[i] = mu * buf[i] + g[i];
        w[i] -= lr * buf[i];
      } else {
        w[i] -= lr * g[i];
      }
    }
  }
}

void Adam::init_state(std::span<Parameter* const> params) {
  m_.clear();
  v_.clear();
  for (const Parameter* p : params) {
    m_.emplace_back(p->value.rows(), p->value.cols());
    v_.emplace_back(p->value.rows(), p->value.cols());
  }
}

void Adam::update(std::span<Parameter* const> params) {
  const double b1 = options_.beta1, b2 = options_.beta2, eps = options_.epsilon;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(b1, t);
  const double c2 = 1.0 - std::pow(b2, t);
  const double lr = options_.learning_rate;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto w = params[k]->value.values();
    auto g = params[k]->grad.values();
    auto m = m_[k].values();
    auto v = v_[k].values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      w[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

std::unique_ptr<Optimizer> make_optimizer(OptimizerKind kind, const OptimizerOptions& options) {
  if (kind == OptimizerKind::sgd) return std::make_unique<Sgd>(options);
  return std::make_unique<Adam>(options);
}

// ---------------------------------------------------------------------------

PlateauScheduler::PlateauScheduler(PlateauOptions options) : options_(options) {
  if (!(options_.factor > 0.0 && options_.factor < 1.0))
    throw UsageError("plateau factor must lie in (0, 1)");
  if (options_.patience < 1) throw UsageError("plateau patience must be at least 1");
}

double PlateauScheduler::observe(double val_loss, double lr) {
  if (val_loss < best_ - options_.min_delta) {
    best_ = val_loss;
    wait_ = 0;
    return lr;
  }
  if (++wait_ < options_.patience) return lr;
  wait_ = 0;
  if (lr <= options_.min_lr) return lr;
  return std::max(options_.min_lr, lr * options_.factor);
}

double reduce_lr_on_plateau(double lr, std::span<const double> val_loss_history,
                            const PlateauOptions& options) {
  PlateauScheduler scheduler(options);
  for (double loss : val_loss_history) lr = scheduler.observe(loss, lr);
  return lr;
}

}  // namespace tfcast

#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tfcast/nn.hpp"

namespace tfcast {

/// Global L2-norm gradient clipping.
struct ClipPolicy {
  double threshold = 1.0;
  bool enabled = true;
};

double global_grad_norm(std::span<Parameter* const> params);

/// Rescales every gradient by threshold / ‖g‖ when the global norm ‖g‖
/// exceeds the threshold, keeping the joint direction. Returns the scale
/// applied (1.0 when untouched). Throws NumericError naming the first
/// parameter holding a non-finite gradient entry.
double clip_gradients(std::span<Parameter* const> params, const ClipPolicy& policy);

enum class OptimizerKind { sgd, adam };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(const std::string& text);

struct OptimizerOptions {
  double learning_rate = 1e-3;
  double momentum = 0.0;  // sgd
  double beta1 = 0.9;     // adam
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Update rule plus its per-parameter state. attach() binds the state to a
/// parameter list; step() then updates those parameters in place from their
/// gradients (which it leaves untouched).
class Optimizer {
 public:
  explicit Optimizer(OptimizerOptions options);
  virtual ~Optimizer() = default;

  void attach(std::span<Parameter* const> params);
  void step(std::span<Parameter* const> params);

  double learning_rate() const { return options_.learning_rate; }
  void set_learning_rate(double lr) { options_.learning_rate = lr; }
  std::uint64_t step_count() const { return steps_; }
  const OptimizerOptions& options() const { return options_; }

 protected:
  virtual void init_state(std::span<Parameter* const> params) = 0;
  virtual void update(std::span<Parameter* const> params) = 0;

  OptimizerOptions options_;
  std::uint64_t steps_ = 0;

 private:
  std::vector<std::pair<std::size_t, std::size_t>> shapes_;
  bool attached_ = false;
};

/// w ← w − lr·(momentum·buf + g), buf ← momentum·buf + g.
class Sgd final : public Optimizer {
 public:
  using Optimizer::Optimizer;

 private:
  void init_state(std::span<Parameter* const> params) override;
  void update(std::span<Parameter* const> params) override;

  std::vector<Matrix> velocity_;
};

class Adam final : public Optimizer {
 public:
  using Optimizer::Optimizer;

  const std::vector<Matrix>& first_moments() const { return m_; }
  const std::vector<Matrix>& second_moments() const { return v_; }

 private:
  void init_state(std::span<Parameter* const> params) override;
  void update(std::span<Parameter* const> params) override;

  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

std::unique_ptr<Optimizer> make_optimizer(OptimizerKind kind, const OptimizerOptions& options);

struct PlateauOptions {
  double factor = 0.5;
  std::size_t patience = 3;
  double min_lr = 1e-6;
  /// A loss counts as an improvement only if it beats the best by more than this.
  double min_delta = 1e-9;
};

/// Reduce-on-plateau: multiplies the learning rate by `factor` once the
/// validation loss has failed to improve for `patience` consecutive epochs,
/// then restarts the count. Never goes below min_lr.
class PlateauScheduler {
 public:
  explicit PlateauScheduler(PlateauOptions options);

  /// Feeds one epoch's validation loss; returns the learning rate to use next.
  double observe(double val_loss, double lr);

 private:
  PlateauOptions options_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t wait_ = 0;
};

/// Learning rate after replaying a validation-loss history through a fresh
/// PlateauScheduler that starts at `lr`.
double reduce_lr_on_plateau(double lr, std::span<const double> val_loss_history,
                            const PlateauOptions& options);

}  // namespace tfcast

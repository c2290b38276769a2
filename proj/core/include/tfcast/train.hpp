#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "tfcast/data.hpp"
#include "tfcast/data_io.hpp"
#include "tfcast/metrics.hpp"
#include "tfcast/models.hpp"
#include "tfcast/optim.hpp"

namespace tfcast {

/// Everything needed to reproduce a training run from a series.
struct TrainConfig {
  Topology topology;

  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  OptimizerKind optimizer = OptimizerKind::adam;
  double learning_rate = 3e-3;
  double momentum = 0.0;
  double clip_threshold = 1.0;  // <= 0 disables clipping
  std::size_t patience = 5;     // early stopping
  bool lr_schedule = true;      // reduce-on-plateau
  PlateauOptions plateau;
  bool shuffle = false;
  std::uint64_t seed = 42;

  SplitFractions split;
  NormScheme norm_scheme = NormScheme::zscore;
  FitScope fit_scope = FitScope::train_only;

  ClipPolicy clip_policy() const { return {clip_threshold, clip_threshold > 0.0}; }
  OptimizerOptions optimizer_options() const;

  /// Throws UsageError describing every violated constraint.
  void validate() const;
};

/// Flat key-value form of a TrainConfig, as stored in checkpoints and
/// config files.
KeyValues to_key_values(const TrainConfig& config);
/// Starts from `base` and applies every key in `kv`. Unknown keys and bad
/// values are collected and reported together in one UsageError.
TrainConfig apply_key_values(TrainConfig base, const KeyValues& kv);
/// Keys understood by apply_key_values.
std::vector<std::string> train_config_keys();

std::vector<std::size_t> parse_size_list(const std::string& text);
std::string format_size_list(std::span<const std::size_t> values);

/// Freshly initialized model for config.topology, seeded from config.seed.
std::unique_ptr<Model> init_model(const TrainConfig& config);

/// Builds the windowed, split and normalized dataset the config describes.
WindowedDataset prepare_dataset(std::span<const double> series, const TrainConfig& config);

struct Batch {
  Sequence inputs;  // window_len matrices of shape (1 x batch)
  Matrix targets;   // (1 x batch)
};

Batch make_batch(const WindowedDataset& ds, std::span<const std::size_t> samples);
Batch make_batch(const WindowedDataset& ds, IndexRange range);
/// Sequence for a single window, shape (1 x 1) per step.
Sequence window_sequence(std::span<const double> window);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;  // learning rate in effect during the epoch
  double clip_scale_min = 1.0;
};

struct EpochStats {
  double mean_loss = 0.0;
  double clip_scale_min = 1.0;
  std::size_t batches = 0;
};

/// One pass over the training split: per batch forward → MSE → BPTT → clip →
/// optimizer step → zero grads. The batch order is chronological, or a
/// seeded shuffle when config.shuffle is set. Returns the sample-weighted
/// mean of the pre-update batch losses. Throws NumericError on a non-finite
/// loss.
EpochStats train_epoch(Model& model, Optimizer& optimizer, const WindowedDataset& ds,
                       const TrainConfig& config, Rng& rng);

/// Normalized-space predictions for every sample in `range`.
std::vector<double> predict_range(const Model& model, const WindowedDataset& ds,
                                  IndexRange range, std::size_t batch_size = 256);

enum class MetricSpace { normalized, original };

MetricsReport evaluate(const Model& model, const WindowedDataset& ds, SplitPart part,
                       MetricSpace space = MetricSpace::normalized);

/// Tracks the best validation loss. An epoch improves only when its loss is
/// below best − min_delta; `patience` consecutive non-improving epochs stop
/// training.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience, double min_delta = 1e-9);

  /// Returns true when `val_loss` is a new best.
  bool observe(std::size_t epoch, double val_loss);
  bool should_stop() const { return wait_ >= patience_; }
  double best_loss() const { return best_; }
  std::size_t best_epoch() const { return best_epoch_; }

 private:
  std::size_t patience_;
  double min_delta_;
  double best_;
  std::size_t best_epoch_ = 0;
  std::size_t wait_ = 0;
};

struct NamedMatrix {
  std::string name;
  Matrix value;

  friend bool operator==(const NamedMatrix&, const NamedMatrix&) = default;
};

struct Checkpoint {
  TrainConfig config;
  NormStats norm;
  std::vector<NamedMatrix> parameters;
  std::uint64_t epoch = 0;
  double best_val_loss = 0.0;
};

Checkpoint make_checkpoint(const Model& model, const TrainConfig& config, const NormStats& norm,
                           std::uint64_t epoch, double best_val_loss);
/// Copies checkpoint weights into `model`; throws DimensionError naming the
/// first parameter whose name or shape disagrees.
void load_into(Model& model, const Checkpoint& checkpoint);
std::unique_ptr<Model> model_from_checkpoint(const Checkpoint& checkpoint);

struct FitHooks {
  /// Replaces the validation-split MSE as the early-stopping signal.
  std::function<double(const Model&, std::size_t epoch)> validation_loss;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct FitResult {
  Checkpoint best;
  std::vector<EpochRecord> history;
  bool stopped_early = false;
};

/// Trains for up to config.epochs, keeps the weights with the smallest
/// validation loss, stops after config.patience epochs without improvement
/// and leaves the model holding the best weights.
FitResult fit(Model& model, const WindowedDataset& ds, const TrainConfig& config,
              const FitHooks& hooks = {});

/// `epoch,train_loss,val_loss,lr`
void write_history_csv(std::ostream& out, std::span<const EpochRecord> history);

}  // namespace tfcast

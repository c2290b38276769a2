#include "tfcast/train.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>

#include "tfcast/errors.hpp"

namespace tfcast {
namespace {

constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kTrainingStream = 1;

std::string join(const std::vector<std::string>& items, const char* sep) {
  std::string out;
  for (std::size_t k = 0; k < items.size(); ++k) out += (k ? sep : "") + items[k];
  return out;
}

std::size_t to_size(const std::string& text) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw UsageError("expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

std::uint64_t to_u64(const std::string& text) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw UsageError("expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

double to_real(const std::string& text) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw UsageError("expected a number, got '" + text + "'");
  }
  return v;
}

bool to_bool(const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw UsageError("expected true or false, got '" + text + "'");
}

Activation to_activation(const std::string& text) {
  if (text == "relu") return Activation::relu;
  if (text == "linear") return Activation::linear;
  throw UsageError("expected relu or linear, got '" + text + "'");
}

SplitFractions to_fractions(const std::string& text) {
  std::vector<double> parts;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto end = comma == std::string::npos ? text.size() : comma;
    parts.push_back(to_real(text.substr(start, end - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (parts.size() != 3) throw UsageError("expected train,val,test fractions, got '" + text + "'");
  return {parts[0], parts[1], parts[2]};
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

OptimizerOptions TrainConfig::optimizer_options() const {
  OptimizerOptions o;
  o.learning_rate = learning_rate;
  o.momentum = momentum;
  return o;
}

void TrainConfig::validate() const {
  std::vector<std::string> problems;
  if (epochs < 1) problems.push_back("epochs must be at least 1");
  if (batch_size < 1) problems.push_back("batch_size must be at least 1");
  if (patience < 1) problems.push_back("patience must be at least 1");
  if (!(learning_rate >= 0.0)) problems.push_back("learning_rate must be non-negative");
  if (!(topology.dropout >= 0.0 && topology.dropout < 1.0))
    problems.push_back("dropout must lie in [0, 1)");
  if (topology.hidden_sizes.empty()) problems.push_back("layers must list at least one size");
  for (std::size_t h : topology.hidden_sizes)
    if (h == 0) problems.push_back("layer sizes must be at least 1");
  if (topology.window_len < 1) problems.push_back("window_len must be at least 1");
  if (!(plateau.factor > 0.0 && plateau.factor < 1.0))
    problems.push_back("lr_factor must lie in (0, 1)");
  if (plateau.patience < 1) problems.push_back("lr_patience must be at least 1");
  if (!problems.empty()) throw UsageError("invalid configuration: " + join(problems, "; "));
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto end = comma == std::string::npos ? text.size() : comma;
    std::string item = text.substr(start, end - start);
    const auto first = item.find_first_not_of(" \t");
    item = first == std::string::npos ? "" : item.substr(first, item.find_last_not_of(" \t") - first + 1);
    out.push_back(to_size(item));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string format_size_list(std::span<const std::size_t> values) {
  std::string out;
  for (std::size_t k = 0; k < values.size(); ++k) out += (k ? "," : "") + std::to_string(values[k]);
  return out;
}

std::vector<std::string> train_config_keys() {
  return {"model",        "layers",         "window_len",    "dropout",   "baseline_activation",
          "epochs",       "batch_size",     "optimizer",     "learning_rate", "momentum",
          "clip_threshold", "patience",     "lr_schedule",   "lr_factor", "lr_patience",
          "min_lr",       "shuffle",        "seed",          "split",     "norm_scheme",
          "norm_scope"};
}

KeyValues to_key_values(const TrainConfig& c) {
  KeyValues kv;
  kv.set("model", to_string(c.topology.kind));
  kv.set("layers", format_size_list(c.topology.hidden_sizes));
  kv.set("window_len", std::to_string(c.topology.window_len));
  kv.set("dropout", c.topology.dropout);
  kv.set("baseline_activation",
         std::string(c.topology.hidden_activation == Activation::relu ? "relu" : "linear"));
  kv.set("epochs", std::to_string(c.epochs));
  kv.set("batch_size", std::to_string(c.batch_size));
  kv.set("optimizer", to_string(c.optimizer));
  kv.set("learning_rate", c.learning_rate);
  kv.set("momentum", c.momentum);
  kv.set("clip_threshold", c.clip_threshold);
  kv.set("patience", std::to_string(c.patience));
  kv.set("lr_schedule", std::string(c.lr_schedule ? "true" : "false"));
  kv.set("lr_factor", c.plateau.factor);
  kv.set("lr_patience", std::to_string(c.plateau.patience));
  kv.set("min_lr", c.plateau.min_lr);
  kv.set("shuffle", std::string(c.shuffle ? "true" : "false"));
  kv.set("seed", std::to_string(c.seed));
  kv.set("split", format_double(c.split.train) + "," + format_double(c.split.validation) + "," +
                      format_double(c.split.test));
  kv.set("norm_scheme", to_string(c.norm_scheme));
  kv.set("norm_scope", to_string(c.fit_scope));
  return kv;
}

TrainConfig apply_key_values(TrainConfig c, const KeyValues& kv) {
  std::vector<std::string> problems;
  for (const auto& [key, value] : kv.entries()) {
    try {
      if (key == "model") c.topology.kind = parse_model_kind(value);
      else if (key == "layers") c.topology.hidden_sizes = parse_size_list(value);
      else if (key == "window_len") c.topology.window_len = to_size(value);
      else if (key == "dropout") c.topology.dropout = to_real(value);
      else if (key == "baseline_activation") c.topology.hidden_activation = to_activation(value);
      else if (key == "epochs") c.epochs = to_size(value);
      else if (key == "batch_size") c.batch_size = to_size(value);
      else if (key == "optimizer") c.optimizer = parse_optimizer_kind(value);
      else if (key == "learning_rate") c.learning_rate = to_real(value);
      else if (key == "momentum") c.momentum = to_real(value);
      else if (key == "clip_threshold") c.clip_threshold = to_real(value);
      else if (key == "patience") c.patience = to_size(value);
      else if (key == "lr_schedule") c.lr_schedule = to_bool(value);
      else if (key == "lr_factor") c.plateau.factor = to_real(value);
      else if (key == "lr_patience") c.plateau.patience = to_size(value);
      else if (key == "min_lr") c.plateau.min_lr = to_real(value);
      else if (key == "shuffle") c.shuffle = to_bool(value);
      else if (key == "seed") c.seed = to_u64(value);
      else if (key == "split") c.split = to_fractions(value);
      else if (key == "norm_scheme") c.norm_scheme = parse_norm_scheme(value);
      else if (key == "norm_scope") c.fit_scope = parse_fit_scope(value);
      else problems.push_back("unknown key '" + key + "'");
    } catch (const UsageError& e) {
      problems.push_back(key + ": " + e.what());
    }
  }
  if (!problems.empty()) throw UsageError("bad configuration: " + join(problems, "; "));
  return c;
}

WindowedDataset prepare_dataset(std::span<const double> series, const TrainConfig& config) {
  WindowedDataset ds = build_windows(series, config.topology.window_len);
  ds = split(std::move(ds), config.split);
  return normalize(std::move(ds), config.norm_scheme, config.fit_scope);
}

// ---------------------------------------------------------------------------
// Batching

Batch make_batch(const WindowedDataset& ds, std::span<const std::size_t> samples) {
  const std::size_t steps = ds.window_len();
  const std::size_t batch = samples.size();
  Batch b;
  b.inputs.assign(steps, Matrix(1, batch));
  b.targets = Matrix(1, batch);
  for (std::size_t col = 0; col < batch; ++col) {
    const auto window = ds.window(samples[col]);
    for (std::size_t t = 0; t < steps; ++t) b.inputs[t](0, col) = window[t];
    b.targets(0, col) = ds.label(samples[col]);
  }
  return b;
}

Batch make_batch(const WindowedDataset& ds, IndexRange range) {
  std::vector<std::size_t> samples(range.size());
  std::iota(samples.begin(), samples.end(), range.begin);
  return make_batch(ds, samples);
}

Sequence window_sequence(std::span<const double> window) {
  Sequence seq;
  seq.reserve(window.size());
  for (double v : window) seq.push_back(Matrix(1, 1, v));
  return seq;
}

// ---------------------------------------------------------------------------
// Training

EpochStats train_epoch(Model& model, Optimizer& optimizer, const WindowedDataset& ds,
                       const TrainConfig& config, Rng& rng) {
  const IndexRange range = ds.range(SplitPart::train);
  std::vector<std::size_t> order(range.size());
  std::iota(order.begin(), order.end(), range.begin);
  if (config.shuffle) rng.shuffle(std::span<std::size_t>(order));

  const auto params = model.parameters();
  const ClipPolicy clip = config.clip_policy();
  model.zero_grad();

  EpochStats stats;
  double weighted = 0.0;
  for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
    const std::size_t count = std::min(config.batch_size, order.size() - start);
    const Batch batch =
        make_batch(ds, std::span<const std::size_t>(order).subspan(start, count));
    const Matrix prediction = model.forward(batch.inputs, Mode::train, rng);
    const double loss = bptt(model, prediction, batch.targets);
    if (!std::isfinite(loss)) {
      model.zero_grad();
      throw NumericError("non-finite training loss at batch " + std::to_string(stats.batches) +
                         " (samples " + std::to_string(order[start]) + "..)");
    }
    stats.clip_scale_min = std::min(stats.clip_scale_min, clip_gradients(params, clip));
    optimizer.step(params);
    model.zero_grad();
    weighted += loss * static_cast<double>(count);
    ++stats.batches;
  }
  stats.mean_loss = weighted / static_cast<double>(order.size());
  return stats;
}

std::vector<double> predict_range(const Model& model, const WindowedDataset& ds,
                                  IndexRange range, std::size_t batch_size) {
  std::vector<double> out;
  out.reserve(range.size());
  for (std::size_t start = range.begin; start < range.end; start += batch_size) {
    const std::size_t end = std::min(range.end, start + batch_size);
    const Batch batch = make_batch(ds, IndexRange{start, end});
    const Matrix prediction = model.predict(batch.inputs);
    out.insert(out.end(), prediction.values().begin(), prediction.values().end());
  }
  return out;
}

MetricsReport evaluate(const Model& model, const WindowedDataset& ds, SplitPart part,
                       MetricSpace space) {
  const IndexRange range = ds.range(part);
  if (range.empty()) throw UsageError("cannot evaluate an empty " + to_string(part) + " split");
  std::vector<double> predicted = predict_range(model, ds, range);
  std::vector<double> actual;
  actual.reserve(range.size());
  for (std::size_t k = range.begin; k < range.end; ++k) actual.push_back(ds.label(k));
  if (space == MetricSpace::original) {
    predicted = denormalize(predicted, ds.norm());
    actual = denormalize(actual, ds.norm());
  }
  return compute_metrics(predicted, actual);
}

EarlyStopping::EarlyStopping(std::size_t patience, double min_delta)
    : patience_(patience), min_delta_(min_delta), best_(std::numeric_limits<double>::infinity()) {
  if (patience_ < 1) throw UsageError("early stopping patience must be at least 1");
}

bool EarlyStopping::observe(std::size_t epoch, double val_loss) {
  if (val_loss < best_ - min_delta_) {
    best_ = val_loss;
    best_epoch_ = epoch;
    wait_ = 0;
    return true;
  }
  ++wait_;
  return false;
}

// ---------------------------------------------------------------------------
// Checkpoints in memory

Checkpoint make_checkpoint(const Model& model, const TrainConfig& config, const NormStats& norm,
                           std::uint64_t epoch, double best_val_loss) {
  Checkpoint ckpt;
  ckpt.config = config;
  ckpt.config.topology = model.topology();
  ckpt.norm = norm;
  ckpt.epoch = epoch;
  ckpt.best_val_loss = best_val_loss;
  for (const Parameter* p : model.parameters()) ckpt.parameters.push_back({p->name, p->value});
  return ckpt;
}

void load_into(Model& model, const Checkpoint& checkpoint) {
  auto params = model.parameters();
  if (params.size() != checkpoint.parameters.size()) {
    throw DimensionError("checkpoint holds " + std::to_string(checkpoint.parameters.size()) +
                         " parameters but the model has " + std::to_string(params.size()));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    const NamedMatrix& saved = checkpoint.parameters[k];
    if (saved.name != params[k]->name) {
      throw DimensionError("checkpoint parameter " + std::to_string(k) + " is '" + saved.name +
                           "', model expects '" + params[k]->name + "'");
    }
    if (!saved.value.same_shape(params[k]->value)) {
      throw DimensionError("layer " + saved.name + ": checkpoint shape " +
                           saved.value.shape_string() + " does not match model shape " +
                           params[k]->value.shape_string());
    }
  }
  for (std::size_t k = 0; k < params.size(); ++k) params[k]->value = checkpoint.parameters[k].value;
}

std::unique_ptr<Model> init_model(const TrainConfig& config) {
  Rng rng(stream_seed(config.seed, kInitStream));
  return make_model(config.topology, rng);
}

std::unique_ptr<Model> model_from_checkpoint(const Checkpoint& checkpoint) {
  Rng scratch(0);
  auto model = make_model(checkpoint.config.topology, scratch);
  load_into(*model, checkpoint);
  return model;
}

// ---------------------------------------------------------------------------

FitResult fit(Model& model, const WindowedDataset& ds, const TrainConfig& config,
              const FitHooks& hooks) {
  config.validate();
  if (!ds.is_normalized()) throw UsageError("fit requires a normalized dataset");

  auto optimizer = make_optimizer(config.optimizer, config.optimizer_options());
  const auto params = model.parameters();
  optimizer->attach(params);
  Rng rng(stream_seed(config.seed, kTrainingStream));
  PlateauScheduler scheduler(config.plateau);
  EarlyStopping stopper(config.patience);

  FitResult result;
  std::vector<Matrix> best_values = snapshot_values(model);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochRecord record;
    record.epoch = epoch;
    record.lr = optimizer->learning_rate();
    EpochStats stats;
    try {
      stats = train_epoch(model, *optimizer, ds, config, rng);
    } catch (const NumericError& e) {
      throw NumericError("epoch " + std::to_string(epoch) + ": " + e.what());
    }
    record.train_loss = stats.mean_loss;
    record.clip_scale_min = stats.clip_scale_min;
    record.val_loss = hooks.validation_loss
                          ? hooks.validation_loss(model, epoch)
                          : evaluate(model, ds, SplitPart::validation).mse;
    if (!std::isfinite(record.val_loss)) {
      throw NumericError("epoch " + std::to_string(epoch) + ": non-finite validation loss");
    }
    result.history.push_back(record);
    if (hooks.on_epoch) hooks.on_epoch(record);

    if (stopper.observe(epoch, record.val_loss)) best_values = snapshot_values(model);
    if (config.lr_schedule) {
      optimizer->set_learning_rate(scheduler.observe(record.val_loss, optimizer->learning_rate()));
    }
    if (stopper.should_stop() && epoch < config.epochs) {
      result.stopped_early = true;
      break;
    }
  }

  restore_values(model, best_values);
  result.best = make_checkpoint(model, config, ds.norm(), stopper.best_epoch(), stopper.best_loss());
  return result;
}

void write_history_csv(std::ostream& out, std::span<const EpochRecord> history) {
  out << "epoch,train_loss,val_loss,lr\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << format_double(r.train_loss) << ',' << format_double(r.val_loss) << ','
        << format_double(r.lr) << '\n';
  }
}

}  // namespace tfcast

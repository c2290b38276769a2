#include "tfcast/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <sstream>

#include "tfcast/checkpoint.hpp"
#include "tfcast/data.hpp"
#include "tfcast/data_io.hpp"
#include "tfcast/errors.hpp"
#include "tfcast/gradient_check.hpp"
#include "tfcast/train.hpp"

namespace tfcast::cli {
namespace fs = std::filesystem;

namespace {

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

// ---------------------------------------------------------------------------
// ingest

struct IngestArgs {
  std::string raw;
  std::string out = "data";
  std::string intersection;
  int bin_minutes = 15;
  std::string columns;
};

int cmd_ingest(const IngestArgs& a, std::ostream& out) {
  const ColumnMap columns = a.columns.empty() ? ColumnMap{} : parse_column_map(a.columns);
  auto in = open_input(a.raw);
  const auto records = parse_raw(in, columns);

  AggregateOptions options;
  options.bin_minutes = a.bin_minutes;
  if (!a.intersection.empty()) options.intersection = a.intersection;
  const VolumeSeries series = aggregate(records, options);

  const fs::path dir = a.out;
  fs::create_directories(dir);
  {
    auto f = open_output(dir / "series.csv");
    write_series_csv(f, series);
  }
  {
    auto f = open_output(dir / "gaps.csv");
    write_gap_report(f, series);
  }
  KeyValues manifest;
  manifest.set("source", fs::path(a.raw).filename().string());
  manifest.set("intersection", series.intersection_id);
  manifest.set("bin_minutes", std::to_string(series.bin_minutes));
  manifest.set("records", std::to_string(records.size()));
  manifest.set("bins", std::to_string(series.size()));
  manifest.set("gaps", std::to_string(series.gap_count()));
  manifest.set("first_bin", format_timestamp(series.bin_start.front()));
  manifest.set("last_bin", format_timestamp(series.bin_start.back()));
  {
    auto f = open_output(dir / "manifest.txt");
    write_key_values(f, manifest);
  }
  out << "intersection " << series.intersection_id << ": " << series.size() << " bins of "
      << series.bin_minutes << " min (" << series.gap_count() << " gaps) from " << records.size()
      << " records -> " << (dir / "series.csv").string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string config;
  std::string series;
  std::string out = "run";
  std::uint64_t seed = TrainConfig{}.seed;
  std::string model = to_string(TrainConfig{}.topology.kind);
  std::string layers = format_size_list(TrainConfig{}.topology.hidden_sizes);
  std::size_t window_len = TrainConfig{}.topology.window_len;
  std::size_t epochs = TrainConfig{}.epochs;
  std::size_t batch_size = TrainConfig{}.batch_size;
  std::string optimizer = to_string(TrainConfig{}.optimizer);
  double learning_rate = TrainConfig{}.learning_rate;
  double dropout = TrainConfig{}.topology.dropout;
  double clip = TrainConfig{}.clip_threshold;
  std::size_t patience = TrainConfig{}.patience;
  std::vector<std::string> sets;
};

// Keys of a run config that are not part of TrainConfig.
constexpr const char* kSeriesKey = "series";
constexpr const char* kOutKey = "out";

struct RunConfig {
  TrainConfig train;
  std::string series;
  std::string out;
};

// Precedence: built-in defaults < config file < command-line flags.
RunConfig resolve_run_config(const TrainArgs& a, const CLI::App& app) {
  std::string config_path = a.config;
  if (config_path.empty()) {
    if (const char* env = std::getenv(kConfigEnv); env != nullptr && *env != '\0') {
      config_path = env;
    }
  }
  KeyValues merged;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw UsageError("cannot open config file " + config_path);
    merged = read_key_values(in);
  }

  auto given = [&](const char* name) { return app.get_option(name)->count() > 0; };
  if (given("--series")) merged.set(kSeriesKey, a.series);
  if (given("--out")) merged.set(kOutKey, a.out);
  if (given("--seed")) merged.set("seed", std::to_string(a.seed));
  if (given("--model")) merged.set("model", a.model);
  if (given("--layers")) merged.set("layers", a.layers);
  if (given("--window-len")) merged.set("window_len", std::to_string(a.window_len));
  if (given("--epochs")) merged.set("epochs", std::to_string(a.epochs));
  if (given("--batch-size")) merged.set("batch_size", std::to_string(a.batch_size));
  if (given("--optimizer")) merged.set("optimizer", a.optimizer);
  if (given("--learning-rate")) merged.set("learning_rate", a.learning_rate);
  if (given("--dropout")) merged.set("dropout", a.dropout);
  if (given("--clip")) merged.set("clip_threshold", a.clip);
  if (given("--patience")) merged.set("patience", std::to_string(a.patience));
  for (const auto& item : a.sets) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + item + "'");
    merged.set(item.substr(0, eq), item.substr(eq + 1));
  }

  RunConfig rc;
  rc.out = a.out;
  KeyValues train_kv;
  for (const auto& [key, value] : merged.entries()) {
    if (key == kSeriesKey) rc.series = value;
    else if (key == kOutKey) rc.out = value;
    else train_kv.set(key, value);
  }
  rc.train = apply_key_values(TrainConfig{}, train_kv);
  rc.train.validate();
  if (rc.series.empty()) throw UsageError("no series given (use --series or a 'series' config key)");
  return rc;
}

void print_metrics_table(std::ostream& out, const std::vector<std::string>& labels,
                         const std::vector<MetricsReport>& reports) {
  out << std::left << std::setw(8) << "metric";
  for (const auto& l : labels) out << std::right << std::setw(12) << l;
  out << '\n';
  auto row = [&](const char* name, double MetricsReport::*field) {
    out << std::left << std::setw(8) << name;
    for (const auto& r : reports) out << std::right << std::setw(12) << fixed(r.*field);
    out << '\n';
  };
  row("MAE", &MetricsReport::mae);
  row("MSE", &MetricsReport::mse);
  row("RMSE", &MetricsReport::rmse);
}

void write_metrics_csv(std::ostream& out, const std::vector<std::string>& labels,
                       const std::vector<MetricsReport>& reports) {
  out << "metric";
  for (const auto& l : labels) out << ',' << l;
  out << '\n';
  auto row = [&](const char* name, double MetricsReport::*field) {
    out << name;
    for (const auto& r : reports) out << ',' << format_double(r.*field);
    out << '\n';
  };
  row("mae", &MetricsReport::mae);
  row("mse", &MetricsReport::mse);
  row("rmse", &MetricsReport::rmse);
  out << "n";
  for (const auto& r : reports) out << ',' << r.n;
  out << '\n';
}

std::vector<double> load_series_values(const std::string& path) {
  auto in = open_input(path);
  return read_value_column(in);
}

int cmd_train(const TrainArgs& a, const CLI::App& app, std::ostream& out) {
  const RunConfig rc = resolve_run_config(a, app);
  const auto values = load_series_values(rc.series);
  const WindowedDataset ds = prepare_dataset(values, rc.train);
  auto model = init_model(rc.train);

  out << "training " << to_string(rc.train.topology.kind) << " ("
      << model->parameter_count() << " parameters) on " << ds.range(SplitPart::train).size()
      << " windows, validating on " << ds.range(SplitPart::validation).size() << '\n';
  FitHooks hooks;
  hooks.on_epoch = [&](const EpochRecord& r) {
    out << "epoch " << std::setw(3) << r.epoch << "  train " << fixed(r.train_loss, 6) << "  val "
        << fixed(r.val_loss, 6) << "  lr " << format_double(r.lr) << '\n';
  };
  const FitResult result = fit(*model, ds, rc.train, hooks);

  const fs::path dir = rc.out;
  fs::create_directories(dir);
  save_checkpoint(result.best, dir / "checkpoint.tfck");
  {
    auto f = open_output(dir / "history.csv");
    write_history_csv(f, result.history);
  }
  {
    auto f = open_output(dir / "manifest.txt");
    write_key_values(f, dataset_manifest(ds, rc.train.split));
  }
  const MetricsReport val = evaluate(*model, ds, SplitPart::validation);
  {
    auto f = open_output(dir / "metrics_validation.csv");
    write_metrics_csv(f, {to_string(rc.train.topology.kind)}, {val});
  }
  out << "best epoch " << result.best.epoch << (result.stopped_early ? " (stopped early)" : "")
      << ", checkpoint " << (dir / "checkpoint.tfck").string() << "\nvalidation metrics (n="
      << val.n << ", normalized):\n";
  print_metrics_table(out, {to_string(rc.train.topology.kind)}, {val});
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string checkpoint;
  std::string compare;
  std::string series;
  std::string split = "test";
  std::string space = "normalized";
  std::string out;
};

bool close(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); }

// The series must reproduce the statistics stored with the checkpoint;
// otherwise the weights would be applied to differently scaled inputs.
void check_norm_matches(const NormStats& fitted, const NormStats& saved, const std::string& path) {
  if (fitted.scheme != saved.scheme || fitted.scope != saved.scope ||
      fitted.fit_begin != saved.fit_begin || fitted.fit_end != saved.fit_end ||
      !close(fitted.center, saved.center) || !close(fitted.scale, saved.scale)) {
    throw DataError("series does not match the normalization stored in " + path + " (center " +
                    format_double(saved.center) + ", scale " + format_double(saved.scale) +
                    "; series gives " + format_double(fitted.center) + ", " +
                    format_double(fitted.scale) + ")");
  }
}

MetricsReport evaluate_checkpoint(const std::string& path, std::span<const double> values,
                                  SplitPart part, MetricSpace space, ModelKind& kind) {
  const Checkpoint ckpt = load_checkpoint(path);
  const WindowedDataset ds = prepare_dataset(values, ckpt.config);
  check_norm_matches(ds.norm(), ckpt.norm, path);
  const auto model = model_from_checkpoint(ckpt);
  kind = ckpt.config.topology.kind;
  return evaluate(*model, ds, part, space);
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const SplitPart part = parse_split_part(a.split);
  const MetricSpace space = a.space == "original" ? MetricSpace::original : MetricSpace::normalized;
  const auto values = load_series_values(a.series);

  std::vector<std::string> paths{a.checkpoint};
  if (!a.compare.empty()) paths.push_back(a.compare);
  std::vector<std::string> labels;
  std::vector<MetricsReport> reports;
  for (const auto& p : paths) {
    ModelKind kind{};
    reports.push_back(evaluate_checkpoint(p, values, part, space, kind));
    labels.push_back(to_string(kind));
  }
  if (labels.size() == 2 && labels[0] == labels[1]) {
    labels = {fs::path(paths[0]).stem().string(), fs::path(paths[1]).stem().string()};
  }

  out << to_string(part) << " split, n=" << reports.front().n << ", " << a.space << " scale\n";
  print_metrics_table(out, labels, reports);
  if (!a.out.empty()) {
    auto f = open_output(a.out);
    write_metrics_csv(f, labels, reports);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// predict

struct PredictArgs {
  std::string checkpoint;
  std::string tail;
  std::size_t horizon = 1;
  std::string out;
};

int cmd_predict(const PredictArgs& a, std::ostream& out) {
  if (a.horizon < 1) throw UsageError("--horizon must be at least 1");
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const std::size_t w = ckpt.config.topology.window_len;
  const auto tail = load_series_values(a.tail);
  if (tail.size() < w) {
    throw UsageError("tail has " + std::to_string(tail.size()) + " values; the model needs at least " +
                     std::to_string(w));
  }
  const auto model = model_from_checkpoint(ckpt);

  // Roll forward: each prediction is appended to the window and the oldest
  // value dropped, so errors compound with the horizon.
  std::vector<double> window;
  for (std::size_t k = tail.size() - w; k < tail.size(); ++k) window.push_back(ckpt.norm.apply(tail[k]));
  std::vector<double> predictions;
  for (std::size_t step = 0; step < a.horizon; ++step) {
    const double next = model->predict(window_sequence(window))[0];
    predictions.push_back(ckpt.norm.invert(next));
    window.erase(window.begin());
    window.push_back(next);
  }

  std::ostringstream csv;
  csv << "step,prediction\n";
  for (std::size_t k = 0; k < predictions.size(); ++k)
    csv << k + 1 << ',' << format_double(predictions[k]) << '\n';
  if (a.out.empty()) {
    out << csv.str();
  } else {
    auto f = open_output(a.out);
    f << csv.str();
    out << "wrote " << predictions.size() << " predictions to " << a.out << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradCheckArgs {
  std::string layer = "all";
  std::string activation = "relu";
  double tolerance = 1e-4;
  std::uint64_t seed = 0;
};

int cmd_gradcheck(const GradCheckArgs& a, std::ostream& out) {
  struct Case {
    const char* name;
    Topology topology;
  };
  std::vector<Case> cases;
  const Activation act = a.activation == "linear" ? Activation::linear : Activation::relu;
  if (a.layer == "dense" || a.layer == "all")
    cases.push_back({"dense", {ModelKind::baseline, 1, 6, {8, 6}, 0.2, act}});
  if (a.layer == "rnn" || a.layer == "all")
    cases.push_back({"rnn", {ModelKind::rnn, 1, 6, {8}, 0.0, act}});
  if (a.layer == "lstm" || a.layer == "all")
    cases.push_back({"lstm", {ModelKind::lstm, 1, 6, {5, 4}, 0.2, act}});

  GradCheckOptions options;
  options.tolerance = a.tolerance;
  options.seed = a.seed;
  bool all_passed = true;
  out << std::left << std::setw(8) << "layer" << std::setw(16) << "parameter" << std::right
      << std::setw(8) << "entries" << std::setw(14) << "max_rel" << std::setw(14) << "max_abs"
      << '\n';
  for (const auto& c : cases) {
    const Topology topology = c.topology;
    const auto report = gradient_check(
        [&] {
          Rng rng(stream_seed(a.seed, 0));
          return make_model(topology, rng);
        },
        options);
    for (const auto& p : report.parameters) {
      std::ostringstream rel, abs;
      rel << std::scientific << std::setprecision(2) << p.max_rel_error;
      abs << std::scientific << std::setprecision(2) << p.max_abs_error;
      out << std::left << std::setw(8) << c.name << std::setw(16) << p.name << std::right
          << std::setw(8) << p.entries << std::setw(14) << rel.str() << std::setw(14) << abs.str()
          << '\n';
    }
    out << c.name << ": " << (report.passed ? "PASS" : "FAIL") << " (tolerance "
        << format_double(a.tolerance) << ")\n";
    all_passed = all_passed && report.passed;
  }
  return all_passed ? kExitOk : kExitFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"tfcast: traffic volume forecasting with stacked LSTMs", "tfcast"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.footer("Exit codes: 0 success, 1 data or numeric error, 2 usage error.");

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Aggregate a raw counts CSV into a binned volume series");
  c_ingest->add_option("raw", ingest.raw, "Raw CSV with intersection_id,timestamp,direction,vehicle_class,volume")
      ->required()
      ->check(CLI::ExistingFile);
  c_ingest->add_option("--out", ingest.out, "Output directory");
  c_ingest->add_option("--intersection", ingest.intersection, "Keep only this intersection id");
  c_ingest->add_option("--bin-minutes", ingest.bin_minutes, "Bin length in minutes");
  c_ingest->add_option("--columns", ingest.columns,
                       "Header overrides, e.g. timestamp=time_bin,volume=count");

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train a model on a series and write checkpoint and history");
  c_train->add_option("--config", train.config,
                      std::string("Flat key = value config file (default: $") + kConfigEnv + ")");
  c_train->add_option("--series", train.series, "Series CSV (as written by ingest) or one value per line");
  c_train->add_option("--out", train.out, "Output directory");
  c_train->add_option("--seed", train.seed, "Seed for initialization, dropout and shuffling");
  c_train->add_option("--model", train.model, "Model kind")
      ->check(CLI::IsMember({"lstm", "baseline", "rnn"}));
  c_train->add_option("--layers", train.layers, "Hidden sizes, comma separated");
  c_train->add_option("--window-len", train.window_len, "Input window length in bins");
  c_train->add_option("--epochs", train.epochs, "Maximum number of epochs");
  c_train->add_option("--batch-size", train.batch_size, "Mini-batch size");
  c_train->add_option("--optimizer", train.optimizer, "Optimizer")
      ->check(CLI::IsMember({"adam", "sgd"}));
  c_train->add_option("--learning-rate", train.learning_rate, "Initial learning rate");
  c_train->add_option("--dropout", train.dropout, "Dropout probability");
  c_train->add_option("--clip", train.clip, "Global gradient-norm threshold (<= 0 disables)");
  c_train->add_option("--patience", train.patience, "Early-stopping patience in epochs");
  c_train->add_option("--set", train.sets, "Any config key, as key=value (repeatable)");

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "Report MAE, MSE and RMSE of a checkpoint on one split");
  c_eval->add_option("checkpoint", eval.checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--series", eval.series, "Series the checkpoint was trained on")
      ->required()
      ->check(CLI::ExistingFile);
  c_eval->add_option("--compare", eval.compare, "Second checkpoint for a side-by-side table")
      ->check(CLI::ExistingFile);
  c_eval->add_option("--split", eval.split, "Split to evaluate")
      ->check(CLI::IsMember({"train", "validation", "val", "test"}));
  c_eval->add_option("--space", eval.space, "Report in normalized or original units")
      ->check(CLI::IsMember({"normalized", "original"}));
  c_eval->add_option("--out", eval.out, "Also write the metrics as CSV");

  PredictArgs predict;
  auto* c_predict = app.add_subcommand("predict", "Forecast the next bins after a series tail");
  c_predict->add_option("checkpoint", predict.checkpoint, "Checkpoint file")
      ->required()
      ->check(CLI::ExistingFile);
  c_predict->add_option("--tail", predict.tail, "Recent values (at least window_len), oldest first")
      ->required()
      ->check(CLI::ExistingFile);
  c_predict->add_option("--horizon", predict.horizon,
                        "Bins to forecast; beyond 1, predictions are fed back as inputs");
  c_predict->add_option("--out", predict.out, "Write predictions CSV here instead of stdout");

  GradCheckArgs gc;
  auto* c_gc = app.add_subcommand("gradcheck", "Compare analytic gradients with finite differences");
  c_gc->add_option("--layer", gc.layer, "Model family to check")
      ->check(CLI::IsMember({"dense", "rnn", "lstm", "all"}));
  c_gc->add_option("--activation", gc.activation, "Hidden activation of the dense model")
      ->check(CLI::IsMember({"relu", "linear"}));
  c_gc->add_option("--tolerance", gc.tolerance, "Maximum relative error");
  c_gc->add_option("--seed", gc.seed, "Seed for weights, inputs and dropout masks");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (c_ingest->parsed()) return cmd_ingest(ingest, out);
    if (c_train->parsed()) return cmd_train(train, *c_train, out);
    if (c_eval->parsed()) return cmd_eval(eval, out);
    if (c_predict->parsed()) return cmd_predict(predict, out);
    if (c_gc->parsed()) return cmd_gradcheck(gc, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace tfcast::cli

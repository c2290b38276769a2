#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "test_support.hpp"
#include "tfcast/checkpoint.hpp"
#include "tfcast/errors.hpp"
#include "tfcast/train.hpp"

using namespace tfcast;
using tfcast::testing::Gen;

namespace {

std::vector<double> wave(std::size_t n, std::uint64_t seed = 0) {
  Gen gen(seed);
  std::vector<double> s(n);
  for (std::size_t k = 0; k < n; ++k)
    s[k] = 50.0 + 20.0 * std::sin(2.0 * 3.141592653589793 * static_cast<double>(k) / 24.0) +
           gen.real(-2.0, 2.0);
  return s;
}

TrainConfig small_config() {
  TrainConfig c;
  c.topology.hidden_sizes = {4};
  c.topology.window_len = 6;
  c.epochs = 4;
  c.batch_size = 16;
  return c;
}

// Scripted losses in place of the validation split.
FitHooks scripted(std::vector<double> losses, std::vector<std::vector<Matrix>>* weights = nullptr) {
  FitHooks hooks;
  hooks.validation_loss = [losses = std::move(losses), weights](const Model& m, std::size_t epoch) {
    if (weights) weights->push_back(snapshot_values(m));
    return losses.at(epoch - 1);
  };
  return hooks;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

TEST_CASE("config survives the key-value form") {
  TrainConfig c;
  c.topology.kind = ModelKind::baseline;
  c.topology.hidden_sizes = {7, 5, 3};
  c.topology.dropout = 0.25;
  c.topology.hidden_activation = Activation::linear;
  c.learning_rate = 0.1 + 0.2;
  c.optimizer = OptimizerKind::sgd;
  c.momentum = 0.9;
  c.lr_schedule = false;
  c.shuffle = true;
  c.seed = 18446744073709551615ULL;
  c.split = {0.7, 0.2, 0.1};
  c.norm_scheme = NormScheme::minmax;
  c.fit_scope = FitScope::whole_dataset;
  const KeyValues kv = to_key_values(c);
  const TrainConfig back = apply_key_values(TrainConfig{}, kv);
  CHECK(to_key_values(back).entries() == kv.entries());
  CHECK(back.topology == c.topology);
  CHECK(back.learning_rate == c.learning_rate);
  CHECK(back.seed == c.seed);

  std::vector<std::string> keys;
  for (const auto& [k, v] : kv.entries()) keys.push_back(k);
  CHECK(keys == train_config_keys());
}

TEST_CASE("every bad key is reported at once") {
  KeyValues kv;
  kv.set("epochs", "ten");
  kv.set("colour", "blue");
  kv.set("model", "transformer");
  kv.set("learning_rate", "0.01");
  try {
    apply_key_values(TrainConfig{}, kv);
    FAIL("expected UsageError");
  } catch (const UsageError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("epochs") != std::string::npos);
    CHECK(msg.find("colour") != std::string::npos);
    CHECK(msg.find("model") != std::string::npos);
    CHECK(msg.find("learning_rate") == std::string::npos);
  }
}

TEST_CASE("validation lists every violated constraint") {
  TrainConfig c;
  c.epochs = 0;
  c.topology.dropout = 1.0;
  try {
    c.validate();
    FAIL("expected UsageError");
  } catch (const UsageError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("epochs") != std::string::npos);
    CHECK(msg.find("dropout") != std::string::npos);
  }
  CHECK(parse_size_list(" 32, 16 ") == std::vector<std::size_t>{32, 16});
  CHECK(format_size_list(std::vector<std::size_t>{8, 4}) == "8,4");
  CHECK_THROWS_AS(parse_size_list("8,,4"), UsageError);
}

// ---------------------------------------------------------------------------
// Batches and evaluation

TEST_CASE("batches hold one window per column") {
  const auto ds = prepare_dataset(wave(100), small_config());
  const std::vector<std::size_t> picks{3, 10, 4};
  const Batch b = make_batch(ds, picks);
  REQUIRE(b.inputs.size() == 6);
  CHECK(b.targets.cols() == 3);
  for (std::size_t j = 0; j < picks.size(); ++j) {
    CHECK(b.targets(0, j) == ds.label(picks[j]));
    for (std::size_t t = 0; t < 6; ++t) CHECK(b.inputs[t](0, j) == ds.window(picks[j])[t]);
  }
  CHECK(make_batch(ds, IndexRange{5, 9}).targets.cols() == 4);
}

TEST_CASE("predict_range agrees with per-window prediction") {
  const TrainConfig c = small_config();
  const auto ds = prepare_dataset(wave(100), c);
  auto model = init_model(c);
  const auto range = ds.range(SplitPart::test);
  const auto batched = predict_range(*model, ds, range, 3);
  for (std::size_t k = range.begin; k < range.end; ++k)
    CHECK(batched[k - range.begin] == model->predict(window_sequence(ds.window(k)))[0]);
}

TEST_CASE("original-scale metrics are the normalized ones rescaled") {
  const TrainConfig c = small_config();
  const auto ds = prepare_dataset(wave(200), c);
  auto model = init_model(c);
  const auto norm = evaluate(*model, ds, SplitPart::test, MetricSpace::normalized);
  const auto orig = evaluate(*model, ds, SplitPart::test, MetricSpace::original);
  const double s = ds.norm().scale;
  CHECK(orig.mse == doctest::Approx(norm.mse * s * s).epsilon(1e-12));
  CHECK(orig.mae == doctest::Approx(norm.mae * s).epsilon(1e-12));
}

// ---------------------------------------------------------------------------
// Training steps

TEST_CASE("one batch of sgd equals w minus lr times the clipped gradient") {
  TrainConfig c = small_config();
  c.optimizer = OptimizerKind::sgd;
  c.learning_rate = 0.1;
  c.clip_threshold = 0.05;
  c.batch_size = 1000;  // the whole training split in one batch
  const auto ds = prepare_dataset(wave(80), c);

  auto reference = init_model(c);
  const Batch b = make_batch(ds, ds.range(SplitPart::train));
  Rng unused(0);
  bptt(*reference, reference->forward(b.inputs, Mode::train, unused), b.targets);
  const auto params = reference->parameters();
  double sq = 0.0;
  for (auto* p : params)
    for (double g : p->grad.values()) sq += g * g;
  const double norm = std::sqrt(sq);
  REQUIRE(norm > c.clip_threshold);
  std::vector<Matrix> expected;
  for (auto* p : params) expected.push_back(p->value - (0.1 * c.clip_threshold / norm) * p->grad);

  auto model = init_model(c);
  auto opt = make_optimizer(c.optimizer, c.optimizer_options());
  opt->attach(model->parameters());
  Rng rng(0);
  const EpochStats stats = train_epoch(*model, *opt, ds, c, rng);
  CHECK(stats.batches == 1);
  CHECK(stats.clip_scale_min == doctest::Approx(c.clip_threshold / norm));
  const auto after = snapshot_values(*model);
  for (std::size_t k = 0; k < after.size(); ++k)
    CHECK(testing::max_abs_difference(after[k], expected[k]) < 1e-14);
  for (auto* p : model->parameters())
    for (double g : p->grad.values()) CHECK(g == 0.0);
}

TEST_CASE("diverging training raises a numeric error naming the epoch") {
  TrainConfig c = small_config();
  c.topology.kind = ModelKind::baseline;
  c.topology.hidden_activation = Activation::linear;
  c.optimizer = OptimizerKind::sgd;
  c.learning_rate = 50.0;
  c.clip_threshold = 0.0;
  c.lr_schedule = false;
  c.epochs = 200;
  c.patience = 200;
  const auto ds = prepare_dataset(wave(200), c);
  auto model = init_model(c);
  try {
    fit(*model, ds, c);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).rfind("epoch ", 0) == 0);
  }
}

TEST_CASE("training loss falls on a learnable series") {
  TrainConfig c;
  c.topology.hidden_sizes = {8};
  c.epochs = 8;
  SyntheticSeriesOptions so;
  so.length = 1500;
  const auto ds = prepare_dataset(synthetic_series(so), c);
  auto model = init_model(c);
  const auto result = fit(*model, ds, c);
  CHECK(result.history.back().train_loss < 0.5 * result.history.front().train_loss);
}

// ---------------------------------------------------------------------------
// Early stopping

TEST_CASE("early stopping on [5, 4, 3, 4, 5, 6] with patience 2") {
  EarlyStopping s(2);
  const std::vector<double> losses{5, 4, 3, 4, 5, 6};
  std::size_t stopped_after = 0;
  for (std::size_t e = 1; e <= losses.size(); ++e) {
    s.observe(e, losses[e - 1]);
    if (s.should_stop()) {
      stopped_after = e;
      break;
    }
  }
  CHECK(stopped_after == 5);
  CHECK(s.best_epoch() == 3);
  CHECK(s.best_loss() == 3);
}

TEST_CASE("improvements smaller than min_delta do not count") {
  EarlyStopping s(1, 1e-9);
  CHECK(s.observe(1, 1.0));
  CHECK_FALSE(s.observe(2, 1.0 - 1e-10));
  CHECK(s.should_stop());
  CHECK(s.best_epoch() == 1);
}

TEST_CASE("fit returns the weights of the best scripted epoch") {
  TrainConfig c = small_config();
  c.epochs = 10;
  c.patience = 2;
  const auto ds = prepare_dataset(wave(120), c);
  auto model = init_model(c);
  std::vector<std::vector<Matrix>> weights;
  const auto result = fit(*model, ds, c, scripted({5, 4, 3, 4, 5, 6, 7, 8, 9, 10}, &weights));
  CHECK(result.history.size() == 5);
  CHECK(result.stopped_early);
  CHECK(result.best.epoch == 3);
  CHECK(result.best.best_val_loss == 3.0);
  CHECK(snapshot_values(*model) == weights[2]);
  for (std::size_t k = 0; k < weights[2].size(); ++k) CHECK(result.best.parameters[k].value == weights[2][k]);
}

TEST_CASE("fit stops exactly where the stopping rule says on random trajectories") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Gen gen(seed);
    TrainConfig c = small_config();
    c.epochs = 12;
    c.patience = gen.size(1, 4);
    c.lr_schedule = false;
    std::vector<double> losses;
    for (std::size_t e = 0; e < c.epochs; ++e) losses.push_back(std::round(gen.real(0.0, 10.0)));

    // Oracle: walk the trajectory by hand.
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0, wait = 0, last = c.epochs;
    for (std::size_t e = 1; e <= c.epochs; ++e) {
      if (losses[e - 1] < best - 1e-9) {
        best = losses[e - 1];
        best_epoch = e;
        wait = 0;
      } else if (++wait >= c.patience) {
        last = e;
        break;
      }
    }

    const auto ds = prepare_dataset(wave(120, seed), c);
    auto model = init_model(c);
    std::vector<std::vector<Matrix>> weights;
    const auto result = fit(*model, ds, c, scripted(losses, &weights));
    CHECK(result.history.size() == last);
    CHECK(result.best.epoch == best_epoch);
    CHECK(snapshot_values(*model) == weights[best_epoch - 1]);
  }
}

TEST_CASE("the learning rate halves after a plateau") {
  TrainConfig c = small_config();
  c.epochs = 6;
  c.patience = 10;
  const auto ds = prepare_dataset(wave(120), c);
  auto model = init_model(c);
  const auto result = fit(*model, ds, c, scripted({1, 1, 1, 1, 1, 1}));
  CHECK(result.history[3].lr == c.learning_rate);
  CHECK(result.history[4].lr == c.learning_rate * 0.5);
}

// ---------------------------------------------------------------------------
// Determinism and persistence

TEST_CASE("identical seeds give identical runs, byte for byte") {
  for (bool shuffle : {false, true}) {
    TrainConfig c = small_config();
    c.topology.hidden_sizes = {4, 3};
    c.topology.dropout = 0.3;
    c.shuffle = shuffle;
    const auto ds = prepare_dataset(wave(150), c);
    auto a = init_model(c);
    auto b = init_model(c);
    const auto ra = fit(*a, ds, c);
    const auto rb = fit(*b, ds, c);
    std::ostringstream ha, hb;
    write_history_csv(ha, ra.history);
    write_history_csv(hb, rb.history);
    CHECK(ha.str() == hb.str());
    CHECK(serialize_checkpoint(ra.best) == serialize_checkpoint(rb.best));
  }
}

TEST_CASE("history CSV format") {
  std::vector<EpochRecord> h{{1, 0.5, 0.25, 0.003, 1.0}, {2, 0.125, 0.1, 0.0015, 0.5}};
  std::ostringstream out;
  write_history_csv(out, h);
  CHECK(out.str() == "epoch,train_loss,val_loss,lr\n1,0.5,0.25,0.003\n2,0.125,0.1,0.0015\n");
}

TEST_CASE("loading weights into a differently shaped model names the layer") {
  TrainConfig c = small_config();
  auto model = init_model(c);
  const Checkpoint ckpt = make_checkpoint(*model, c, NormStats{}, 1, 0.0);
  TrainConfig wider = c;
  wider.topology.hidden_sizes = {5};
  auto other = init_model(wider);
  try {
    load_into(*other, ckpt);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("lstm0.weight") != std::string::npos);
  }
}

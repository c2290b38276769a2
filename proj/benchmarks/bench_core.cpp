#include <benchmark/benchmark.h>

#include "tfcast/train.hpp"

using namespace tfcast;

namespace {

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(0);
  const Matrix a = rng.uniform_matrix(n, n, -1.0, 1.0), b = rng.uniform_matrix(n, n, -1.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(16)->Arg(64)->Arg(128);

// One forward and backward pass of a stacked LSTM over a 12-step window.
void BM_LstmWindow(benchmark::State& state) {
  const auto hidden = static_cast<std::size_t>(state.range(0));
  Rng rng(0);
  auto model = make_model({ModelKind::lstm, 1, 12, {hidden, hidden}, 0.0, Activation::relu}, rng);
  Sequence xs;
  for (int t = 0; t < 12; ++t) xs.push_back(rng.uniform_matrix(1, 32, -1.0, 1.0));
  const Matrix target = rng.uniform_matrix(1, 32, -1.0, 1.0);
  for (auto _ : state) {
    model->zero_grad();
    bptt(*model, model->forward(xs, Mode::train, rng), target);
  }
}
BENCHMARK(BM_LstmWindow)->Arg(16)->Arg(32)->Arg(64);

void BM_TrainEpoch(benchmark::State& state) {
  TrainConfig c;
  c.topology.kind = state.range(0) == 0 ? ModelKind::lstm : ModelKind::baseline;
  const auto ds = prepare_dataset(synthetic_series({}), c);
  auto model = init_model(c);
  auto opt = make_optimizer(c.optimizer, c.optimizer_options());
  opt->attach(model->parameters());
  Rng rng(0);
  for (auto _ : state) benchmark::DoNotOptimize(train_epoch(*model, *opt, ds, c, rng));
  state.SetLabel(to_string(c.topology.kind));
}
BENCHMARK(BM_TrainEpoch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

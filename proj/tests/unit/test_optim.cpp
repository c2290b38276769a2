#include <doctest.h>

#include <cmath>

#include "test_support.hpp"
#include "tfcast/errors.hpp"
#include "tfcast/optim.hpp"

using namespace tfcast;
using tfcast::testing::Gen;

namespace {

struct ParamSet {
  std::vector<Parameter> storage;
  std::vector<Parameter*> ptrs;

  explicit ParamSet(std::vector<Parameter> params) : storage(std::move(params)) {
    for (auto& p : storage) ptrs.push_back(&p);
  }
};

Parameter with_grad(const char* name, Matrix value, Matrix grad) {
  Parameter p(name, std::move(value));
  p.grad = std::move(grad);
  return p;
}

double dot_all(const ParamSet& a, const std::vector<Matrix>& b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < b.size(); ++k) acc += testing::weighted_sum(a.storage[k].grad, b[k]);
  return acc;
}

}  // namespace

// ---------------------------------------------------------------------------
// Clipping

TEST_CASE("clipping [3, 4] at threshold 1") {
  ParamSet s({with_grad("a", Matrix(1, 2), Matrix{{3, 4}})});
  CHECK(global_grad_norm(s.ptrs) == 5.0);
  CHECK(clip_gradients(s.ptrs, {1.0, true}) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(s.storage[0].grad(0, 0) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(s.storage[0].grad(0, 1) == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("gradients under the threshold or with clipping disabled are untouched") {
  ParamSet s({with_grad("a", Matrix(1, 2), Matrix{{0.3, 0.4}})});
  CHECK(clip_gradients(s.ptrs, {1.0, true}) == 1.0);
  CHECK(s.storage[0].grad == Matrix{{0.3, 0.4}});
  ParamSet big({with_grad("a", Matrix(1, 2), Matrix{{30, 40}})});
  CHECK(clip_gradients(big.ptrs, {1.0, false}) == 1.0);
  CHECK(big.storage[0].grad == Matrix{{30, 40}});
}

TEST_CASE("a non-finite gradient is reported with the parameter name") {
  ParamSet s({with_grad("ok", Matrix(1, 1), Matrix{{1}}),
              with_grad("lstm1.weight", Matrix(1, 2), Matrix{{1, std::nan("")}})});
  try {
    clip_gradients(s.ptrs, {1.0, true});
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("lstm1.weight") != std::string::npos);
  }
}

TEST_CASE("clipping bounds the global norm and keeps the direction") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Gen gen(seed);
    std::vector<Parameter> params;
    const std::size_t count = gen.size(1, 5);
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t r = gen.size(1, 6), c = gen.size(1, 6);
      params.push_back(with_grad("p", Matrix(r, c), gen.matrix(r, c, -10.0, 10.0)));
    }
    ParamSet s(std::move(params));
    std::vector<Matrix> before;
    for (auto& p : s.storage) before.push_back(p.grad);
    const double pre = global_grad_norm(s.ptrs);
    const double tau = gen.real(0.01, 2.0) * pre;

    clip_gradients(s.ptrs, {tau, true});
    const double post = global_grad_norm(s.ptrs);
    CHECK(post <= tau * (1.0 + 1e-12));
    const double cosine = dot_all(s, before) / (pre * post);
    CHECK(std::abs(cosine - 1.0) < 1e-12);
  }
}

// ---------------------------------------------------------------------------
// Optimizers

TEST_CASE("plain sgd step") {
  ParamSet s({with_grad("w", Matrix{{1.0}}, Matrix{{0.5}})});
  Sgd sgd({0.1});
  sgd.attach(s.ptrs);
  sgd.step(s.ptrs);
  CHECK(s.storage[0].value(0, 0) == doctest::Approx(0.95).epsilon(1e-15));
  CHECK(s.storage[0].grad(0, 0) == 0.5);
  CHECK(sgd.step_count() == 1);
}

TEST_CASE("sgd with momentum follows the velocity recurrence") {
  OptimizerOptions o;
  o.learning_rate = 0.1;
  o.momentum = 0.9;
  ParamSet s({with_grad("w", Matrix{{1.0}}, Matrix{{0.5}})});
  Sgd sgd(o);
  sgd.attach(s.ptrs);
  double w = 1.0, buf = 0.0;
  for (double g : {0.5, -0.25, 1.0}) {
    s.storage[0].grad(0, 0) = g;
    sgd.step(s.ptrs);
    buf = 0.9 * buf + g;
    w -= 0.1 * buf;
    CHECK(s.storage[0].value(0, 0) == doctest::Approx(w).epsilon(1e-14));
  }
}

TEST_CASE("adam matches a scalar reference implementation") {
  const double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Gen gen(seed);
    ParamSet s({with_grad("w", gen.matrix(2, 2), Matrix(2, 2))});
    Adam adam({lr});
    adam.attach(s.ptrs);
    Matrix ref = s.storage[0].value;
    std::vector<double> m(4, 0.0), v(4, 0.0);
    for (int t = 1; t <= 5; ++t) {
      const Matrix g = gen.matrix(2, 2);
      s.storage[0].grad = g;
      adam.step(s.ptrs);
      for (std::size_t k = 0; k < 4; ++k) {
        m[k] = b1 * m[k] + (1 - b1) * g[k];
        v[k] = b2 * v[k] + (1 - b2) * g[k] * g[k];
        const double mhat = m[k] / (1 - std::pow(b1, t));
        const double vhat = v[k] / (1 - std::pow(b2, t));
        ref[k] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
      CHECK(testing::max_abs_difference(s.storage[0].value, ref) < 1e-14);
    }
  }
}

TEST_CASE("adam's first step moves each weight by about lr against the gradient sign") {
  ParamSet s({with_grad("w", Matrix{{0.0, 0.0}}, Matrix{{0.3, -7.0}})});
  Adam adam({0.01});
  adam.attach(s.ptrs);
  adam.step(s.ptrs);
  CHECK(s.storage[0].value(0, 0) == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(s.storage[0].value(0, 1) == doctest::Approx(0.01).epsilon(1e-6));
}

TEST_CASE("optimizer state is bound to the attached parameters") {
  ParamSet s({with_grad("w", Matrix{{1.0}}, Matrix{{0.5}})});
  Adam adam({0.1});
  CHECK_THROWS_AS(adam.step(s.ptrs), StateError);
  adam.attach(s.ptrs);
  ParamSet other({with_grad("w", Matrix(2, 1), Matrix(2, 1))});
  CHECK_THROWS_AS(adam.step(other.ptrs), StateError);
  CHECK(parse_optimizer_kind("sgd") == OptimizerKind::sgd);
  CHECK_THROWS_AS(parse_optimizer_kind("rmsprop"), UsageError);
}

// ---------------------------------------------------------------------------
// Reduce on plateau

TEST_CASE("a flat history of patience + 1 epochs halves the rate once") {
  PlateauOptions o;  // factor 0.5, patience 3
  const std::vector<double> flat(4, 1.0);
  CHECK(reduce_lr_on_plateau(0.1, flat, o) == 0.05);
  CHECK(reduce_lr_on_plateau(0.1, std::vector<double>(3, 1.0), o) == 0.1);
}

TEST_CASE("the wait counter restarts after a reduction and after an improvement") {
  PlateauOptions o;
  // best at epoch 1, reductions after epochs 4 and 7.
  CHECK(reduce_lr_on_plateau(0.1, std::vector<double>(7, 1.0), o) == 0.025);
  // Improvements at epochs 3 and 5 keep resetting the count.
  const std::vector<double> improving{1.0, 1.0, 0.9, 0.9, 0.8, 0.8, 0.8};
  CHECK(reduce_lr_on_plateau(0.1, improving, o) == 0.1);
}

TEST_CASE("plateau reductions stop at min_lr and never raise the rate") {
  PlateauOptions o;
  o.min_lr = 0.03;
  CHECK(reduce_lr_on_plateau(0.1, std::vector<double>(40, 1.0), o) == 0.03);
  CHECK(reduce_lr_on_plateau(0.01, std::vector<double>(40, 1.0), o) == 0.01);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Gen gen(seed);
    PlateauScheduler sched(PlateauOptions{});
    double lr = 0.1;
    for (int epoch = 0; epoch < 50; ++epoch) {
      const double next = sched.observe(gen.real(0.0, 1.0), lr);
      CHECK(next <= lr);
      CHECK(next >= std::min(lr, 1e-6));
      lr = next;
    }
  }
}

#pragma once

#include <cstdint>
#include <random>
#include <span>

#include "tfcast/linalg.hpp"

namespace tfcast {

/// Seed for an independent named stream derived from one master seed
/// (splitmix64 mixing).
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stream);

/// Seeded generator. The distributions are written out explicitly so a seed
/// produces the same stream on every standard library, which keeps
/// checkpoints and history files byte-identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal (Box-Muller).
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  Matrix uniform_matrix(std::size_t rows, std::size_t cols, double lo, double hi);
  Matrix normal_matrix(std::size_t rows, std::size_t cols, double stddev = 1.0);

  /// Independent child generator, for handing a stream to a subcomponent.
  Rng fork() { return Rng(engine_()); }

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace tfcast

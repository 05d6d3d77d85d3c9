#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace refdense {

// mt19937_64 plus hand-rolled distributions. The standard specifies the
// engine's output exactly but not the library distributions, so sampling is
// written out here to keep datasets and training runs reproducible across
// toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n);

  // Box-Muller, both values used.
  double normal();

  double normal(double mean, double stddev) {
    return mean + stddev * normal();
  }

  // Knuth's product method; fine for the small means used here.
  int poisson(double mean);

  double log_normal(double mu, double sigma) {
    return std::exp(mu + sigma * normal());
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  // Independent substream for one unit of parallel work.
  static std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace refdense

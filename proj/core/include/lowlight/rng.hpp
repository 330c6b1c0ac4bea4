#pragma once

#include <cstdint>
#include <random>

namespace lowlight {

// SplitMix64 finalizer; used to derive independent per-item seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

// mt19937_64 with distribution code written out so streams are identical
// across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // exp(uniform(log lo, log hi))
  double log_uniform(double lo, double hi);
  double normal();
  // Poisson sample: Knuth multiplication for lambda < 30, rounded Gaussian above.
  double poisson(double lambda);
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace lowlight

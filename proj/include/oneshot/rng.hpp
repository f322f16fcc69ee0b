#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace oneshot {

// Deterministic RNG. mt19937_64 core (bit-identical everywhere by the standard)
// with hand-rolled distributions, since std distributions are implementation
// defined and would break cross-platform reproducibility.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t u64() { return eng_(); }

  // [0, 1) with 24 bits of mantissa.
  float unit() { return static_cast<float>(eng_() >> 40) * (1.0f / 16777216.0f); }

  float uniform(float lo, float hi) { return lo + (hi - lo) * unit(); }

  // Box-Muller, one value per call (the pair's second half is cached).
  float normal();

  // Unbiased integer in [0, n).
  int below(int n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(below(i + 1))]);
  }

  // Named substream derivation, so every component draws from its own
  // independent stream of the root seed.
  Rng fork(std::string_view name) const;

  static uint64_t derive(uint64_t seed, std::string_view name);

 private:
  std::mt19937_64 eng_;
  bool have_cached_ = false;
  float cached_ = 0.0f;
};

}  // namespace oneshot

#include "oneshot/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace oneshot {

float Rng::normal() {
  if (have_cached_) {
    have_cached_ = false;
    return cached_;
  }
  // Rejection-free polar form would need loops with data-dependent draws;
  // plain Box-Muller keeps the draw count fixed per call pair.
  float u1 = unit();
  float u2 = unit();
  if (u1 < 1e-12f) u1 = 1e-12f;
  const float r = std::sqrt(-2.0f * std::log(u1));
  const float a = 6.28318530717958647692f * u2;
  cached_ = r * std::sin(a);
  have_cached_ = true;
  return r * std::cos(a);
}

int Rng::below(int n) {
  if (n <= 0) throw std::invalid_argument("rng: below(n) needs n > 0");
  const uint64_t bound = static_cast<uint64_t>(n);
  const uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  uint64_t v = eng_();
  while (v >= limit) v = eng_();
  return static_cast<int>(v % bound);
}

uint64_t Rng::derive(uint64_t seed, std::string_view name) {
  // FNV-1a over the seed bytes then the name.
  uint64_t h = 1469598103934665603ull;
  for (int i = 0; i < 8; ++i) {
    h ^= (seed >> (8 * i)) & 0xff;
    h *= 1099511628211ull;
  }
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

Rng Rng::fork(std::string_view name) const {
  Rng copy = *this;  // engine state unused; derive from a fresh draw of a copy
  uint64_t base = copy.eng_();
  return Rng(derive(base, name));
}

}  // namespace oneshot

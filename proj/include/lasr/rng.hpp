#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace lasr {

// Seeded random source built on mt19937_64. The uniform/normal transforms are
// spelled out here instead of using std distributions because those are
// implementation-defined; model files and training runs must reproduce
// bit-identically for a given seed on any toolchain.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  // Derives an independent stream, e.g. one per cascade stage or worker.
  static Rng derive(uint64_t seed, uint64_t salt) {
    return Rng(derive_seed(seed, salt));
  }

  static uint64_t derive_seed(uint64_t seed, uint64_t salt) {
    return splitmix(seed + 0x9e3779b97f4a7c15ULL * (salt + 1));
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, bound). Rejection sampling, no modulo bias.
  uint32_t uniform_u32(uint32_t bound) {
    const uint64_t span = static_cast<uint64_t>(bound);
    const uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return static_cast<uint32_t>(x % span);
  }

  // Standard normal via Box-Muller, consuming two uniforms per pair.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  uint64_t next_u64() { return engine_(); }

 private:
  static uint64_t splitmix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace lasr

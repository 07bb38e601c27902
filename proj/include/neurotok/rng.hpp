#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace neurotok {

// Deterministic random source. One master seed fans out into named
// sub-streams (data order, parameter init, masking, ...) so that adding a
// consumer never perturbs the draws of another. Uniform/normal mappings are
// implemented by hand: std::*_distribution output is implementation-defined
// and would break byte-identical reruns across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(mix(seed)), seed_(mix(seed)) {}

  Rng stream(std::string_view name) const {
    uint64_t h = 1469598103934665603ull;  // FNV-1a
    for (char c : name) {
      h ^= static_cast<uint8_t>(c);
      h *= 1099511628211ull;
    }
    return Rng(seed_ ^ mix(h), Tag{});
  }

  uint64_t next_u64() { return engine_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n)
  int uniform_int(int n) {
    // modulo bias is negligible for n << 2^64 and keeps the draw count fixed
    return static_cast<int>(next_u64() % static_cast<uint64_t>(n));
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // strictly positive uniform, safe under log()
  double uniform_pos() {
    double u = 0.0;
    while (u <= 0.0) u = uniform();
    return u;
  }

 private:
  struct Tag {};
  Rng(uint64_t raw, Tag) : engine_(raw), seed_(raw) {}

  static uint64_t mix(uint64_t x) {
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  std::mt19937_64 engine_;
  uint64_t seed_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace neurotok

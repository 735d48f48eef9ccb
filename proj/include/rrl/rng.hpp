#pragma once

#include <cstdint>
#include <random>

namespace rrl {

// Deterministic random source. std::mt19937_64 has a fully specified output
// sequence, but the standard distributions do not, so every derivation here is
// spelled out by hand. Identical seeds give identical streams on every
// platform and compiler.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, n). n must be > 0. Uses the modulo reduction; the bias is
  /// below 2^-32 for any n that fits in 32 bits.
  std::uint64_t uniform_index(std::uint64_t n) { return gen_() % n; }

  int uniform_int(int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(uniform_index(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Derives an independent child seed; lets one master seed drive several
  /// reproducible streams.
  std::uint64_t fork() { return splitmix(gen_()); }

  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace rrl

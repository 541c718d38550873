#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace protoseg {

inline constexpr std::uint64_t kDefaultSeed = 1234567;

/// splitmix64-style mix, used to derive independent sub-stream seeds.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a + 0x9e3779b97f4a7c15ull * (b + 1);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebull;
  x ^= x >> 31;
  return x;
}

/// Deterministic RNG. The raw engine is std::mt19937_64, whose output
/// sequence the standard pins down exactly; the real-valued draws are
/// hand-rolled because the std distributions are not portable across
/// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), eng_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return eng_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Modulo bias is irrelevant at our n.
  std::uint64_t below(std::uint64_t n) { return eng_() % n; }

  std::size_t index(std::size_t n) { return static_cast<std::size_t>(below(n)); }

  /// Standard normal via Box-Muller; the second value is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  /// Independent child stream; children with distinct tags never collide.
  Rng fork(std::uint64_t tag) const { return Rng(mix_seed(seed_, tag)); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace protoseg

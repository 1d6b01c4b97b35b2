#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

namespace sola {

/// Seeded random stream. Conversions from raw engine output are done here
/// rather than through <random> distributions so that draws are identical
/// across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 bits of entropy.
  double uniform();

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). `n` must be positive.
  std::uint64_t below(std::uint64_t n);

  /// Standard Gumbel draw; u is clamped into [1e-12, 1 - 1e-12].
  double gumbel();

  /// Child stream keyed by `ids`; independent of how much of this stream
  /// has been consumed.
  Rng split(std::initializer_list<std::uint64_t> ids) const;

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    shuffle(std::span<T>(items));
  }

  /// Identity permutation of [0, n) shuffled.
  std::vector<int> permutation(int n);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace sola

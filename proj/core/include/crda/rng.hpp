#pragma once

#include <cstdint>
#include <span>
#include <utility>

namespace crda {

/// Fixed offsets used to derive independent purpose-specific streams from a
/// master seed: `Rng(master).derive(stream::kInit)` etc.
namespace stream {
inline constexpr std::uint64_t kDataGen = 1;
inline constexpr std::uint64_t kInit = 2;
inline constexpr std::uint64_t kCorruption = 3;
inline constexpr std::uint64_t kShuffle = 4;
inline constexpr std::uint64_t kDdg = 5;
inline constexpr std::uint64_t kEval = 6;
inline constexpr std::uint64_t kAugment = 7;
inline constexpr std::uint64_t kHarness = 8;
}  // namespace stream

/// Counter-based generator: output k is splitmix64(seed + k * golden).
/// Identical seeds give identical streams on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via Box-Muller; the second variate is cached.
  double normal();
  /// Poisson variate. Uses multiplication for lambda < 30 and a rounded
  /// normal approximation above.
  std::uint64_t poisson(double lambda);

  /// Child stream keyed by `offset`; independent of this stream's position.
  Rng derive(std::uint64_t offset) const;

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace crda

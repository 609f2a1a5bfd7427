#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

namespace fprk {

/// Counter-based generator built on the SplitMix64 finalizer.
///
/// Output i of a stream with key K is mix64(K + (i + 1) * 0x9e3779b97f4a7c15),
/// where mix64 is the SplitMix64 output function:
///
///   z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9
///   z = (z ^ (z >> 27)) * 0x94d049bb133111eb
///   z =  z ^ (z >> 31)
///
/// Streams are addressed by key, so independent work items (identity, role,
/// sample index) can draw from disjoint streams in any order or thread.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64();

  /// Uniform in [0, 1) with 53 random bits.
  double next_unit();

  /// Uniform in (0, 1]; safe as a log() argument.
  double next_unit_open_low();

  /// Uniform integer in [0, bound) by rejection; bound must be > 0.
  std::uint64_t next_below(std::uint64_t bound);

  /// Standard normal via Box-Muller. Consumes two outputs per call; the
  /// second Box-Muller variate is discarded so stream positions stay simple.
  double next_gaussian();

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t z);

/// Folds a list of 64-bit words into a stream key: k = mix64(k ^ w) per word,
/// starting from mix64(seed).
std::uint64_t derive_key(std::uint64_t seed, std::initializer_list<std::uint64_t> words);

/// Fisher-Yates permutation of [0, n) driven by `rng`.
std::vector<std::size_t> random_permutation(std::size_t n, CounterRng& rng);

}  // namespace fprk

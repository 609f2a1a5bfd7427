#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace fprk {

inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

/// 64-bit FNV-1a over raw bytes. Used for subject seed derivation, config
/// fingerprints and the stub-encoder contract, so the constants are fixed.
constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t state = kFnvOffsetBasis) {
  for (unsigned char c : bytes) {
    state ^= c;
    state *= kFnvPrime;
  }
  return state;
}

/// Lowercase, zero-padded, 16 hex digits.
std::string to_hex64(std::uint64_t value);

}  // namespace fprk

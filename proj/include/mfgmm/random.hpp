#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mfgmm {

using Rng = std::mt19937_64;

[[nodiscard]] constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed for an independent stream keyed by (master seed, stage, worker).
[[nodiscard]] constexpr std::uint64_t derive_seed(std::uint64_t master,
                                                  std::string_view stage,
                                                  std::uint64_t worker = 0) {
  std::uint64_t h = 0xCBF29CE484222325ULL; // FNV-1a over the stage name
  for (char c : stage) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return splitmix64(splitmix64(master ^ h) + worker);
}

[[nodiscard]] inline Rng make_rng(std::uint64_t master, std::string_view stage,
                                  std::uint64_t worker = 0) {
  return Rng(derive_seed(master, stage, worker));
}

} // namespace mfgmm

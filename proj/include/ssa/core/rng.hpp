#pragma once

#include <bit>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

namespace ssa {

/// Generator used everywhere a random draw is needed.
using Rng = std::mt19937_64;

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/*
 * Counter-based stream derivation. A stream is identified by the master seed
 * plus an ordered list of 64-bit keys (grid-point hash, replicate index, ...).
 * The mapping is a pure function, so the draws a task sees never depend on
 * which worker runs it or in what order tasks are scheduled.
 */
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = detail::splitmix64(master);
  for (std::uint64_t k : keys) h = detail::splitmix64(h ^ detail::splitmix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng make_stream(std::uint64_t master,
                       std::initializer_list<std::uint64_t> keys) {
  return Rng(derive_seed(master, keys));
}

/// Order-sensitive hash of a real vector by bit pattern (+0.0 and -0.0 unify).
inline std::uint64_t hash_values(std::span<const double> values) {
  std::uint64_t h = 0x243f6a8885a308d3ULL ^ values.size();
  for (double v : values) {
    if (v == 0.0) v = 0.0;
    h = detail::splitmix64(h ^ std::bit_cast<std::uint64_t>(v));
  }
  return h;
}

// Stream tags, keep them distinct.
inline constexpr std::uint64_t kTagReplicate = 0x5245504cULL;
inline constexpr std::uint64_t kTagPermutation = 0x5045524dULL;
inline constexpr std::uint64_t kTagFit = 0x46495400ULL;
inline constexpr std::uint64_t kTagStudy = 0x53545544ULL;

}  // namespace ssa

#pragma once

#include <cstdint>
#include <random>

namespace fads {

/**
 * splitmix64 step: the standard finalizer-style generator used to expand one
 * seed into well-separated substream seeds.
 */
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/**
 * Deterministic per-task generator: mixes (seed, stream, index) so distinct
 * tasks get independent engines regardless of scheduling order. Replicate r
 * of study s always sees the same draws, serial or parallel.
 */
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::uint64_t s = seed;
  std::uint64_t a = splitmix64(s);
  s ^= stream * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL;
  std::uint64_t b = splitmix64(s);
  s ^= index * 0xd6e8feb86659fd93ULL + 0xca5a826395121157ULL;
  std::uint64_t c = splitmix64(s);
  std::seed_seq seq{static_cast<unsigned>(a), static_cast<unsigned>(a >> 32),
                    static_cast<unsigned>(b), static_cast<unsigned>(b >> 32),
                    static_cast<unsigned>(c), static_cast<unsigned>(c >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace fads

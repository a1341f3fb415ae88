#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "winprob/normal.hpp"

// Deterministic random streams. Every replicate gets its own engine derived
// from (seed, replicate_index), so a parallel run partitions replicates
// without any shared stream and results never depend on the worker count.
//
// All variates are produced by explicit inverse-CDF transforms of raw 64-bit
// engine output. The std::*_distribution adaptors are implementation-defined
// and would break bit-reproducibility across toolchains.

namespace winprob {

// splitmix64 finalizer; decorrelates consecutive indices into engine seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::mt19937_64 replicate_rng(std::uint64_t seed, std::uint64_t replicate_index) {
  return std::mt19937_64(mix64(seed ^ mix64(replicate_index)));
}

// Uniform on the open interval (0,1): top 53 bits, offset by half an ulp so
// 0 and 1 are unreachable and log/quantile transforms stay finite.
inline double uniform_open(std::mt19937_64& eng) {
  return (static_cast<double>(eng() >> 11) + 0.5) * 0x1.0p-53;
}

inline double normal_draw(std::mt19937_64& eng) { return normal_quantile(uniform_open(eng)); }

inline double exponential_draw(std::mt19937_64& eng, double rate) {
  return -std::log1p(-uniform_open(eng)) / rate;
}

}  // namespace winprob

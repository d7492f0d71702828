/**
 * @file common.hpp
 * @brief Shared error types, RNG helpers and the deterministic parallel loop.
 */
#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>

namespace fusiongan {

// Bad user input: malformed files, inconsistent shapes, invalid options.
// Maps to process exit code 1.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values where the math requires finite ones (training
// divergence). Maps to process exit code 2.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

// Uniform in [0,1) from the top 53 bits; identical across platforms,
// unlike std::uniform_real_distribution.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_in(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

// Uniform integer in [0, n), n >= 1.
inline int uniform_int(Rng& rng, int n) {
  int k = static_cast<int>(uniform01(rng) * n);
  return k < n ? k : n - 1;
}

// splitmix64 finalizer; derives an independent child seed from (base, salt)
// so per-item RNG streams stay decoupled from the parent stream.
inline std::uint64_t split_seed(std::uint64_t base, std::uint64_t salt) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Process-wide worker budget for parallel_for. 0 = hardware concurrency.
// Thread count never changes results: work items only depend on their index
// and reductions happen in index order on the caller side.
void set_thread_budget(int threads);
int thread_budget();

// Runs fn(i) for i in [0, n), possibly on several threads. fn must write
// only to slot i of caller-owned storage.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace fusiongan

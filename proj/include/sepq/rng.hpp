#ifndef SEPQ_RNG_HPP
#define SEPQ_RNG_HPP

#include <cstdint>
#include <functional>

#include "sepq/distributions.hpp"

namespace sepq {

/// Derives a well-mixed stream seed from a master seed (splitmix64 step), so
/// chains, replicates and worker tasks get decorrelated deterministic streams.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Runs task(0..n_tasks-1) on up to n_threads threads. Results must be written
/// to preallocated per-task slots; the schedule never affects outputs.
void parallel_for(int n_tasks, int n_threads, const std::function<void(int)>& task);

}  // namespace sepq

#endif  // SEPQ_RNG_HPP

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>

namespace choicekit {

using Rng = std::mt19937_64;

// Derives an independent child seed from (base, stream) via splitmix64, so
// that per-trial / per-component generators never share state.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + (stream + 1) * 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

// Index draw from an unnormalized non-negative weight vector.
int sample_categorical(const Eigen::VectorXd& weights, Rng& rng);

// Flat Dirichlet(1, ..., 1) draw: normalized iid Exponential(1) variates.
Eigen::VectorXd sample_dirichlet_uniform(int k, Rng& rng);

Eigen::VectorXd standard_normal_vector(int d, Rng& rng);

}  // namespace choicekit

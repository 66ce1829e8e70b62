#pragma once

#include <cstdint>
#include <random>

#include "gmenet/types.hpp"

namespace gmenet {

using Rng = std::mt19937_64;

// Derives independent sub-streams from one master seed so that e.g. batch
// order does not depend on how many draws model init consumed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline void fill_gaussian(MatX& m, Rng& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = dist(rng);
}

inline MatX gaussian_matrix(Index rows, Index cols, Rng& rng, double stddev) {
  MatX m(rows, cols);
  fill_gaussian(m, rng, stddev);
  return m;
}

inline RowVecX gaussian_row(Index n, Rng& rng, double stddev) {
  RowVecX v(n);
  std::normal_distribution<double> dist(0.0, stddev);
  for (Index j = 0; j < n; ++j) v(j) = dist(rng);
  return v;
}

}  // namespace gmenet

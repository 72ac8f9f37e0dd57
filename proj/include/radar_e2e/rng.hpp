#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "radar_e2e/complex_core.hpp"

namespace radar_e2e {

using Rng = std::mt19937_64;

/// Independent stream derived deterministically from a root seed and a path
/// such as {iteration, phase, block}. Same (seed, path) always gives the same stream.
Rng substream(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

/// Names a family of block streams: (seed, a, b) then the block index.
struct StreamId {
  std::uint64_t seed = 0;
  std::uint64_t a = 0;
  std::uint64_t b = 0;
};

inline Rng block_rng(const StreamId& id, std::uint64_t block) { return substream(id.seed, {id.a, id.b, block}); }

/// Uniform on the open interval (0, 1).
double uniform_open(Rng& rng);

double standard_normal(Rng& rng);

/// Circular complex Gaussian with E|x|^2 = variance, split evenly between re/im.
cdouble complex_normal(Rng& rng, double variance = 1.0);

}  // namespace radar_e2e

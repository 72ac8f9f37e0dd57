#include "radar_e2e/rng.hpp"

#include <cmath>
#include <utility>
#include <vector>

namespace radar_e2e {

Rng substream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::vector<std::uint32_t> words;
  words.reserve(2 * (path.size() + 1) + 1);
  auto push = [&](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  words.push_back(static_cast<std::uint32_t>(path.size()));
  for (auto p : path) push(p);
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

double uniform_open(Rng& rng) {
  // 53 random bits mapped to the centre of each of 2^53 cells, so 0 and 1 never occur.
  const std::uint64_t bits = rng() >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

namespace {

// Marsaglia polar method; both outputs are independent standard normals.
std::pair<double, double> normal_pair(Rng& rng) {
  double u, v, s;
  do {
    u = 2.0 * uniform_open(rng) - 1.0;
    v = 2.0 * uniform_open(rng) - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  return {u * f, v * f};
}

}  // namespace

double standard_normal(Rng& rng) { return normal_pair(rng).first; }

cdouble complex_normal(Rng& rng, double variance) {
  const double s = std::sqrt(variance / 2.0);
  const auto [re, im] = normal_pair(rng);
  return {s * re, s * im};
}

}  // namespace radar_e2e

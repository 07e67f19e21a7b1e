#pragma once

// SPDX-License-Identifier: Apache-2.0

// splitmix64 stream plus the handful of draws the experiments need.
// The generator is fixed so rollout streams are reproducible across
// platforms and languages.

#include <cmath>
#include <cstdint>
#include <vector>

namespace opo {

struct Seed {
  std::uint64_t value = 0;
};

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t state) : state_(state) {}
  explicit SplitMix64(Seed seed) : state_(seed.value) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer on [lo, hi].
  std::uint64_t integer(std::uint64_t lo, std::uint64_t hi) {
    return lo + next() % (hi - lo + 1);
  }

  /// Standard normal via Box-Muller (one draw per call; the pair is not cached).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  /// Flat Dirichlet draw: a uniformly random point of the open simplex.
  std::vector<double> simplex(std::size_t n) {
    std::vector<double> p(n);
    double total = 0.0;
    for (auto& x : p) {
      double u = uniform();
      while (u <= 0.0) u = uniform();
      x = -std::log(u);
      total += x;
    }
    for (auto& x : p) x /= total;
    return p;
  }

 private:
  std::uint64_t state_;
};

}  // namespace opo

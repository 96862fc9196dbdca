#pragma once

// Test-only reference computations, kept independent of the library's
// dynamic-programming and BPTT code paths.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "lstm_cctc/log_probs.hpp"

namespace lstm_cctc::testing {

inline std::vector<int> path_from_bits(std::uint64_t bits, int steps) {
  std::vector<int> path(static_cast<std::size_t>(steps));
  for (int t = 0; t < steps; ++t) path[t] = static_cast<int>((bits >> t) & 1U);
  return path;
}

// Number of maximal object runs, computed independently of the library.
inline int count_runs(const std::vector<int>& path) {
  int runs = 0;
  for (std::size_t t = 0; t < path.size(); ++t) {
    if (path[t] == 1 && (t == 0 || path[t - 1] == 0)) ++runs;
  }
  return runs;
}

inline double path_logp(const FrameLogProbs& lp, const std::vector<int>& path) {
  double s = 0.0;
  for (std::size_t t = 0; t < path.size(); ++t) s += lp.rows[t][path[t]];
  return s;
}

// Probability-space sum over every count-consistent path.
inline double enumerate_likelihood(const FrameLogProbs& lp, int count) {
  const int steps = lp.steps();
  double total = 0.0;
  for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << steps); ++bits) {
    const auto path = path_from_bits(bits, steps);
    if (count_runs(path) == count) total += std::exp(path_logp(lp, path));
  }
  return total;
}

// Highest log-probability among count-consistent paths.
inline double enumerate_max(const FrameLogProbs& lp, int count) {
  const int steps = lp.steps();
  double best = -std::numeric_limits<double>::infinity();
  for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << steps); ++bits) {
    const auto path = path_from_bits(bits, steps);
    if (count_runs(path) == count) best = std::max(best, path_logp(lp, path));
  }
  return best;
}

inline FrameLogProbs random_log_probs(int steps, std::mt19937_64& rng, double spread = 3.0) {
  std::normal_distribution<double> normal(0.0, spread);
  FrameLogProbs lp;
  for (int t = 0; t < steps; ++t) {
    const double z0 = normal(rng);
    const double z1 = normal(rng);
    const double m = std::max(z0, z1);
    const double norm = m + std::log(std::exp(z0 - m) + std::exp(z1 - m));
    lp.rows.push_back({z0 - norm, z1 - norm});
  }
  return lp;
}

inline double central_difference(const std::function<double()>& f, double& x, double h) {
  const double saved = x;
  x = saved + h;
  const double up = f();
  x = saved - h;
  const double down = f();
  x = saved;
  return (up - down) / (2.0 * h);
}

// Fourth-order central stencil; truncation error O(h^4).
inline double five_point_difference(const std::function<double()>& f, double& x, double h) {
  const double saved = x;
  auto at = [&](double offset) {
    x = saved + offset;
    return f();
  };
  const double d = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12.0 * h);
  x = saved;
  return d;
}

// |a - b| / max(|a|, |b|, floor); the floor keeps near-zero gradients from
// dominating the ratio.
inline double relative_error(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace lstm_cctc::testing

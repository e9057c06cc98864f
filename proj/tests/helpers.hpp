#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "bdt/tree.hpp"

namespace bdt::testing {

inline TreeSpec binary3() { return TreeSpec::validate({{1.0, 2.0}, {2, 2}, 0.0, 0.0, 3.0}); }

inline TreeSpec two_branch() { return TreeSpec::validate({{0.5}, {2}, 0.0, 0.0, 1.0}); }

/// A random tree with at most `max_eta` branching points, N_i in {2, 3} and
/// at most 64 branches.
inline TreeSpec random_spec(std::mt19937_64& gen, int max_eta = 3) {
  std::uniform_int_distribution<int> eta_dist(0, max_eta);
  std::uniform_int_distribution<int> n_dist(2, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int eta = eta_dist(gen);
  const double T = 0.5 + 3.0 * unit(gen);
  std::vector<double> tau;
  for (int i = 0; i < eta; ++i) tau.push_back(T * (0.05 + 0.9 * unit(gen)));
  std::sort(tau.begin(), tau.end());
  tau.erase(std::unique(tau.begin(), tau.end()), tau.end());
  std::vector<std::int64_t> N;
  for (std::size_t i = 0; i < tau.size(); ++i) N.push_back(n_dist(gen));
  return TreeSpec::validate({tau, N, 0.0, 0.0, T});
}

/// Largest absolute difference relative to max(1, |b|).
inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace bdt::testing

#pragma once

// Forests of independent decision trees: the lexicographic order on
// (mu_0(T)/P_eta, x - cT, -P_eta), the maximal set and the forest asymptotics.

#include <cstdint>
#include <optional>
#include <vector>

#include "bdt/analytics.hpp"
#include "bdt/mc.hpp"
#include "bdt/pickands.hpp"
#include "bdt/tree.hpp"

namespace bdt {

struct ForestSpec {
  double T = 1.0;
  std::vector<TreeSpec> trees;

  /// Every tree must carry the horizon T.
  static ForestSpec validate(double T, const std::vector<RawTreeSpec>& raw);
};

/// mu_0(T)/P_eta as an exact fraction, when the branching times are
/// representable as ratios of small integers.
struct Fraction {
  __int128 num = 0;
  __int128 den = 1;
};

struct OrderKey {
  double spread = 0.0;                 // mu_0(T) / P_eta
  std::optional<Fraction> spread_exact;
  double level = 0.0;                  // x - cT
  std::int64_t neg_branches = 0;       // -P_eta
};

OrderKey order_key(const TreeSpec& spec);

enum class Ordering { Less, Equivalent, Greater };

/// Greater when tree a dominates tree b; Equivalent when all three keys tie.
Ordering compare(const TreeSpec& a, const TreeSpec& b);

/// 0-based indices of the trees equivalent to the maximum.
std::vector<std::size_t> maximal_set(const ForestSpec& forest);

/// Sum of all_branch_asym over the maximal set. H holds one constant per
/// tree; entries outside the maximal set are not read.
AsymptoticsResult forest_asym(double u, const ForestSpec& forest,
                              const std::vector<PickandsEstimate>& H);

/// Probability that some tree has all its branches above u + c_i t at one t.
/// Tilted sampling mixes the all-branch tilts of the individual trees.
McEstimate simulate_forest_event(const ForestSpec& forest, double u, const McConfig& config,
                                 Estimator estimator = Estimator::Tilted);

}  // namespace bdt

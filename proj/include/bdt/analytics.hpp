#pragma once

// Closed-form evaluators for the exceedance asymptotics of decision trees.
// Every tree formula reads the level relative to the start, i.e. with
// threshold u - x, so a tree with start x and level u behaves like a tree
// started at 0 with level u - x. All results are carried in log space.

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bdt/pickands.hpp"
#include "bdt/tree.hpp"

namespace bdt {

enum class Formula {
  BmCrossingExact,
  BmCrossingAsym,
  SingleBranch,
  Diameter,
  EndpointOrthant,
  AllBranch,
  RandomOffspring,
  ClassicalBbm,
  ClassicalBbmStatement,
  Forest,
};

std::string_view to_string(Formula f) noexcept;
Formula formula_from_string(std::string_view id);

struct AsymptoticsResult {
  Formula formula;
  double u = 0.0;
  double log_value = 0.0;
  RawTreeSpec spec;
  std::string note;

  double value() const;
};

/// P{sup_{t<=T} (B(t) - ct) > u} for a standard Brownian motion.
double bm_crossing_exact(double u, double c, double T);
double log_bm_crossing_exact(double u, double c, double T);

/// The Mills-ratio form 2 sqrt(T) / (sqrt(2 pi) (u + cT)) exp(-(u + cT)^2 / 2T).
AsymptoticsResult bm_crossing_asym(double u, double c, double T);

AsymptoticsResult single_branch_asym(double u, const TreeSpec& spec);
AsymptoticsResult diameter_asym(double u, const TreeSpec& spec);
AsymptoticsResult endpoint_orthant_asym(double u, const TreeSpec& spec);

/// (1 - Phi(|c|))^{-P}.
double korshunov_constant(double c, std::int64_t branch_count);
double log_korshunov_constant(double c, std::int64_t branch_count);

AsymptoticsResult all_branch_asym(double u, const TreeSpec& spec, const PickandsEstimate& H);

/// Offspring law of one branching point: support values with their probabilities.
struct OffspringLaw {
  std::vector<std::pair<std::int64_t, double>> atoms;

  std::int64_t essinf() const;
  double essinf_probability() const;
};

struct RandomTreeSpec {
  std::vector<double> tau;
  std::vector<OffspringLaw> laws;
  double c = 0.0;
  double x = 0.0;
  double T = 1.0;

  /// The deterministic tree with every N_i at its essential infimum.
  TreeSpec essinf_tree() const;
};

AsymptoticsResult random_offspring_asym(double u, const RandomTreeSpec& spec,
                                        const PickandsEstimate& H);

/// Limit of P{u^2 (T - first passage) >= x | first passage <= T - y/u^2}.
double ruintime_limit(double x, double y, const TreeSpec& spec);

/// Classical branching Brownian motion with Exp(1) clocks. Carries the u^{-1}
/// factor of the dominating no-branching term.
AsymptoticsResult classical_bbm_asym(double u, double c, double T);
/// The same expression without the u^{-1} factor, kept for comparison.
AsymptoticsResult classical_bbm_statement(double u, double c, double T);

}  // namespace bdt

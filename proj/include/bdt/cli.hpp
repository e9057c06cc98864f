#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "bdt/mc.hpp"
#include "bdt/pickands.hpp"
#include "bdt/tree.hpp"

namespace bdt::cli {

/// Runs the command line; returns 0 on success, 2 on invalid input, 3 on a
/// numerical failure. Diagnostics go to err.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

struct RatioRow {
  double u = 0.0;
  double mc_estimate = 0.0;
  double mc_stderr = 0.0;
  double asym_value = 0.0;
  double ratio = 0.0;
  double ratio_stderr = 0.0;
};

struct RatioConfig {
  EventKind event = EventKind::AllBranch;
  Estimator estimator = Estimator::Tilted;
  McConfig mc;
  /// Constant for the all-branch formula; the exact value 2 is used for a
  /// single-branch tree when absent.
  std::optional<PickandsEstimate> H;
};

/// MC estimate over asymptotic value for each level.
std::vector<RatioRow> ratio_table(const TreeSpec& spec, const std::vector<double>& u_grid,
                                  const RatioConfig& config);

void write_ratio_csv(std::ostream& out, const std::vector<RatioRow>& rows);

}  // namespace bdt::cli

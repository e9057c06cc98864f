#include "bdt/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bdt/error.hpp"
#include "bdt/normal.hpp"

namespace bdt {

namespace {

constexpr std::pair<Formula, std::string_view> kFormulaIds[] = {
    {Formula::BmCrossingExact, "bm_crossing_exact"},
    {Formula::BmCrossingAsym, "bm_crossing_asym"},
    {Formula::SingleBranch, "single_branch"},
    {Formula::Diameter, "diameter"},
    {Formula::EndpointOrthant, "endpoint_orthant"},
    {Formula::AllBranch, "all_branch"},
    {Formula::RandomOffspring, "random_offspring"},
    {Formula::ClassicalBbm, "classical_bbm"},
    {Formula::ClassicalBbmStatement, "classical_bbm_statement"},
    {Formula::Forest, "forest"},
};

const double kLogPi = std::log(M_PI);

void check_level(double u) {
  if (!(u > 0.0) || !std::isfinite(u)) throw Error(ErrorCode::BadArguments, "need u > 0");
}

// The drifted level u - x + cT seen at the horizon; must be positive.
double effective_level(double u, const TreeSpec& spec) {
  check_level(u);
  const double v = u - spec.x() + spec.c() * spec.horizon();
  if (!(v > 0.0) || !(u - spec.x() > 0.0)) {
    throw Error(ErrorCode::BadArguments, "level must exceed the start x and satisfy u - x + cT > 0");
  }
  return v;
}

AsymptoticsResult make(Formula f, double u, double log_value, RawTreeSpec spec = {},
                       std::string note = {}) {
  return AsymptoticsResult{f, u, log_value, std::move(spec), std::move(note)};
}

}  // namespace

std::string_view to_string(Formula f) noexcept {
  for (const auto& [formula, id] : kFormulaIds) {
    if (formula == f) return id;
  }
  return "unknown";
}

Formula formula_from_string(std::string_view id) {
  for (const auto& [formula, name] : kFormulaIds) {
    if (name == id) return formula;
  }
  throw Error(ErrorCode::BadArguments, "unknown formula '" + std::string(id) + "'");
}

double AsymptoticsResult::value() const { return std::exp(log_value); }

double log_bm_crossing_exact(double u, double c, double T) {
  if (!(T > 0.0)) throw Error(ErrorCode::NonPositiveHorizon, "need T > 0");
  check_level(u);
  const double s = std::sqrt(T);
  return log_add(log_normal_sf((u + c * T) / s), -2.0 * c * u + log_normal_sf((u - c * T) / s));
}

double bm_crossing_exact(double u, double c, double T) {
  return std::exp(log_bm_crossing_exact(u, c, T));
}

AsymptoticsResult bm_crossing_asym(double u, double c, double T) {
  if (!(T > 0.0)) throw Error(ErrorCode::NonPositiveHorizon, "need T > 0");
  check_level(u);
  const double v = u + c * T;
  if (!(v > 0.0)) throw Error(ErrorCode::BadArguments, "need u + cT > 0");
  const double log_value =
      std::log(2.0) + 0.5 * std::log(T) - kLogSqrt2Pi - std::log(v) - v * v / (2.0 * T);
  return make(Formula::BmCrossingAsym, u, log_value, RawTreeSpec{{}, {}, c, 0.0, T});
}

AsymptoticsResult single_branch_asym(double u, const TreeSpec& spec) {
  const double v = effective_level(u, spec);
  const double T = spec.horizon();
  const double log_value = std::log(static_cast<double>(spec.branch_count())) +
                           0.5 * (std::log(2.0) - kLogPi) + 0.5 * std::log(T) - std::log(v) -
                           v * v / (2.0 * T);
  return make(Formula::SingleBranch, u, log_value, spec.raw());
}

AsymptoticsResult diameter_asym(double u, const TreeSpec& spec) {
  check_level(u);
  if (spec.eta() == 0) throw Error(ErrorCode::DegenerateTree, "a single branch has zero diameter");
  const double span = spec.horizon() - spec.tau(1);
  const double P = static_cast<double>(spec.branch_count());
  const double N1 = static_cast<double>(spec.N(1));
  const double log_value = 2.0 * std::log(P) + std::log((N1 - 1.0) / N1) + std::log(2.0) +
                           0.5 * std::log(span) - std::log(u) - 0.5 * kLogPi -
                           u * u / (4.0 * span);
  return make(Formula::Diameter, u, log_value, spec.raw());
}

AsymptoticsResult endpoint_orthant_asym(double u, const TreeSpec& spec) {
  const double v = effective_level(u, spec);
  const double level = u - spec.x();
  const Eigenstructure eig = eigenstructure(spec.horizon(), spec);
  const double P = static_cast<double>(spec.branch_count());
  const double mu0 = eig.top();
  double log_value = -P * std::log(level) + (P - 0.5) * std::log(mu0) - P * kLogSqrt2Pi -
                     v * v * P / (2.0 * mu0);
  for (std::size_t k = 1; k < eig.pairs.size(); ++k) {
    log_value -= 0.5 * static_cast<double>(eig.pairs[k].multiplicity) * std::log(eig.pairs[k].mu);
  }
  return make(Formula::EndpointOrthant, u, log_value, spec.raw());
}

double log_korshunov_constant(double c, std::int64_t branch_count) {
  if (branch_count < 1) throw Error(ErrorCode::BadArguments, "need P >= 1");
  return -static_cast<double>(branch_count) * log_normal_sf(std::abs(c));
}

double korshunov_constant(double c, std::int64_t branch_count) {
  return std::exp(log_korshunov_constant(c, branch_count));
}

AsymptoticsResult all_branch_asym(double u, const TreeSpec& spec, const PickandsEstimate& H) {
  const double lambda = 1.0 / eigenstructure(spec.horizon(), spec).top();
  if (H.N != spec.branch_count() || std::abs(H.lambda - lambda) > 1e-9 * lambda) {
    throw Error(ErrorCode::MismatchedConstant,
                "constant estimated for N = " + std::to_string(H.N) +
                    ", lambda = " + std::to_string(H.lambda) + "; tree needs N = " +
                    std::to_string(spec.branch_count()) + ", lambda = " + std::to_string(lambda));
  }
  if (!(H.value > 0.0)) throw Error(ErrorCode::BadArguments, "constant must be positive");
  const AsymptoticsResult orthant = endpoint_orthant_asym(u, spec);
  return make(Formula::AllBranch, u, std::log(H.value) + orthant.log_value, spec.raw());
}

std::int64_t OffspringLaw::essinf() const {
  if (atoms.empty()) throw Error(ErrorCode::BadArguments, "offspring law has no atoms");
  return std::min_element(atoms.begin(), atoms.end())->first;
}

double OffspringLaw::essinf_probability() const {
  const std::int64_t low = essinf();
  double p = 0.0;
  for (const auto& [n, q] : atoms) {
    if (n == low) p += q;
  }
  return p;
}

TreeSpec RandomTreeSpec::essinf_tree() const {
  if (laws.size() != tau.size()) {
    throw Error(ErrorCode::BadArguments, "need one offspring law per branching time");
  }
  RawTreeSpec raw{tau, {}, c, x, T};
  for (const auto& law : laws) raw.N.push_back(law.essinf());
  return TreeSpec::validate(raw);
}

AsymptoticsResult random_offspring_asym(double u, const RandomTreeSpec& spec,
                                        const PickandsEstimate& H) {
  double log_atoms = 0.0;
  for (std::size_t i = 0; i < spec.laws.size(); ++i) {
    const auto& law = spec.laws[i];
    double total = 0.0;
    for (const auto& [n, q] : law.atoms) {
      if (n <= 0 || !(q >= 0.0)) {
        throw Error(ErrorCode::InvalidOffspring, "offspring atoms need N >= 1 and p >= 0");
      }
      total += q;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw Error(ErrorCode::BadArguments, "offspring law probabilities must sum to 1");
    }
    const double p = law.essinf_probability();
    if (!(p > 0.0)) {
      throw Error(ErrorCode::ZeroAtomProbability,
                  "law " + std::to_string(i + 1) + " puts no mass on its smallest value");
    }
    log_atoms += std::log(p);
  }
  const TreeSpec tree = spec.essinf_tree();
  AsymptoticsResult r = all_branch_asym(u, tree, H);
  r.formula = Formula::RandomOffspring;
  r.log_value += log_atoms;
  return r;
}

double ruintime_limit(double x, double y, const TreeSpec& spec) {
  if (!(y > 0.0) || !(x > y)) throw Error(ErrorCode::BadArguments, "need x > y > 0");
  const double mu0 = eigenstructure(spec.horizon(), spec).top();
  return std::exp(-(x - y) * static_cast<double>(spec.branch_count()) / (2.0 * mu0 * mu0));
}

namespace {

double log_classical_core(double u, double c, double T) {
  if (!(T > 0.0)) throw Error(ErrorCode::NonPositiveHorizon, "need T > 0");
  check_level(u);
  const double v = u + c * T;
  return -T + 0.5 * (std::log(2.0 * T) - kLogPi) - v * v / (2.0 * T);
}

}  // namespace

AsymptoticsResult classical_bbm_asym(double u, double c, double T) {
  return make(Formula::ClassicalBbm, u, log_classical_core(u, c, T) - std::log(u),
              RawTreeSpec{{}, {}, c, 0.0, T},
              "carries the u^-1 factor of the dominating term; the stated form omits it");
}

AsymptoticsResult classical_bbm_statement(double u, double c, double T) {
  return make(Formula::ClassicalBbmStatement, u, log_classical_core(u, c, T),
              RawTreeSpec{{}, {}, c, 0.0, T},
              "stated form without u^-1; not a probability asymptotic as written");
}

}  // namespace bdt

#include "bdt/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace bdt {

TreeSpec TreeSpec::validate(const RawTreeSpec& raw) {
  if (raw.tau.size() != raw.N.size()) {
    throw Error(ErrorCode::BadArguments, "tau and N must have the same length");
  }
  if (!std::isfinite(raw.T) || !(raw.T > 0.0)) {
    throw Error(ErrorCode::InvalidHorizon, "horizon T must be positive and finite");
  }
  if (!std::isfinite(raw.c) || !std::isfinite(raw.x)) {
    throw Error(ErrorCode::BadArguments, "drift and start must be finite");
  }
  for (std::size_t i = 0; i < raw.N.size(); ++i) {
    if (raw.N[i] <= 0) {
      throw Error(ErrorCode::InvalidOffspring,
                  "N[" + std::to_string(i) + "] = " + std::to_string(raw.N[i]));
    }
  }
  for (std::size_t i = 1; i < raw.tau.size(); ++i) {
    if (!(raw.tau[i] > raw.tau[i - 1])) {
      throw Error(ErrorCode::NonIncreasingTau, "tau must be strictly increasing");
    }
  }
  if (!raw.tau.empty() && (!(raw.tau.front() > 0.0) || !(raw.tau.back() < raw.T))) {
    throw Error(ErrorCode::TauOutOfRange, "branching times must lie in (0, T)");
  }

  TreeSpec spec;
  spec.c_ = raw.c;
  spec.x_ = raw.x;
  spec.T_ = raw.T;
  for (std::size_t i = 0; i < raw.tau.size(); ++i) {
    if (raw.N[i] == 1) continue;
    const std::int64_t prev = spec.P_.back();
    if (prev > std::numeric_limits<std::int64_t>::max() / raw.N[i]) {
      throw Error(ErrorCode::InvalidOffspring, "branch count overflows");
    }
    spec.tau_.push_back(raw.tau[i]);
    spec.N_.push_back(raw.N[i]);
    spec.P_.push_back(prev * raw.N[i]);
  }
  return spec;
}

TreeSpec TreeSpec::single_branch(double T, double c, double x) {
  return validate(RawTreeSpec{{}, {}, c, x, T});
}

int TreeSpec::stage(double t) const noexcept {
  return static_cast<int>(std::lower_bound(tau_.begin(), tau_.end(), t) - tau_.begin());
}

RawTreeSpec TreeSpec::raw() const { return RawTreeSpec{tau_, N_, c_, x_, T_}; }

TreeSpec TreeSpec::with_drift(double c) const {
  TreeSpec copy = *this;
  copy.c_ = c;
  return copy;
}

TreeSpec TreeSpec::with_start(double x) const {
  TreeSpec copy = *this;
  copy.x_ = x;
  return copy;
}

namespace {

void check_branch(BranchIndex gamma, const TreeSpec& spec) {
  if (gamma < 0 || gamma >= spec.branch_count()) {
    throw Error(ErrorCode::IndexOutOfRange,
                "branch " + std::to_string(gamma) + " outside [0, " +
                    std::to_string(spec.branch_count()) + ")");
  }
}

}  // namespace

std::vector<std::int64_t> digits(BranchIndex gamma, const TreeSpec& spec) {
  check_branch(gamma, spec);
  std::vector<std::int64_t> out(static_cast<std::size_t>(spec.eta()));
  for (int i = 1; i <= spec.eta(); ++i) {
    out[static_cast<std::size_t>(i - 1)] = (gamma / spec.P(i - 1)) % spec.N(i);
  }
  return out;
}

int separation_moment(BranchIndex gamma1, BranchIndex gamma2, const TreeSpec& spec) {
  check_branch(gamma1, spec);
  check_branch(gamma2, spec);
  if (gamma1 == gamma2) {
    throw Error(ErrorCode::EqualBranches, "separation moment needs distinct branches");
  }
  for (int n = 1; n <= spec.eta(); ++n) {
    if (gamma1 % spec.P(n) != gamma2 % spec.P(n)) return n;
  }
  // unreachable: distinct indices below P_eta differ modulo P_eta
  throw Error(ErrorCode::IndexOutOfRange, "branches do not separate");
}

double covariance(BranchIndex gamma1, double t1, BranchIndex gamma2, double t2,
                  const TreeSpec& spec) {
  const double shared = std::min(t1, t2);
  if (gamma1 == gamma2) {
    check_branch(gamma1, spec);
    return shared;
  }
  return std::min(shared, spec.tau(separation_moment(gamma1, gamma2, spec)));
}

BranchIndex digit_swap(BranchIndex gamma, int j, std::int64_t b, std::int64_t c,
                       const TreeSpec& spec) {
  if (j < 1 || j > spec.eta() || b < 0 || c < 0 || b >= spec.N(j) || c >= spec.N(j)) {
    throw Error(ErrorCode::IndexOutOfRange, "digit_swap arguments out of range");
  }
  const auto a = digits(gamma, spec);
  std::int64_t digit = a[static_cast<std::size_t>(j - 1)];
  if (digit == b) {
    digit = c;
  } else if (digit == c) {
    digit = b;
  }
  return gamma + (digit - a[static_cast<std::size_t>(j - 1)]) * spec.P(j - 1);
}

std::int64_t Eigenstructure::dimension() const {
  std::int64_t d = 0;
  for (const auto& p : pairs) d += p.multiplicity;
  return d;
}

double Eigenstructure::trace() const {
  double s = 0.0;
  for (const auto& p : pairs) s += static_cast<double>(p.multiplicity) * p.mu;
  return s;
}

double Eigenstructure::log_determinant() const {
  double s = 0.0;
  for (const auto& p : pairs) s += static_cast<double>(p.multiplicity) * std::log(p.mu);
  return s;
}

Eigenstructure eigenstructure(double t, const TreeSpec& spec) {
  if (!(t > 0.0) || t > spec.horizon()) {
    throw Error(ErrorCode::BadArguments, "eigenstructure requires t in (0, T]");
  }
  const int top = spec.stage(t);
  Eigenstructure es;
  es.t = t;
  es.pairs.reserve(static_cast<std::size_t>(top) + 1);
  for (int v = 0; v <= top; ++v) {
    double mu = t - spec.tau(top);
    for (int l = v + 1; l <= top; ++l) {
      double prod = 1.0;
      for (int j = l; j <= top; ++j) prod *= static_cast<double>(spec.N(j));
      mu += (spec.tau(l) - spec.tau(l - 1)) * prod;
    }
    const std::int64_t mult = v == 0 ? 1 : spec.P(v) - spec.P(v - 1);
    es.pairs.push_back({mu, mult});
  }
  return es;
}

}  // namespace bdt

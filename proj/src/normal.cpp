#include "bdt/normal.hpp"

#include <cmath>
#include <limits>
#include <utility>

namespace bdt {

double normal_pdf(double x) noexcept { return std::exp(-0.5 * x * x - kLogSqrt2Pi); }

double normal_sf(double x) noexcept { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

namespace {

// Mills ratio (1 - Phi(x)) / phi(x) by the Laplace continued fraction,
// evaluated with the modified Lentz method. Good for x >= 3.
double mills_ratio(double x) noexcept {
  constexpr double tiny = 1e-300;
  double f = x;
  double c = x;
  double d = 0.0;
  for (int k = 1; k < 500; ++k) {
    d = x + k * d;
    d = (std::abs(d) < tiny) ? 1.0 / tiny : 1.0 / d;
    c = x + k / c;
    if (std::abs(c) < tiny) c = tiny;
    const double delta = c * d;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return 1.0 / f;
}

}  // namespace

double log_normal_sf(double x) noexcept {
  if (x < 5.0) return std::log(normal_sf(x));
  return std::log(mills_ratio(x)) - 0.5 * x * x - kLogSqrt2Pi;
}

double log_add(double a, double b) noexcept {
  if (a < b) std::swap(a, b);
  if (b == -std::numeric_limits<double>::infinity()) return a;
  return a + std::log1p(std::exp(b - a));
}

double log_sub(double a, double b) noexcept {
  if (b == -std::numeric_limits<double>::infinity()) return a;
  if (a == b) return -std::numeric_limits<double>::infinity();
  return a + std::log(-std::expm1(b - a));
}

}  // namespace bdt

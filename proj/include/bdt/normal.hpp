#pragma once

namespace bdt {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178032973640562;

double normal_pdf(double x) noexcept;

/// Upper tail 1 - Phi(x).
double normal_sf(double x) noexcept;

/// log(1 - Phi(x)), finite for every finite x.
double log_normal_sf(double x) noexcept;

/// log(exp(a) + exp(b)) without overflow.
double log_add(double a, double b) noexcept;

/// log(exp(a) - exp(b)) for a >= b; -inf when equal.
double log_sub(double a, double b) noexcept;

}  // namespace bdt

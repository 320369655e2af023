#pragma once

#include <cmath>
#include <limits>

namespace focs {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Logistic function clamped to the open interval (0,1).
inline double sigmoid(double a) {
  constexpr double kHi = 1.0 - std::numeric_limits<double>::epsilon() / 2;
  constexpr double kLo = std::numeric_limits<double>::min();
  double s = a >= 0 ? 1.0 / (1.0 + std::exp(-a)) : std::exp(a) / (1.0 + std::exp(a));
  if (s > kHi) return kHi;
  if (s < kLo) return kLo;
  return s;
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

/// log(1 + exp(a)) without overflow.
inline double softplus(double a) {
  return a > 0 ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a));
}

/// Add-one smoothed estimate of Pr(x=1) from counts.
inline double smoothed_p1(double ones, double total) { return (ones + 1.0) / (total + 2.0); }

/// Weighted log-likelihood of `ones` positives among `total` under the smoothed column.
inline double smoothed_cll(double ones, double total) {
  double p1 = smoothed_p1(ones, total);
  double zeros = total - ones;
  double ll = 0.0;
  if (ones > 0) ll += ones * std::log(p1);
  if (zeros > 0) ll += zeros * std::log(1.0 - p1);
  return ll;
}

}  // namespace focs

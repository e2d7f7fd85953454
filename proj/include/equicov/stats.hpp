#pragma once

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>

#include "equicov/errors.hpp"

namespace equicov {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  [[nodiscard]] bool contains(double x) const noexcept { return lo <= x && x <= hi; }
  [[nodiscard]] double width() const noexcept { return hi - lo; }
};

// Two-sided standard-normal critical value for a confidence level in (0,1).
inline double normal_critical(double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw ParameterError("confidence level must lie in (0,1)");
  }
  static const boost::math::normal_distribution<double> std_normal;
  return boost::math::quantile(std_normal, 0.5 + 0.5 * confidence);
}

// Wilson score interval for a binomial proportion.
inline Interval wilson_interval(std::size_t successes, std::size_t trials, double confidence) {
  if (trials == 0) return {0.0, 1.0};
  const double z = normal_critical(confidence);
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double centre = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  // The exact interval touches 0 (resp. 1) when no (resp. every) trial succeeds.
  const double lo = successes == 0 ? 0.0 : std::max(0.0, centre - half);
  const double hi = successes == trials ? 1.0 : std::min(1.0, centre + half);
  return {lo, hi};
}

struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;

  [[nodiscard]] Interval ci(double confidence) const {
    const double z = normal_critical(confidence);
    return {mean - z * std_error, mean + z * std_error};
  }
};

// Sample mean and standard error, summed in index order.
inline MeanEstimate mean_estimate(std::span<const double> values) {
  MeanEstimate out;
  out.n = values.size();
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    const double var = ss / static_cast<double>(values.size() - 1);
    out.std_error = std::sqrt(var / static_cast<double>(values.size()));
  }
  return out;
}

// |a - b| expressed in combined standard errors.
inline double se_distance(const MeanEstimate& a, const MeanEstimate& b) {
  const double se = std::hypot(a.std_error, b.std_error);
  const double d = std::abs(a.mean - b.mean);
  if (se == 0.0) return d == 0.0 ? 0.0 : INFINITY;
  return d / se;
}

}  // namespace equicov

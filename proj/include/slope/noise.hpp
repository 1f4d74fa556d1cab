#pragma once

#include <random>

#include "slope/core.hpp"

namespace slope {

/// Error distribution: gaussian(sigma) or scaled student_t(df, scale), plus
/// an additive shift.
struct NoiseSpec {
  enum class Kind { gaussian, student_t };

  Kind kind = Kind::gaussian;
  double scale = 1.0;
  double df = 0.0;  // student_t only
  double shift = 0.0;

  static NoiseSpec gaussian(double sigma);
  static NoiseSpec student_t(double df, double scale);

  /// Same distribution shifted so that its alpha-quantile is 0.
  NoiseSpec centered_at_quantile(double alpha) const;

  double cdf(double x) const;
  double pdf(double x) const;
  /// Variance of the unshifted base (requires df > 2 for student_t).
  double variance() const;
  double sample(std::mt19937_64& rng) const;

  void validate() const;
  std::string name() const;
};

}  // namespace slope

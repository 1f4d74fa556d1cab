#include "slope/noise.hpp"

#include <cmath>
#include <limits>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/tools/roots.hpp>

namespace slope {

NoiseSpec NoiseSpec::gaussian(double sigma) {
  NoiseSpec out;
  out.kind = Kind::gaussian;
  out.scale = sigma;
  out.validate();
  return out;
}

NoiseSpec NoiseSpec::student_t(double df, double scale) {
  NoiseSpec out;
  out.kind = Kind::student_t;
  out.df = df;
  out.scale = scale;
  out.validate();
  return out;
}

void NoiseSpec::validate() const {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw std::invalid_argument("noise: scale must be positive");
  if (kind == Kind::student_t && !(df > 0.0)) throw std::invalid_argument("noise: df must be positive");
  if (!std::isfinite(shift)) throw std::invalid_argument("noise: shift must be finite");
}

std::string NoiseSpec::name() const { return kind == Kind::gaussian ? "gaussian" : "student_t"; }

double NoiseSpec::cdf(double x) const {
  const double z = (x - shift) / scale;
  if (kind == Kind::gaussian) return normal_cdf(z);
  return boost::math::cdf(boost::math::students_t(df), z);
}

double NoiseSpec::pdf(double x) const {
  const double z = (x - shift) / scale;
  if (kind == Kind::gaussian) return std::exp(-0.5 * z * z) / (scale * std::sqrt(2.0 * M_PI));
  return boost::math::pdf(boost::math::students_t(df), z) / scale;
}

double NoiseSpec::variance() const {
  if (kind == Kind::gaussian) return scale * scale;
  if (!(df > 2.0)) throw std::domain_error("noise: student_t variance requires df > 2");
  return scale * scale * df / (df - 2.0);
}

double NoiseSpec::sample(std::mt19937_64& rng) const {
  if (kind == Kind::gaussian) return shift + scale * std::normal_distribution<double>(0.0, 1.0)(rng);
  return shift + scale * std::student_t_distribution<double>(df)(rng);
}

NoiseSpec NoiseSpec::centered_at_quantile(double alpha) const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0,1)");
  NoiseSpec base = *this;
  base.shift = 0.0;
  const auto f = [&](double x) { return base.cdf(x) - alpha; };
  double lo = -scale;
  double hi = scale;
  while (f(lo) > 0.0) lo *= 2.0;
  while (f(hi) < 0.0) hi *= 2.0;
  std::uintmax_t max_iter = 200;
  const auto bracket =
      boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(52), max_iter);
  NoiseSpec out = *this;
  out.shift = -0.5 * (bracket.first + bracket.second);
  return out;
}

}  // namespace slope

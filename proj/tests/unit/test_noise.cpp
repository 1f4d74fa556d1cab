#include <cmath>
#include <random>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "doctest.h"
#include "slope/noise.hpp"

using namespace slope;

TEST_CASE("gaussian noise") {
  const NoiseSpec g = NoiseSpec::gaussian(2.0);
  const boost::math::normal ref(0.0, 2.0);
  for (double x : {-3.0, -0.2, 0.0, 1.5}) {
    CHECK(g.cdf(x) == doctest::Approx(boost::math::cdf(ref, x)).epsilon(1e-12));
    CHECK(g.pdf(x) == doctest::Approx(boost::math::pdf(ref, x)).epsilon(1e-12));
  }
  CHECK(g.variance() == doctest::Approx(4.0));
  CHECK_THROWS_AS(NoiseSpec::gaussian(0.0), std::invalid_argument);
}

TEST_CASE("student t noise") {
  const NoiseSpec t = NoiseSpec::student_t(5.0, 0.8);
  const boost::math::students_t ref(5.0);
  for (double x : {-3.0, -0.2, 0.0, 1.5}) {
    CHECK(t.cdf(x) == doctest::Approx(boost::math::cdf(ref, x / 0.8)).epsilon(1e-12));
    CHECK(t.pdf(x) == doctest::Approx(boost::math::pdf(ref, x / 0.8) / 0.8).epsilon(1e-12));
  }
  CHECK(t.variance() == doctest::Approx(0.64 * 5.0 / 3.0));
  CHECK_THROWS_AS(NoiseSpec::student_t(1.5, 1.0).variance(), std::domain_error);
  CHECK_THROWS_AS(NoiseSpec::student_t(0.0, 1.0), std::invalid_argument);
}

TEST_CASE("quantile centering") {
  const NoiseSpec base = NoiseSpec::student_t(3.0, 1.2);
  const NoiseSpec c = base.centered_at_quantile(0.3);
  CHECK(c.cdf(0.0) == doctest::Approx(0.3).epsilon(1e-10));
  const double shift = -1.2 * boost::math::quantile(boost::math::students_t(3.0), 0.3);
  CHECK(c.shift == doctest::Approx(shift).epsilon(1e-9));

  std::mt19937_64 rng(113);
  const int draws = 100000;
  int below = 0;
  for (int i = 0; i < draws; ++i) below += c.sample(rng) <= 0.0;
  const double se = std::sqrt(0.3 * 0.7 / draws);
  CHECK(std::abs(static_cast<double>(below) / draws - 0.3) < 4 * se);
  CHECK_THROWS_AS(base.centered_at_quantile(1.0), std::invalid_argument);
}

TEST_CASE("gaussian sampling moments") {
  const NoiseSpec g = NoiseSpec::gaussian(1.5);
  std::mt19937_64 rng(127);
  double sum = 0.0, sq = 0.0;
  const int draws = 200000;
  for (int i = 0; i < draws; ++i) {
    const double e = g.sample(rng);
    sum += e;
    sq += e * e;
  }
  CHECK(std::abs(sum / draws) < 4 * 1.5 / std::sqrt(draws));
  CHECK(sq / draws == doctest::Approx(2.25).epsilon(0.02));
}

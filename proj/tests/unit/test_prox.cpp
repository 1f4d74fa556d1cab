#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "slope/geometry.hpp"
#include "slope/prox.hpp"

using namespace slope;
using namespace slope::testing;

namespace {

/// Best nonincreasing block-mean vector over every split into contiguous blocks.
Vector isotonic_by_partitions(const Vector& z) {
  const auto p = static_cast<std::size_t>(z.size());
  Vector best;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t cuts = 0; cuts < (std::size_t{1} << (p - 1)); ++cuts) {
    Vector x(z.size());
    std::size_t start = 0;
    for (std::size_t i = 0; i < p; ++i) {
      if (i + 1 == p || ((cuts >> i) & 1U)) {
        const auto len = static_cast<Eigen::Index>(i + 1 - start);
        x.segment(static_cast<Eigen::Index>(start), len)
            .setConstant(z.segment(static_cast<Eigen::Index>(start), len).mean());
        start = i + 1;
      }
    }
    bool monotone = true;
    for (Eigen::Index i = 1; i < x.size(); ++i) monotone = monotone && x[i] <= x[i - 1] + 1e-12;
    if (monotone && (x - z).norm() < best_dist) {
      best_dist = (x - z).norm();
      best = x;
    }
  }
  return best;
}

bool directional_kkt(const LambdaVector& l, const Vector& beta0, const Vector& y, const Vector& u) {
  return subdiff_membership(SubdifferentialSpec(l, limiting_pattern(beta0, u)), y - u);
}

}  // namespace

TEST_CASE("isotonic projection") {
  CHECK(isotonic_projection(Vector{{3, 1}}) == Vector{{3, 1}});
  CHECK(isotonic_projection(Vector{{1, 3}}) == Vector{{2, 2}});
  // Pooling only the violating pair already gives a monotone vector.
  const Vector r = isotonic_projection(Vector{{1, 4, 2}});
  CHECK(r == Vector{{2.5, 2.5, 2}});
  CHECK(r == isotonic_by_partitions(Vector{{1, 4, 2}}));
  CHECK(isotonic_projection(Vector()).size() == 0);
}

TEST_CASE("isotonic projection matches the best block partition") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t p = 1 + trial % 8;
    const Vector z = random_vector(rng, p, -3, 3);
    const Vector x = isotonic_projection(z);
    CHECK((x - isotonic_by_partitions(z)).norm() < 1e-12);
    for (Eigen::Index i = 1; i < x.size(); ++i) CHECK(x[i] <= x[i - 1]);
  }
}

TEST_CASE("slope prox examples") {
  CHECK(prox_slope({0, 0, 0}, Vector{{1, -2, 3}}) == Vector{{1, -2, 3}});
  CHECK(prox_slope({1, 1}, Vector{{3, 1}}) == Vector{{2, 0}});
  CHECK(prox_slope({3, 1}, Vector{{2, 2}}) == Vector{{0, 0}});
  CHECK((prox_slope({2, 1}, Vector{{4, 3}}) - Vector{{2, 2}}).norm() < 1e-15);
  CHECK_THROWS_AS(prox_slope({2, 1}, Vector::Zero(3)), DimensionError);
}

TEST_CASE("slope prox agrees with a grid search at p = 2") {
  const auto check = [](const LambdaVector& l, const Vector& y) {
    const auto f = [&](double a, double b) {
      const Vector u{{a, b}};
      return 0.5 * (u - y).squaredNorm() + slope_norm(l, u);
    };
    const Vector grid = grid_argmin2(f, -3, 3);
    const Vector got = prox_slope(l, y);
    CHECK((grid - got).norm() < 1e-6);
    CHECK(subdiff_membership(SubdifferentialSpec(l, pattern(got)), y - got));
  };
  check({3, 1}, Vector{{2, 2}});
  check({2, 1}, Vector{{2.5, 2.5}});
  check({1.5, 0.5}, Vector{{-2, 1.2}});
}

TEST_CASE("directional prox examples") {
  CHECK((prox_directional({2, 1}, Vector{{5, 5}}, Vector{{4, 3}}) - Vector{{2, 2}}).norm() < 1e-15);
  CHECK((prox_directional({2, 1}, Vector{{5, -5}}, Vector{{4, 3}}) - Vector{{2, 4}}).norm() < 1e-15);
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t p = 1 + trial % 6;
    const LambdaVector l = random_lambda(rng, p);
    const Vector y = random_vector(rng, p, -4, 4);
    CHECK(prox_directional(l, Vector::Zero(static_cast<Eigen::Index>(p)), y) == prox_slope(l, y));
  }
}

TEST_CASE("directional prox agrees with a grid search at p = 2") {
  for (const Vector& beta0 : {Vector{{5, 5}}, Vector{{5, -5}}, Vector{{1, 0}}, Vector{{-2, 3}}, Vector{{0, 0}}}) {
    const LambdaVector l{2, 1};
    const Vector y{{4, 3}};
    const auto f = [&](double a, double b) {
      const Vector u{{a, b}};
      return 0.5 * (u - y).squaredNorm() + directional_derivative(l, beta0, u);
    };
    CHECK((grid_argmin2(f, -5, 5) - prox_directional(l, beta0, y)).norm() < 1e-6);
  }
}

TEST_CASE("prox operators match the Moreau oracle and certify KKT") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t p = 1 + trial % 8;
    const LambdaVector l = random_lambda(rng, p);
    const Vector y = trial % 3 ? random_vector(rng, p, -5, 5) : random_tied_vector(rng, p);
    const Vector u = prox_slope(l, y);
    CHECK((u - moreau_prox(l, std::nullopt, y)).norm() < 1e-5);
    CHECK(subdiff_membership(SubdifferentialSpec(l, pattern(u)), y - u));

    const Vector beta0 = random_tied_vector(rng, p);
    const Vector v = prox_directional(l, beta0, y);
    CHECK((v - moreau_prox(l, beta0, y)).norm() < 1e-5);
    CHECK(directional_kkt(l, beta0, y, v));
  }
}

TEST_CASE("prox operators are nonexpansive") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t p = 1 + trial % 8;
    const LambdaVector l = random_lambda(rng, p);
    const Vector beta0 = random_tied_vector(rng, p);
    const Vector a = random_vector(rng, p, -5, 5);
    const Vector b = random_vector(rng, p, -5, 5);
    CHECK((prox_slope(l, a) - prox_slope(l, b)).norm() <= (a - b).norm() + 1e-12);
    CHECK((prox_directional(l, beta0, a) - prox_directional(l, beta0, b)).norm() <= (a - b).norm() + 1e-12);
  }
}

TEST_CASE("slope prox preserves the order of magnitudes and produces exact ties") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t p = 2 + trial % 7;
    const LambdaVector l = random_lambda(rng, p);
    const Vector y = random_vector(rng, p, -5, 5);
    const Vector u = prox_slope(l, y);
    for (Eigen::Index i = 0; i < u.size(); ++i)
      for (Eigen::Index j = 0; j < u.size(); ++j) {
        if (std::abs(y[i]) > std::abs(y[j])) CHECK(std::abs(u[i]) >= std::abs(u[j]));
        if (same_magnitude(u[i], u[j])) CHECK(std::abs(u[i]) == std::abs(u[j]));
      }
  }
}

TEST_CASE("directional prox is equivariant under coordinate permutations") {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t p = 2 + trial % 6;
    const LambdaVector l = random_lambda(rng, p);
    const Vector beta0 = random_tied_vector(rng, p);
    const Vector y = random_vector(rng, p, -5, 5);
    std::vector<int> perm(p);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const Eigen::PermutationMatrix<Eigen::Dynamic> pm(Eigen::Map<Eigen::VectorXi>(perm.data(), static_cast<Eigen::Index>(p)));
    const Vector lhs = prox_directional(l, pm * beta0, pm * y);
    const Vector rhs = pm * prox_directional(l, beta0, y);
    CHECK((lhs - rhs).norm() < 1e-12);
  }
}

TEST_CASE("prox of t J near beta0 approaches the directional prox") {
  std::mt19937_64 rng(41);
  const double t = 1e-6;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t p = 1 + trial % 6;
    const LambdaVector l = random_lambda(rng, p);
    const Vector beta0 = random_tied_vector(rng, p);
    const Vector y = random_vector(rng, p, -3, 3);
    const Vector scaled = (prox_slope(l.scaled(t), beta0 + t * y) - beta0) / t;
    CHECK((scaled - prox_directional(l, beta0, y)).norm() < 1e-4);
  }
}

TEST_CASE("prox request dispatch") {
  ProxRequest r{LambdaVector{2, 1}, std::nullopt, Vector{{4, 3}}, 0.5};
  CHECK((prox(r) - prox_slope({1, 0.5}, Vector{{4, 3}})).norm() < 1e-15);
  r.anchor = Vector{{5, -5}};
  CHECK((prox(r) - prox_directional({1, 0.5}, Vector{{5, -5}}, Vector{{4, 3}})).norm() < 1e-15);
  r.step = 0.0;
  CHECK_THROWS_AS(prox(r), std::invalid_argument);
}

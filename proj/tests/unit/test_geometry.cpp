#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "slope/geometry.hpp"

using namespace slope;
using namespace slope::testing;

namespace {

std::vector<Vector> vertices_of(const LambdaVector& l, const SlopePattern& p) {
  return sorted_points(subdiff_vertices(SubdifferentialSpec(l, p)).vertices());
}

double point_segment_distance(const Vector& x, const Vector& a, const Vector& b) {
  const Vector d = b - a;
  const double t = std::clamp((x - a).dot(d) / d.squaredNorm(), 0.0, 1.0);
  return (x - a - t * d).norm();
}

/// Directed distance sup_{a in A} dist(a, B) for segments, sampled densely along A.
double directed_segment_distance(const Vector& a0, const Vector& a1, const Vector& b0, const Vector& b1) {
  constexpr int n = 20000;
  double best = 0.0;
  for (int i = 0; i <= n; ++i) {
    const Vector x = a0 + (static_cast<double>(i) / n) * (a1 - a0);
    best = std::max(best, point_segment_distance(x, b0, b1));
  }
  return best;
}

/// A random point of conv(vertices), pushed away from (or towards) its centroid.
Vector probe_point(std::mt19937_64& rng, const std::vector<Vector>& vertices) {
  std::uniform_int_distribution<std::size_t> pick(0, vertices.size() - 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector centroid = Vector::Zero(vertices.front().size());
  for (const auto& v : vertices) centroid += v / static_cast<double>(vertices.size());
  Vector x = Vector::Zero(centroid.size());
  double total = 0.0;
  const int k = 1 + static_cast<int>(pick(rng) % 3);
  for (int i = 0; i < k; ++i) {
    const double w = u(rng);
    x += w * vertices[pick(rng)];
    total += w;
  }
  x /= total;
  const double stretch = 2.0 * u(rng);
  Vector v = centroid + stretch * (x - centroid);
  if (u(rng) < 0.2) v += random_vector(rng, static_cast<std::size_t>(v.size()), -0.3, 0.3);
  return v;
}

}  // namespace

TEST_CASE("hull LP oracle sanity") {
  const std::vector<Vector> square{Vector{{0, 0}}, Vector{{1, 0}}, Vector{{0, 1}}, Vector{{1, 1}}};
  CHECK(hull_contains(square, Vector{{0.5, 0.5}}));
  CHECK(hull_contains(square, Vector{{1, 0.3}}));
  CHECK_FALSE(hull_contains(square, Vector{{1.01, 0.3}}));
  CHECK_FALSE(hull_contains(square, Vector{{-0.5, 2}}));
}

TEST_CASE("subdifferential vertices") {
  CHECK(vertices_of({2, 1}, {1, 1}) == sorted_points({Vector{{2, 1}}, Vector{{1, 2}}}));
  CHECK(vertices_of({2, 1}, {1, -1}) == sorted_points({Vector{{2, -1}}, Vector{{1, -2}}}));
  CHECK(vertices_of({1}, {0}) == sorted_points({Vector{{1}}, Vector{{-1}}}));
  CHECK(vertices_of({2, 1}, {0, 0}).size() == 8);
  CHECK(vertices_of({2, 1}, {2, 1}) == sorted_points({Vector{{2, 1}}}));
}

TEST_CASE("vertices equal the face of the dual ball exposed by the pattern") {
  std::mt19937_64 rng(43);
  for (std::size_t p = 1; p <= 4; ++p)
    for (const auto& patt : enumerate_patterns(p)) {
      const LambdaVector l = random_lambda(rng, p);
      CHECK(vertices_of(l, patt) == exposed_face_vertices(l, patt.as_vector()));
    }
}

TEST_CASE("subdifferential is constant on a pattern class") {
  std::mt19937_64 rng(47);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t p = 1 + trial % 4;
    const LambdaVector l = random_lambda(rng, p);
    const Vector a = random_tied_vector(rng, p);
    // Same pattern, different magnitudes: an increasing map of |a|.
    Vector b = a;
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = std::copysign(std::pow(std::abs(a[i]), 1.7) + 2.0 * std::abs(a[i]), a[i]);
    REQUIRE(pattern(a) == pattern(b));
    CHECK(exposed_face_vertices(l, a) == exposed_face_vertices(l, b));
    CHECK(vertices_of(l, pattern(a)) == exposed_face_vertices(l, b));
  }
}

TEST_CASE("vertex cap") {
  const SubdifferentialSpec spec(LambdaVector::constant(9, 1.0), SlopePattern(std::vector<int>(9, 0)));
  CHECK(spec.vertex_count() == doctest::Approx(362880.0 * 512.0));
  CHECK_THROWS_AS(subdiff_vertices(spec), VertexCapExceeded);
  CHECK_NOTHROW(subdiff_vertices(SubdifferentialSpec(LambdaVector::constant(3, 1.0), SlopePattern{1, 1, 1}), 6));
  CHECK_THROWS_AS(subdiff_vertices(SubdifferentialSpec(LambdaVector::constant(3, 1.0), SlopePattern{1, 1, 1}), 5),
                  VertexCapExceeded);
}

TEST_CASE("subdifferential membership") {
  const SubdifferentialSpec tied({2, 1}, {1, 1});
  CHECK(subdiff_membership(tied, Vector{{1.5, 1.5}}));
  CHECK_FALSE(subdiff_membership(tied, Vector{{2.5, 0.5}}));
  const SubdifferentialSpec zero({2, 1}, {0, 0});
  CHECK_FALSE(subdiff_membership(zero, Vector{{1.6, 1.6}}));
  CHECK(subdiff_membership(zero, Vector{{2, 1}}));
  CHECK_THROWS_AS(subdiff_membership(zero, Vector::Zero(3)), DimensionError);
  for (const Vector& v : {Vector{{1.5, 1.5}}, Vector{{2.5, 0.5}}})
    CHECK(subdiff_membership(tied, v) == hull_contains(vertices_of({2, 1}, {1, 1}), v));
  for (const Vector& v : {Vector{{1.6, 1.6}}, Vector{{2, 1}}})
    CHECK(subdiff_membership(zero, v) == hull_contains(vertices_of({2, 1}, {0, 0}), v));
}

TEST_CASE("majorization membership agrees with the hull LP") {
  std::mt19937_64 rng(53);
  int members = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const std::size_t p = 1 + trial % 5;
    const LambdaVector l = random_lambda(rng, p);
    const Vector x = random_tied_vector(rng, p);
    const SlopePattern patt = pattern(x);
    const auto vertices = exposed_face_vertices(l, x);
    const Vector v = probe_point(rng, vertices);
    const bool fast = subdiff_membership(SubdifferentialSpec(l, patt), v);
    CHECK(fast == hull_contains(vertices, v));
    members += fast;
  }
  CHECK(members > 100);
  CHECK(members < 300);
}

TEST_CASE("dual ball membership") {
  CHECK(dual_ball_membership({2, 1}, Vector::Zero(2)));
  CHECK(dual_ball_membership({2, 1}, Vector{{2, 1}}));
  CHECK_FALSE(dual_ball_membership({2, 1}, Vector{{2.01, 0}}));
  CHECK(dual_ball_membership({1, 1}, Vector{{1, 1}}));
  CHECK(dual_ball_membership({1, 1}, Vector{{-1, 0.4}}));
  CHECK_FALSE(dual_ball_membership({1, 1}, Vector{{1.5, 0}}));
  std::mt19937_64 rng(59);
  for (int trial = 0; trial < 1000; ++trial) {
    const Vector v = random_vector(rng, 2, -1.5, 1.5);
    CHECK(dual_ball_membership({1, 1}, v) == (v.cwiseAbs().maxCoeff() <= 1.0));
  }
}

TEST_CASE("dual ball membership is monotone under shrinking") {
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t p = 1 + trial % 6;
    const LambdaVector l = random_lambda(rng, p);
    Vector v = random_vector(rng, p, -3, 3);
    if (!dual_ball_membership(l, v)) continue;
    v[static_cast<Eigen::Index>(trial % p)] *= u(rng);
    CHECK(dual_ball_membership(l, v));
  }
}

TEST_CASE("attainability") {
  CHECK_FALSE(attainable({2, 1}, Vector{{1, 2}}, {1, 1}));
  CHECK_FALSE(attainable({1, 1}, Vector{{0, 0}}, {1, 1}));
  CHECK(attainable({2, 1}, Vector{{0, 0}}, {2, 1}));
  CHECK(attainable({2, 1}, Vector{{0, 0}}, {1, 1}));
  CHECK(attainable({1, 1}, Vector{{0, 0}}, {1, 0}));
  CHECK_FALSE(attainable({1, 0}, Vector{{0, 0}}, {1, 0}));
  CHECK_FALSE(attainable({2, 1}, Vector{{1, 1}}, {1, -1}));
  CHECK(attainable({2, 1}, Vector{{1, 1}}, {1, 2}));
  CHECK_FALSE(attainable({1, 1}, Vector{{1, 1}}, {1, 1}));
  CHECK_THROWS_AS(attainable({2, 1}, Vector::Zero(3), {1, 1}), DimensionError);
}

TEST_CASE("affine rank obeys the dimension bound, with equality exactly when attained") {
  const std::vector<LambdaVector> lambdas{{3, 2, 1}, {2, 2, 1}, {2, 1, 1}, {1, 1, 1}, {2, 1, 0}, {1, 0, 0}, {0, 0, 0}};
  for (const auto& l : lambdas)
    for (const auto& patt : enumerate_patterns(3)) {
      const SubdifferentialSpec spec(l, patt);
      const std::size_t rank = subdiff_vertices(spec).affine_rank();
      CHECK(rank <= dimension_bound(patt));
      CHECK((rank == dimension_bound(patt)) == dimension_bound_attained(spec));
    }
}

TEST_CASE("affine rank") {
  CHECK(VertexPolytope({Vector{{1, 2}}}).affine_rank() == 0);
  CHECK(VertexPolytope({Vector{{1, 2}}, Vector{{2, 1}}, Vector{{1.5, 1.5}}}).affine_rank() == 1);
  CHECK(VertexPolytope({Vector{{0, 0}}, Vector{{1, 0}}, Vector{{0, 1}}}).affine_rank() == 2);
}

TEST_CASE("hausdorff distance") {
  CHECK(hausdorff_distance(VertexPolytope({Vector{{0, 0}}}), VertexPolytope({Vector{{3, 4}}})) == doctest::Approx(5.0));
  const std::vector<Vector> square{Vector{{0, 0}}, Vector{{1, 0}}, Vector{{0, 1}}, Vector{{1, 1}}};
  std::vector<Vector> shifted = square;
  for (auto& v : shifted) v[0] += 1.0;
  CHECK(hausdorff_distance(VertexPolytope(square), VertexPolytope(shifted)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(hausdorff_distance(VertexPolytope({Vector::Zero(2)}), VertexPolytope({Vector::Zero(3)})),
                  DimensionError);
}

TEST_CASE("hausdorff distance between segments matches a dense grid") {
  const Vector a0{{2, 1}}, a1{{1, 2}}, b0{{1, 0.5}}, b1{{0.5, 1}};
  const double grid = std::max(directed_segment_distance(a0, a1, b0, b1), directed_segment_distance(b0, b1, a0, a1));
  const double got = hausdorff_distance(VertexPolytope({a0, a1}), VertexPolytope({b0, b1}));
  CHECK(std::abs(got - grid) < 1e-6);

  std::mt19937_64 rng(67);
  for (int trial = 0; trial < 50; ++trial) {
    const Vector c0 = random_vector(rng, 2, -2, 2), c1 = random_vector(rng, 2, -2, 2);
    const Vector d0 = random_vector(rng, 2, -2, 2), d1 = random_vector(rng, 2, -2, 2);
    const double expect = std::max(directed_segment_distance(c0, c1, d0, d1), directed_segment_distance(d0, d1, c0, c1));
    CHECK(std::abs(hausdorff_distance(VertexPolytope({c0, c1}), VertexPolytope({d0, d1})) - expect) < 1e-6);
  }
}

TEST_CASE("hausdorff distance is a pseudo-metric on random polytopes") {
  std::mt19937_64 rng(71);
  std::uniform_int_distribution<int> count(1, 6);
  const auto polytope = [&](std::size_t p) {
    std::vector<Vector> v;
    const int k = count(rng);
    for (int i = 0; i < k; ++i) v.push_back(random_vector(rng, p, -2, 2));
    return VertexPolytope(v);
  };
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t p = 1 + trial % 4;
    const VertexPolytope a = polytope(p), b = polytope(p), c = polytope(p);
    const double ab = hausdorff_distance(a, b);
    CHECK(ab == doctest::Approx(hausdorff_distance(b, a)).epsilon(1e-9));
    CHECK(ab <= hausdorff_distance(a, c) + hausdorff_distance(c, b) + 1e-9);
    CHECK(hausdorff_distance(a, a) < 1e-9);
  }
}

TEST_CASE("nearest point with a linear oracle") {
  // Unit l1 ball: the oracle returns the signed coordinate vector of the largest |d_i|.
  const auto l1_ball = [](const Vector& d) {
    Eigen::Index i;
    d.cwiseAbs().maxCoeff(&i);
    Vector s = Vector::Zero(d.size());
    s[i] = d[i] > 0 ? -1.0 : 1.0;
    return s;
  };
  const NearestPoint np = nearest_point(l1_ball, Vector{{2, 2}});
  CHECK((np.point - Vector{{0.5, 0.5}}).norm() < 1e-9);
  CHECK(np.distance == doctest::Approx(1.5 * std::sqrt(2.0)));
  CHECK(nearest_point(l1_ball, Vector{{0.1, -0.2}}).distance < 1e-12);
}

TEST_CASE("hausdorff convergence of perturbed subdifferentials") {
  std::mt19937_64 rng(73);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t p = 1 + trial % 4;
    const LambdaVector l = random_lambda(rng, p);
    const SlopePattern patt = pattern(random_tied_vector(rng, p));
    const VertexPolytope limit = subdiff_vertices(SubdifferentialSpec(l, patt));
    double previous = std::numeric_limits<double>::infinity();
    for (int n : {1, 10, 100, 1000}) {
      const Vector shift = Vector::Constant(static_cast<Eigen::Index>(p), 1.0 / n);
      const double d = hausdorff_distance(subdiff_vertices(SubdifferentialSpec(LambdaVector(l.values() + shift), patt)), limit);
      CHECK(d <= shift.norm() + 1e-9);
      CHECK(d < previous);
      previous = d;
    }
  }
}

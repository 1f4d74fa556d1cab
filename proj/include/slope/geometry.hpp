#pragma once

#include <functional>
#include <stdexcept>

#include "slope/core.hpp"

namespace slope {

inline constexpr std::size_t kDefaultVertexCap = 100000;
/// Absolute slack on partial sums in majorization tests.
inline constexpr double kMajorizationTolerance = 1e-9;

class VertexCapExceeded : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// Convex hull of an explicit, possibly redundant, vertex list.
class VertexPolytope {
 public:
  explicit VertexPolytope(std::vector<Vector> vertices);

  const std::vector<Vector>& vertices() const noexcept { return vertices_; }
  std::size_t dimension() const noexcept { return static_cast<std::size_t>(vertices_.front().size()); }
  /// Dimension of the affine hull (SVD rank of vertex differences).
  std::size_t affine_rank(double tolerance = 1e-9) const;

 private:
  std::vector<Vector> vertices_;
};

/// The subdifferential of J_lambda on the cone of a pattern.
struct SubdifferentialSpec {
  LambdaVector lambda;
  SlopePattern pattern;
  ClusterPartition partition;
  BlockAssignment blocks;

  SubdifferentialSpec(LambdaVector lambda, SlopePattern pattern);
  std::size_t dimension() const noexcept { return lambda.size(); }
  /// Number of (not necessarily distinct) vertices before deduplication; saturates.
  double vertex_count() const;
};

VertexPolytope subdiff_vertices(const SubdifferentialSpec& spec, std::size_t cap = kDefaultVertexCap);

bool subdiff_membership(const SubdifferentialSpec& spec, const Vector& v);

/// v in the unit ball of the dual norm, i.e. in the subdifferential at 0.
bool dual_ball_membership(const LambdaVector& lambda, const Vector& v);

/// Whether the limiting minimizer takes pattern `p` with positive probability.
bool attainable(const LambdaVector& lambda, const Vector& beta0, const SlopePattern& p);

/// Upper bound p - m on the dimension of the subdifferential, m = number of
/// nonzero clusters. Attained iff lambda is nonconstant on every nonzero
/// cluster of size >= 2 and not identically zero on the null cluster.
std::size_t dimension_bound(const SlopePattern& p);
bool dimension_bound_attained(const SubdifferentialSpec& spec);

/// argmin over the set of <direction, s>.
using LinearOracle = std::function<Vector(const Vector& direction)>;

struct NearestPointOptions {
  /// Stop when ||x||^2 - min_s <x, s> (in target-centred coordinates) falls below this.
  double gap_tolerance = 1e-10;
  int max_iterations = 10000;
};

struct NearestPoint {
  Vector point;
  double distance = 0.0;
  int iterations = 0;
};

/// Nearest point to `target` in the convex hull described by `oracle`
/// (Wolfe's min-norm-point method).
NearestPoint nearest_point(const LinearOracle& oracle, const Vector& target, const NearestPointOptions& options = {});

NearestPoint nearest_point(const VertexPolytope& hull, const Vector& target, const NearestPointOptions& options = {});

double hausdorff_distance(const VertexPolytope& a, const VertexPolytope& b, const NearestPointOptions& options = {});

}  // namespace slope

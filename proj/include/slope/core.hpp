#pragma once

#include <compare>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace slope {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Relative tolerance under which two magnitudes are treated as one cluster.
inline constexpr double kClusterTolerance = 1e-9;

/// Thrown when two inputs that must share a length do not.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Throws DimensionError unless `a == b`.
void require_same_size(std::size_t a, std::size_t b, std::string_view what);

/// True when |a - b| <= kClusterTolerance * max(1, |a|, |b|).
bool same_magnitude(double a, double b);

/// Nonincreasing, nonnegative penalty sequence of a sorted-l1 norm.
class LambdaVector {
 public:
  explicit LambdaVector(Vector values);
  LambdaVector(std::initializer_list<double> values);

  static LambdaVector constant(std::size_t p, double value);

  const Vector& values() const noexcept { return values_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(values_.size()); }
  double operator[](std::size_t i) const { return values_[static_cast<Eigen::Index>(i)]; }

  /// The penalty sequence of t * J, t >= 0.
  LambdaVector scaled(double t) const;

  /// Entries [begin, end) as a plain vector.
  Vector block(std::size_t begin, std::size_t end) const;

 private:
  Vector values_;
};

/// Integer rank-sign vector: entry i is sign(u_i) times the rank of |u_i|
/// among the distinct nonzero magnitudes of u (0 marks the null cluster).
class SlopePattern {
 public:
  SlopePattern() = default;
  explicit SlopePattern(std::vector<int> entries);
  SlopePattern(std::initializer_list<int> entries);

  const std::vector<int>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  int operator[](std::size_t i) const { return entries_[i]; }

  /// Number of nonzero clusters.
  int max_rank() const noexcept { return max_rank_; }

  /// Comma separated entries, e.g. "0,2,-2,1,2,1".
  std::string to_string() const;
  static SlopePattern parse(std::string_view text);

  Vector as_vector() const;

  friend bool operator==(const SlopePattern& a, const SlopePattern& b) {
    return a.entries_ == b.entries_;
  }
  friend std::strong_ordering operator<=>(const SlopePattern& a, const SlopePattern& b) {
    return a.entries_ <=> b.entries_;
  }

 private:
  std::vector<int> entries_;
  int max_rank_ = 0;
};

/// Ordered decomposition of a pattern into the null cluster and the signed
/// nonzero clusters I_1 (lowest magnitude) .. I_m (highest).
struct ClusterPartition {
  std::vector<std::size_t> zero_cluster;
  std::vector<std::vector<std::size_t>> nonzero_clusters;
  /// -1/+1 on nonzero clusters, 0 on the null cluster.
  std::vector<int> signs;

  std::size_t dimension() const noexcept { return signs.size(); }
  std::size_t cluster_count() const noexcept { return nonzero_clusters.size(); }
  SlopePattern reconstruct() const;
};

/// Half-open range [begin, end) of positions in a lambda vector.
struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const noexcept { return end - begin; }
};

/// Which lambda entries each cluster receives: the highest-rank cluster takes
/// the largest lambdas, the null cluster the smallest |I_0|.
struct BlockAssignment {
  IndexRange zero;
  std::vector<IndexRange> nonzero;  // nonzero[j] belongs to cluster rank j + 1
};

/// Symmetric positive definite p x p matrix.
class CovarianceMatrix {
 public:
  explicit CovarianceMatrix(Matrix entries);
  static CovarianceMatrix identity(std::size_t p);

  const Matrix& matrix() const noexcept { return entries_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(entries_.rows()); }

  /// Lower Cholesky factor L with L L^T = C.
  const Matrix& cholesky_factor() const noexcept { return cholesky_; }
  /// Symmetric square root C^{1/2}.
  Matrix sqrt() const;

 private:
  Matrix entries_;
  Matrix cholesky_;
};

double slope_norm(const LambdaVector& lambda, const Vector& v);

SlopePattern pattern(const Vector& v);

ClusterPartition clusters(const SlopePattern& p);

BlockAssignment assign_lambda_blocks(const ClusterPartition& partition);

/// Diagonal of S_p: sign of the pattern entry, +1 on the null cluster.
Vector sign_diagonal(const SlopePattern& p);

/// Indices sorted by descending |p_i|, ties by ascending index. Position k of
/// the result is the index that receives lambda_k.
std::vector<std::size_t> sorting_order(const SlopePattern& p);

/// Pattern of beta0 + eps * u for all sufficiently small eps > 0.
SlopePattern limiting_pattern(const Vector& beta0, const Vector& u);

/// One-sided derivative of J_lambda at beta0 in direction u.
double directional_derivative(const LambdaVector& lambda, const Vector& beta0, const Vector& u);

double normal_cdf(double x);
/// Inverse of the standard normal CDF on (0, 1).
double normal_quantile(double p);

/// lambda_i = scale * Phi^{-1}(1 - i q / (2p)), i = 1..p.
LambdaVector bhq_lambdas(std::size_t p, double q, double scale);

/// Every valid pattern of length p (3^p-ish growth; intended for p <= 5).
std::vector<SlopePattern> enumerate_patterns(std::size_t p);

}  // namespace slope

#include "slope/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace slope {

VertexPolytope::VertexPolytope(std::vector<Vector> vertices) : vertices_(std::move(vertices)) {
  if (vertices_.empty()) throw std::invalid_argument("polytope: vertex list must be nonempty");
  for (const Vector& v : vertices_)
    require_same_size(static_cast<std::size_t>(v.size()), static_cast<std::size_t>(vertices_.front().size()),
                      "polytope vertex");
}

std::size_t VertexPolytope::affine_rank(double tolerance) const {
  if (vertices_.size() < 2) return 0;
  Matrix diffs(vertices_.front().size(), static_cast<Eigen::Index>(vertices_.size() - 1));
  for (std::size_t k = 1; k < vertices_.size(); ++k)
    diffs.col(static_cast<Eigen::Index>(k - 1)) = vertices_[k] - vertices_.front();
  Eigen::JacobiSVD<Matrix> svd(diffs);
  const Vector& sv = svd.singularValues();
  const double scale = std::max(1.0, sv.size() ? sv[0] : 0.0);
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) rank += sv[i] > tolerance * scale;
  return rank;
}

SubdifferentialSpec::SubdifferentialSpec(LambdaVector lambda_in, SlopePattern pattern_in)
    : lambda(std::move(lambda_in)), pattern(std::move(pattern_in)) {
  require_same_size(lambda.size(), pattern.size(), "subdifferential");
  partition = clusters(pattern);
  blocks = assign_lambda_blocks(partition);
}

double SubdifferentialSpec::vertex_count() const {
  double count = 1.0;
  for (const auto& cluster : partition.nonzero_clusters) count *= std::tgamma(static_cast<double>(cluster.size()) + 1);
  const double z = static_cast<double>(partition.zero_cluster.size());
  return count * std::tgamma(z + 1) * std::pow(2.0, z);
}

namespace {

// All distinct assignments of a cluster's lambda block to its indices.
std::vector<Vector> cluster_options(const Vector& block, const std::vector<int>& signs, bool signed_freely) {
  std::vector<double> values(block.data(), block.data() + block.size());
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size();
  std::vector<Vector> out;
  do {
    const std::size_t masks = signed_freely ? (std::size_t{1} << m) : 1;
    for (std::size_t mask = 0; mask < masks; ++mask) {
      Vector v(static_cast<Eigen::Index>(m));
      for (std::size_t k = 0; k < m; ++k) {
        const double s = signed_freely ? ((mask >> k) & 1 ? -1.0 : 1.0) : static_cast<double>(signs[k]);
        v[static_cast<Eigen::Index>(k)] = s * values[k];
      }
      out.push_back(std::move(v));
    }
  } while (std::next_permutation(values.begin(), values.end()));
  return out;
}

struct VectorLess {
  bool operator()(const Vector& a, const Vector& b) const {
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
  }
};

}  // namespace

VertexPolytope subdiff_vertices(const SubdifferentialSpec& spec, std::size_t cap) {
  const double count = spec.vertex_count();
  if (count > static_cast<double>(cap))
    throw VertexCapExceeded("subdiff_vertices: " + std::to_string(static_cast<long double>(count)) +
                            " vertices exceed the cap of " + std::to_string(cap));
  const ClusterPartition& part = spec.partition;
  std::vector<const std::vector<std::size_t>*> groups;
  std::vector<std::vector<Vector>> options;
  for (std::size_t j = 0; j < part.nonzero_clusters.size(); ++j) {
    const auto& cluster = part.nonzero_clusters[j];
    std::vector<int> signs;
    for (std::size_t i : cluster) signs.push_back(part.signs[i]);
    groups.push_back(&cluster);
    options.push_back(
        cluster_options(spec.lambda.block(spec.blocks.nonzero[j].begin, spec.blocks.nonzero[j].end), signs, false));
  }
  if (!part.zero_cluster.empty()) {
    groups.push_back(&part.zero_cluster);
    options.push_back(cluster_options(spec.lambda.block(spec.blocks.zero.begin, spec.blocks.zero.end), {}, true));
  }

  std::vector<Vector> partial{Vector::Zero(static_cast<Eigen::Index>(spec.dimension()))};
  for (std::size_t g = 0; g < groups.size(); ++g) {
    std::vector<Vector> next;
    next.reserve(partial.size() * options[g].size());
    for (const Vector& base : partial) {
      for (const Vector& local : options[g]) {
        Vector v = base;
        for (std::size_t k = 0; k < groups[g]->size(); ++k)
          v[static_cast<Eigen::Index>((*groups[g])[k])] = local[static_cast<Eigen::Index>(k)];
        next.push_back(std::move(v));
      }
    }
    partial = std::move(next);
  }
  std::set<Vector, VectorLess> unique(partial.begin(), partial.end());
  return VertexPolytope(std::vector<Vector>(unique.begin(), unique.end()));
}

namespace {

// Partial sums of `w` (sorted descending) against those of `l`.
bool majorized(std::vector<double> w, const Vector& l, bool equal_total) {
  std::sort(w.begin(), w.end(), std::greater<>());
  double sw = 0.0;
  double sl = 0.0;
  for (std::size_t r = 0; r < w.size(); ++r) {
    sw += w[r];
    sl += l[static_cast<Eigen::Index>(r)];
    if (sw > sl + kMajorizationTolerance) return false;
  }
  return !equal_total || std::abs(sw - sl) <= kMajorizationTolerance;
}

}  // namespace

bool subdiff_membership(const SubdifferentialSpec& spec, const Vector& v) {
  require_same_size(spec.dimension(), static_cast<std::size_t>(v.size()), "subdiff_membership");
  const ClusterPartition& part = spec.partition;
  for (std::size_t j = 0; j < part.nonzero_clusters.size(); ++j) {
    std::vector<double> w;
    for (std::size_t i : part.nonzero_clusters[j]) w.push_back(part.signs[i] * v[static_cast<Eigen::Index>(i)]);
    if (!majorized(std::move(w), spec.lambda.block(spec.blocks.nonzero[j].begin, spec.blocks.nonzero[j].end), true))
      return false;
  }
  std::vector<double> w;
  for (std::size_t i : part.zero_cluster) w.push_back(std::abs(v[static_cast<Eigen::Index>(i)]));
  return majorized(std::move(w), spec.lambda.block(spec.blocks.zero.begin, spec.blocks.zero.end), false);
}

bool dual_ball_membership(const LambdaVector& lambda, const Vector& v) {
  require_same_size(lambda.size(), static_cast<std::size_t>(v.size()), "dual_ball_membership");
  std::vector<double> w(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) w[static_cast<std::size_t>(i)] = std::abs(v[i]);
  return majorized(std::move(w), lambda.values(), false);
}

namespace {

bool lambda_conditions_hold(const SubdifferentialSpec& spec) {
  const ClusterPartition& part = spec.partition;
  for (std::size_t j = 0; j < part.nonzero_clusters.size(); ++j) {
    if (part.nonzero_clusters[j].size() < 2) continue;
    const Vector block = spec.lambda.block(spec.blocks.nonzero[j].begin, spec.blocks.nonzero[j].end);
    if (block.maxCoeff() == block.minCoeff()) return false;
  }
  if (part.zero_cluster.empty()) return true;
  return spec.lambda.block(spec.blocks.zero.begin, spec.blocks.zero.end).maxCoeff() > 0.0;
}

// Clusters as sets, with the null cluster tagged apart from the others.
std::set<std::pair<bool, std::vector<std::size_t>>> cluster_sets(const ClusterPartition& part) {
  std::set<std::pair<bool, std::vector<std::size_t>>> out;
  if (!part.zero_cluster.empty()) out.emplace(true, part.zero_cluster);
  for (const auto& c : part.nonzero_clusters) out.emplace(false, c);
  return out;
}

}  // namespace

bool attainable(const LambdaVector& lambda, const Vector& beta0, const SlopePattern& p) {
  require_same_size(lambda.size(), static_cast<std::size_t>(beta0.size()), "attainable");
  require_same_size(lambda.size(), p.size(), "attainable");
  const SlopePattern limit = limiting_pattern(beta0, p.as_vector());
  // The clusters of p must survive refinement by beta0: this holds exactly
  // when p's clusters nest in beta0's (null cluster included) with constant
  // relative sign.
  if (cluster_sets(clusters(p)) != cluster_sets(clusters(limit))) return false;
  return lambda_conditions_hold(SubdifferentialSpec(lambda, limit));
}

std::size_t dimension_bound(const SlopePattern& p) {
  return p.size() - static_cast<std::size_t>(p.max_rank());
}

bool dimension_bound_attained(const SubdifferentialSpec& spec) { return lambda_conditions_hold(spec); }

NearestPoint nearest_point(const LinearOracle& oracle, const Vector& target, const NearestPointOptions& options) {
  const auto lmo = [&](const Vector& d) -> Vector { return oracle(d) - target; };
  std::vector<Vector> corral{lmo(Vector::Zero(target.size()))};
  std::vector<double> weights{1.0};
  Vector x = corral.front();
  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    const Vector s = lmo(x);
    const double gap = x.squaredNorm() - x.dot(s);
    if (gap <= options.gap_tolerance) break;
    const bool repeated = std::any_of(corral.begin(), corral.end(), [&](const Vector& c) {
      return (c - s).norm() <= 1e-14 * std::max(1.0, s.norm());
    });
    if (repeated) break;
    corral.push_back(s);
    weights.push_back(0.0);

    while (true) {
      // Affine minimizer: y = c0 + D beta, least squares against 0.
      const std::size_t k = corral.size();
      Vector alpha(static_cast<Eigen::Index>(k));
      if (k == 1) {
        alpha[0] = 1.0;
      } else {
        Matrix d(x.size(), static_cast<Eigen::Index>(k - 1));
        for (std::size_t i = 1; i < k; ++i) d.col(static_cast<Eigen::Index>(i - 1)) = corral[i] - corral[0];
        const Vector beta = d.completeOrthogonalDecomposition().solve(-corral[0]);
        alpha[0] = 1.0 - beta.sum();
        alpha.tail(static_cast<Eigen::Index>(k - 1)) = beta;
      }
      if (alpha.minCoeff() > 0.0) {
        for (std::size_t i = 0; i < k; ++i) weights[i] = alpha[static_cast<Eigen::Index>(i)];
        break;
      }
      double theta = 1.0;
      for (std::size_t i = 0; i < k; ++i) {
        const double a = alpha[static_cast<Eigen::Index>(i)];
        if (a <= 0.0) theta = std::min(theta, weights[i] / (weights[i] - a));
      }
      std::vector<Vector> kept;
      std::vector<double> kept_weights;
      for (std::size_t i = 0; i < k; ++i) {
        const double w = theta * alpha[static_cast<Eigen::Index>(i)] + (1.0 - theta) * weights[i];
        if (w > 1e-15) {
          kept.push_back(corral[i]);
          kept_weights.push_back(w);
        }
      }
      if (kept.empty()) {  // numerical breakdown; keep the newest point
        kept.push_back(corral.back());
        kept_weights.push_back(1.0);
      }
      corral = std::move(kept);
      weights = std::move(kept_weights);
      const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
      for (double& w : weights) w /= total;
    }
    x.setZero();
    for (std::size_t i = 0; i < corral.size(); ++i) x += weights[i] * corral[i];
  }
  return {x + target, x.norm(), iter};
}

NearestPoint nearest_point(const VertexPolytope& hull, const Vector& target, const NearestPointOptions& options) {
  require_same_size(hull.dimension(), static_cast<std::size_t>(target.size()), "nearest_point");
  const auto oracle = [&](const Vector& d) -> Vector {
    const auto& vs = hull.vertices();
    std::size_t best = 0;
    double best_value = d.dot(vs[0]);
    for (std::size_t i = 1; i < vs.size(); ++i) {
      const double value = d.dot(vs[i]);
      if (value < best_value) {
        best_value = value;
        best = i;
      }
    }
    return vs[best];
  };
  return nearest_point(oracle, target, options);
}

double hausdorff_distance(const VertexPolytope& a, const VertexPolytope& b, const NearestPointOptions& options) {
  require_same_size(a.dimension(), b.dimension(), "hausdorff_distance");
  double out = 0.0;
  for (const Vector& v : a.vertices()) out = std::max(out, nearest_point(b, v, options).distance);
  for (const Vector& v : b.vertices()) out = std::max(out, nearest_point(a, v, options).distance);
  return out;
}

}  // namespace slope

#include "slope/prox.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace slope {

Vector isotonic_projection(const Vector& z) {
  const Eigen::Index p = z.size();
  // Each stack block: start index, length, sum.
  std::vector<Eigen::Index> start;
  std::vector<Eigen::Index> length;
  std::vector<double> sum;
  start.reserve(static_cast<std::size_t>(p));
  length.reserve(static_cast<std::size_t>(p));
  sum.reserve(static_cast<std::size_t>(p));
  for (Eigen::Index i = 0; i < p; ++i) {
    start.push_back(i);
    length.push_back(1);
    sum.push_back(z[i]);
    while (sum.size() > 1) {
      const std::size_t k = sum.size() - 1;
      if (sum[k - 1] / static_cast<double>(length[k - 1]) > sum[k] / static_cast<double>(length[k])) break;
      sum[k - 1] += sum[k];
      length[k - 1] += length[k];
      sum.pop_back();
      length.pop_back();
      start.pop_back();
    }
  }
  Vector out(p);
  for (std::size_t k = 0; k < sum.size(); ++k)
    out.segment(start[k], length[k]).setConstant(sum[k] / static_cast<double>(length[k]));
  return out;
}

namespace {

std::vector<std::size_t> order_by_descending(const Vector& v) {
  std::vector<std::size_t> order(static_cast<std::size_t>(v.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return v[static_cast<Eigen::Index>(a)] > v[static_cast<Eigen::Index>(b)];
  });
  return order;
}

// Solves the sorted subproblem on the given index set: with w = s .* y on the
// set sorted descending, returns isotonic(w - block), clipped at 0 if asked,
// scattered back into `out` with sign s.
void solve_sorted_block(const Vector& y, const std::vector<std::size_t>& indices, const Vector& signs,
                        const Vector& block, bool nonnegative, Vector& out) {
  const Eigen::Index m = static_cast<Eigen::Index>(indices.size());
  if (m == 0) return;
  Vector w(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto i = static_cast<Eigen::Index>(indices[static_cast<std::size_t>(k)]);
    w[k] = signs[k] * y[i];
  }
  const std::vector<std::size_t> order = order_by_descending(w);
  Vector sorted(m);
  for (Eigen::Index k = 0; k < m; ++k) sorted[k] = w[static_cast<Eigen::Index>(order[static_cast<std::size_t>(k)])];
  Vector fitted = isotonic_projection(sorted - block);
  if (nonnegative) fitted = fitted.cwiseMax(0.0);
  for (Eigen::Index k = 0; k < m; ++k) {
    const std::size_t local = order[static_cast<std::size_t>(k)];
    const auto i = static_cast<Eigen::Index>(indices[local]);
    out[i] = signs[static_cast<Eigen::Index>(local)] * fitted[k];
  }
}

}  // namespace

Vector prox_slope(const LambdaVector& lambda, const Vector& y) {
  require_same_size(lambda.size(), static_cast<std::size_t>(y.size()), "prox_slope");
  const Eigen::Index p = y.size();
  std::vector<std::size_t> all(static_cast<std::size_t>(p));
  std::iota(all.begin(), all.end(), 0);
  Vector signs(p);
  for (Eigen::Index i = 0; i < p; ++i) signs[i] = y[i] < 0.0 ? -1.0 : 1.0;
  Vector out = Vector::Zero(p);
  solve_sorted_block(y, all, signs, lambda.values(), true, out);
  return out;
}

Vector prox_directional(const LambdaVector& lambda, const Vector& beta0, const Vector& y) {
  require_same_size(lambda.size(), static_cast<std::size_t>(beta0.size()), "prox_directional");
  require_same_size(lambda.size(), static_cast<std::size_t>(y.size()), "prox_directional");
  const ClusterPartition partition = clusters(pattern(beta0));
  const BlockAssignment blocks = assign_lambda_blocks(partition);
  Vector out = Vector::Zero(y.size());

  const std::vector<std::size_t>& zero = partition.zero_cluster;
  Vector zero_signs(static_cast<Eigen::Index>(zero.size()));
  for (std::size_t k = 0; k < zero.size(); ++k)
    zero_signs[static_cast<Eigen::Index>(k)] = y[static_cast<Eigen::Index>(zero[k])] < 0.0 ? -1.0 : 1.0;
  solve_sorted_block(y, zero, zero_signs, lambda.block(blocks.zero.begin, blocks.zero.end), true, out);

  for (std::size_t j = 0; j < partition.nonzero_clusters.size(); ++j) {
    const std::vector<std::size_t>& cluster = partition.nonzero_clusters[j];
    Vector signs(static_cast<Eigen::Index>(cluster.size()));
    for (std::size_t k = 0; k < cluster.size(); ++k)
      signs[static_cast<Eigen::Index>(k)] = static_cast<double>(partition.signs[cluster[k]]);
    solve_sorted_block(y, cluster, signs, lambda.block(blocks.nonzero[j].begin, blocks.nonzero[j].end), false,
                       out);
  }
  return out;
}

Vector prox(const ProxRequest& request) {
  if (!(request.step > 0.0)) throw std::invalid_argument("prox: step must be positive");
  const LambdaVector lambda = request.lambda.scaled(request.step);
  if (request.anchor) return prox_directional(lambda, *request.anchor, request.input);
  return prox_slope(lambda, request.input);
}

}  // namespace slope

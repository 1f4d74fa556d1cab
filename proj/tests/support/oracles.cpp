#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace slope::testing {

double hull_infeasibility(const std::vector<Vector>& vertices, const Vector& v) {
  const auto k = static_cast<Eigen::Index>(vertices.size());
  const Eigen::Index p = v.size();
  const Eigen::Index rows = p + 1;
  const Eigen::Index cols = k + rows;
  // Tableau: rows x (cols + 1), last column is the right-hand side.
  Matrix t = Matrix::Zero(rows, cols + 1);
  for (Eigen::Index j = 0; j < k; ++j) {
    t.block(0, j, p, 1) = vertices[static_cast<std::size_t>(j)];
    t(p, j) = 1.0;
  }
  t.block(0, cols, p, 1) = v;
  t(p, cols) = 1.0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (t(i, cols) < 0) t.row(i) *= -1.0;
    t(i, k + i) = 1.0;
  }
  std::vector<Eigen::Index> basis(static_cast<std::size_t>(rows));
  std::iota(basis.begin(), basis.end(), k);
  // Reduced costs of the phase-I objective sum of artificials.
  Eigen::RowVectorXd cost = Eigen::RowVectorXd::Zero(cols + 1);
  cost.segment(k, rows).setOnes();
  for (Eigen::Index i = 0; i < rows; ++i) cost -= t.row(i);
  constexpr double eps = 1e-12;
  for (int iter = 0; iter < 100000; ++iter) {
    Eigen::Index enter = -1;
    for (Eigen::Index j = 0; j < cols; ++j)
      if (cost(j) < -eps) {
        enter = j;
        break;
      }
    if (enter < 0) break;
    Eigen::Index leave = -1;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (t(i, enter) <= eps) continue;
      const double ratio = t(i, cols) / t(i, enter);
      if (ratio < best - eps ||
          (ratio <= best + eps && leave >= 0 && basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)])) {
        best = std::min(best, ratio);
        leave = i;
      }
    }
    if (leave < 0) break;
    t.row(leave) /= t(leave, enter);
    for (Eigen::Index i = 0; i < rows; ++i)
      if (i != leave && t(i, enter) != 0.0) t.row(i) -= t(i, enter) * t.row(leave);
    cost -= cost(enter) * t.row(leave);
    basis[static_cast<std::size_t>(leave)] = enter;
  }
  return -cost(cols);
}

bool hull_contains(const std::vector<Vector>& vertices, const Vector& v, double tolerance) {
  return hull_infeasibility(vertices, v) <= tolerance;
}

std::vector<Vector> exposed_face_vertices(const LambdaVector& lambda, const Vector& x) {
  const std::size_t p = lambda.size();
  const double target = slope_norm(lambda, x);
  std::vector<std::size_t> perm(p);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<Vector> out;
  do {
    for (std::size_t mask = 0; mask < (std::size_t{1} << p); ++mask) {
      Vector s(static_cast<Eigen::Index>(p));
      for (std::size_t i = 0; i < p; ++i)
        s[static_cast<Eigen::Index>(i)] = ((mask >> i) & 1U ? -1.0 : 1.0) * lambda[perm[i]];
      if (s.dot(x) >= target - 1e-9 * (1.0 + std::abs(target))) out.push_back(s);
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return sorted_points(std::move(out));
}

Vector min_norm_point(const std::function<Vector(const Vector&)>& lmo, const Vector& target, int max_iterations) {
  std::vector<Vector> corral{lmo(Vector::Zero(target.size())) - target};
  Vector weights = Vector::Ones(1);
  Vector x = corral.front();
  for (int iter = 0; iter < max_iterations; ++iter) {
    const Vector s = lmo(x) - target;
    if (x.squaredNorm() - x.dot(s) <= 1e-14 * std::max(1.0, x.squaredNorm())) break;
    bool duplicate = false;
    for (const auto& c : corral) duplicate = duplicate || (c - s).norm() < 1e-14;
    if (duplicate) break;
    corral.push_back(s);
    weights.conservativeResize(weights.size() + 1);
    weights[weights.size() - 1] = 0.0;
    while (true) {
      // Affine minimizer via the KKT system [G 1; 1' 0].
      const auto m = static_cast<Eigen::Index>(corral.size());
      Matrix kkt = Matrix::Zero(m + 1, m + 1);
      for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index b = 0; b < m; ++b)
          kkt(a, b) = corral[static_cast<std::size_t>(a)].dot(corral[static_cast<std::size_t>(b)]);
      kkt.block(0, m, m, 1).setOnes();
      kkt.block(m, 0, 1, m).setOnes();
      Vector rhs = Vector::Zero(m + 1);
      rhs[m] = 1.0;
      const Vector alpha = kkt.completeOrthogonalDecomposition().solve(rhs).head(m);
      if ((alpha.array() > 1e-15).all()) {
        weights = alpha;
        break;
      }
      double theta = 1.0;
      for (Eigen::Index i = 0; i < m; ++i)
        if (alpha[i] <= 1e-15) theta = std::min(theta, weights[i] / (weights[i] - alpha[i]));
      weights = theta * alpha + (1.0 - theta) * weights;
      std::vector<Vector> kept;
      std::vector<double> kept_w;
      for (Eigen::Index i = 0; i < m; ++i)
        if (weights[i] > 1e-15) {
          kept.push_back(corral[static_cast<std::size_t>(i)]);
          kept_w.push_back(weights[i]);
        }
      corral = std::move(kept);
      weights = Eigen::Map<Vector>(kept_w.data(), static_cast<Eigen::Index>(kept_w.size()));
    }
    x = Vector::Zero(target.size());
    for (std::size_t i = 0; i < corral.size(); ++i) x += weights[static_cast<Eigen::Index>(i)] * corral[i];
  }
  return x + target;
}

Vector subdifferential_lmo(const LambdaVector& lambda, const SlopePattern& patt, const Vector& d) {
  const std::size_t p = patt.size();
  // Group indices by |pattern entry|; larger ranks take larger lambdas.
  std::vector<std::size_t> idx(p);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(patt[a]) > std::abs(patt[b]); });
  Vector s = Vector::Zero(static_cast<Eigen::Index>(p));
  std::size_t start = 0;
  while (start < p) {
    std::size_t end = start;
    while (end < p && std::abs(patt[idx[end]]) == std::abs(patt[idx[start]])) ++end;
    std::vector<std::size_t> group(idx.begin() + static_cast<long>(start), idx.begin() + static_cast<long>(end));
    const bool zero = patt[group.front()] == 0;
    // Minimizing <d, s>: the most negative sign-corrected d gets the largest lambda.
    const auto score = [&](std::size_t i) {
      const double di = d[static_cast<Eigen::Index>(i)];
      return zero ? -std::abs(di) : (patt[i] > 0 ? di : -di);
    };
    std::stable_sort(group.begin(), group.end(), [&](std::size_t a, std::size_t b) { return score(a) < score(b); });
    for (std::size_t r = 0; r < group.size(); ++r) {
      const std::size_t i = group[r];
      const double l = lambda[start + r];
      const double di = d[static_cast<Eigen::Index>(i)];
      double sign;
      if (zero)
        sign = di > 0 ? -1.0 : 1.0;
      else
        sign = patt[i] > 0 ? 1.0 : -1.0;
      s[static_cast<Eigen::Index>(i)] = sign * l;
    }
    start = end;
  }
  return s;
}

Vector moreau_prox(const LambdaVector& lambda, const std::optional<Vector>& beta0, const Vector& y) {
  const SlopePattern patt = beta0 ? pattern(*beta0) : SlopePattern(std::vector<int>(static_cast<std::size_t>(y.size()), 0));
  const auto lmo = [&](const Vector& d) { return subdifferential_lmo(lambda, patt, d); };
  return y - min_norm_point(lmo, y);
}

Vector grid_argmin2(const std::function<double(double, double)>& f, double lo, double hi) {
  double a0 = lo, a1 = hi, b0 = lo, b1 = hi;
  double best_a = 0.0, best_b = 0.0;
  constexpr int steps = 200;
  for (int level = 0; level < 12; ++level) {
    double best = std::numeric_limits<double>::infinity();
    const double ha = (a1 - a0) / steps;
    const double hb = (b1 - b0) / steps;
    for (int i = 0; i <= steps; ++i)
      for (int j = 0; j <= steps; ++j) {
        const double a = a0 + i * ha;
        const double b = b0 + j * hb;
        const double v = f(a, b);
        if (v < best) {
          best = v;
          best_a = a;
          best_b = b;
        }
      }
    a0 = std::max(lo, best_a - 4 * ha);
    a1 = std::min(hi, best_a + 4 * ha);
    b0 = std::max(lo, best_b - 4 * hb);
    b1 = std::min(hi, best_b + 4 * hb);
  }
  return Vector{{best_a, best_b}};
}

std::vector<Vector> sorted_points(std::vector<Vector> points) {
  for (auto& pt : points) pt.array() += 0.0;  // -0 becomes +0
  const auto less = [](const Vector& a, const Vector& b) {
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
  };
  std::sort(points.begin(), points.end(), less);
  points.erase(std::unique(points.begin(), points.end(), [](const Vector& a, const Vector& b) { return a == b; }),
               points.end());
  return points;
}

Vector random_vector(std::mt19937_64& rng, std::size_t p, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(static_cast<Eigen::Index>(p));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = u(rng);
  return v;
}

LambdaVector random_lambda(std::mt19937_64& rng, std::size_t p, double hi) {
  Vector v = random_vector(rng, p, 0.0, hi);
  std::uniform_int_distribution<int> coin(0, 3);
  // Occasional ties and zeros exercise the degenerate blocks.
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (coin(rng) == 0) v[i] = v[i - 1];
  if (coin(rng) == 0) v[v.size() - 1] = 0.0;
  std::sort(v.data(), v.data() + v.size(), std::greater<>());
  return LambdaVector(v);
}

Vector random_tied_vector(std::mt19937_64& rng, std::size_t p) {
  std::uniform_int_distribution<int> level(0, 3);
  std::uniform_int_distribution<int> coin(0, 1);
  const Vector levels = random_vector(rng, 4, 0.5, 5.0);
  Vector v(static_cast<Eigen::Index>(p));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const int l = level(rng);
    v[i] = l == 0 ? 0.0 : levels[l] * (coin(rng) ? 1.0 : -1.0);
  }
  return v;
}

}  // namespace slope::testing

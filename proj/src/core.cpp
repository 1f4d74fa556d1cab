#include "slope/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace slope {

void require_same_size(std::size_t a, std::size_t b, std::string_view what) {
  if (a != b) {
    std::ostringstream msg;
    msg << what << ": dimension mismatch (" << a << " vs " << b << ")";
    throw DimensionError(msg.str());
  }
}

bool same_magnitude(double a, double b) {
  const double scale = std::max({1.0, std::abs(a), std::abs(b)});
  return std::abs(a - b) <= kClusterTolerance * scale;
}

// ---------------------------------------------------------------------------
// LambdaVector

LambdaVector::LambdaVector(Vector values) : values_(std::move(values)) {
  if (values_.size() == 0) throw std::invalid_argument("lambda: must have length >= 1");
  for (Eigen::Index i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i]) || values_[i] < 0.0)
      throw std::invalid_argument("lambda: entries must be finite and nonnegative");
    if (i > 0 && values_[i] > values_[i - 1])
      throw std::invalid_argument("lambda: entries must be nonincreasing");
  }
}

LambdaVector::LambdaVector(std::initializer_list<double> values)
    : LambdaVector(Eigen::Map<const Vector>(values.begin(), static_cast<Eigen::Index>(values.size()))) {}

LambdaVector LambdaVector::constant(std::size_t p, double value) {
  return LambdaVector(Vector::Constant(static_cast<Eigen::Index>(p), value));
}

LambdaVector LambdaVector::scaled(double t) const {
  if (!(t >= 0.0)) throw std::invalid_argument("lambda: scale factor must be nonnegative");
  return LambdaVector(values_ * t);
}

Vector LambdaVector::block(std::size_t begin, std::size_t end) const {
  return values_.segment(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin));
}

// ---------------------------------------------------------------------------
// SlopePattern

SlopePattern::SlopePattern(std::vector<int> entries) : entries_(std::move(entries)) {
  int m = 0;
  for (int e : entries_) m = std::max(m, std::abs(e));
  std::vector<bool> seen(static_cast<std::size_t>(m) + 1, false);
  for (int e : entries_) seen[static_cast<std::size_t>(std::abs(e))] = true;
  for (int k = 1; k <= m; ++k) {
    if (!seen[static_cast<std::size_t>(k)])
      throw std::invalid_argument("pattern: ranks must be consecutive, missing rank " + std::to_string(k));
  }
  max_rank_ = m;
}

SlopePattern::SlopePattern(std::initializer_list<int> entries)
    : SlopePattern(std::vector<int>(entries)) {}

std::string SlopePattern::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(entries_[i]);
  }
  return out;
}

SlopePattern SlopePattern::parse(std::string_view text) {
  std::vector<int> entries;
  std::string token;
  std::istringstream in{std::string(text)};
  while (std::getline(in, token, ',')) {
    std::size_t used = 0;
    int value = 0;
    try {
      value = std::stoi(token, &used);
    } catch (const std::exception&) {
      throw std::invalid_argument("pattern: cannot parse '" + token + "'");
    }
    if (token.find_first_not_of(" \t", used) != std::string::npos)
      throw std::invalid_argument("pattern: cannot parse '" + token + "'");
    entries.push_back(value);
  }
  return SlopePattern(std::move(entries));
}

Vector SlopePattern::as_vector() const {
  Vector v(static_cast<Eigen::Index>(entries_.size()));
  for (std::size_t i = 0; i < entries_.size(); ++i) v[static_cast<Eigen::Index>(i)] = entries_[i];
  return v;
}

SlopePattern ClusterPartition::reconstruct() const {
  std::vector<int> entries(signs.size(), 0);
  for (std::size_t j = 0; j < nonzero_clusters.size(); ++j) {
    for (std::size_t i : nonzero_clusters[j]) entries[i] = signs[i] * static_cast<int>(j + 1);
  }
  return SlopePattern(std::move(entries));
}

// ---------------------------------------------------------------------------
// CovarianceMatrix

CovarianceMatrix::CovarianceMatrix(Matrix entries) : entries_(std::move(entries)) {
  if (entries_.rows() == 0 || entries_.rows() != entries_.cols())
    throw std::invalid_argument("covariance: must be a nonempty square matrix");
  const double scale = std::max(1.0, entries_.cwiseAbs().maxCoeff());
  if ((entries_ - entries_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw std::invalid_argument("covariance: must be symmetric");
  entries_ = 0.5 * (entries_ + entries_.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(entries_, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() <= 1e-10 * scale)
    throw std::invalid_argument("covariance: must be positive definite");
  Eigen::LLT<Matrix> llt(entries_);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("covariance: Cholesky factorization failed");
  cholesky_ = llt.matrixL();
}

CovarianceMatrix CovarianceMatrix::identity(std::size_t p) {
  return CovarianceMatrix(Matrix::Identity(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p)));
}

Matrix CovarianceMatrix::sqrt() const {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(entries_);
  return eig.operatorSqrt();
}

// ---------------------------------------------------------------------------
// Norm, patterns and clusters

double slope_norm(const LambdaVector& lambda, const Vector& v) {
  require_same_size(lambda.size(), static_cast<std::size_t>(v.size()), "slope_norm");
  std::vector<double> mags(v.data(), v.data() + v.size());
  for (double& m : mags) m = std::abs(m);
  std::sort(mags.begin(), mags.end(), std::greater<>());
  double total = 0.0;
  for (std::size_t i = 0; i < mags.size(); ++i) total += lambda[i] * mags[i];
  return total;
}

namespace {

int sign_of(double x) { return (x > 0.0) - (x < 0.0); }

// Ranks the (primary, secondary) keys lexicographically; secondary values are
// compared with the cluster tolerance. The key (0, 0) is the null cluster.
std::vector<int> rank_keys(const std::vector<int>& primary, const std::vector<double>& secondary) {
  const std::size_t p = primary.size();
  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (primary[a] != primary[b]) return primary[a] < primary[b];
    return secondary[a] < secondary[b];
  });
  std::vector<int> rank(p, 0);
  int current = 0;
  int prev_primary = 0;
  double prev_secondary = 0.0;
  for (std::size_t idx : order) {
    const bool same = primary[idx] == prev_primary && same_magnitude(secondary[idx], prev_secondary);
    if (!same) ++current;
    rank[idx] = current;
    prev_primary = primary[idx];
    prev_secondary = secondary[idx];
  }
  return rank;
}

}  // namespace

SlopePattern pattern(const Vector& v) {
  const std::size_t p = static_cast<std::size_t>(v.size());
  std::vector<int> primary(p, 0);
  std::vector<double> mags(p);
  for (std::size_t i = 0; i < p; ++i) mags[i] = std::abs(v[static_cast<Eigen::Index>(i)]);
  const std::vector<int> rank = rank_keys(primary, mags);
  std::vector<int> entries(p);
  for (std::size_t i = 0; i < p; ++i)
    entries[i] = rank[i] == 0 ? 0 : rank[i] * sign_of(v[static_cast<Eigen::Index>(i)]);
  return SlopePattern(std::move(entries));
}

ClusterPartition clusters(const SlopePattern& p) {
  ClusterPartition out;
  out.signs.assign(p.size(), 0);
  out.nonzero_clusters.resize(static_cast<std::size_t>(p.max_rank()));
  for (std::size_t i = 0; i < p.size(); ++i) {
    const int e = p[i];
    if (e == 0) {
      out.zero_cluster.push_back(i);
    } else {
      out.nonzero_clusters[static_cast<std::size_t>(std::abs(e) - 1)].push_back(i);
      out.signs[i] = e > 0 ? 1 : -1;
    }
  }
  return out;
}

BlockAssignment assign_lambda_blocks(const ClusterPartition& partition) {
  BlockAssignment blocks;
  blocks.nonzero.resize(partition.nonzero_clusters.size());
  std::size_t next = 0;
  for (std::size_t j = partition.nonzero_clusters.size(); j-- > 0;) {
    blocks.nonzero[j] = {next, next + partition.nonzero_clusters[j].size()};
    next = blocks.nonzero[j].end;
  }
  blocks.zero = {next, next + partition.zero_cluster.size()};
  return blocks;
}

Vector sign_diagonal(const SlopePattern& p) {
  Vector s(static_cast<Eigen::Index>(p.size()));
  for (std::size_t i = 0; i < p.size(); ++i) s[static_cast<Eigen::Index>(i)] = p[i] < 0 ? -1.0 : 1.0;
  return s;
}

std::vector<std::size_t> sorting_order(const SlopePattern& p) {
  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(p[a]) > std::abs(p[b]); });
  return order;
}

SlopePattern limiting_pattern(const Vector& beta0, const Vector& u) {
  require_same_size(static_cast<std::size_t>(beta0.size()), static_cast<std::size_t>(u.size()),
                    "limiting_pattern");
  const SlopePattern base = pattern(beta0);
  const std::size_t p = base.size();
  std::vector<int> primary(p);
  std::vector<double> secondary(p);
  for (std::size_t i = 0; i < p; ++i) {
    const double ui = u[static_cast<Eigen::Index>(i)];
    primary[i] = std::abs(base[i]);
    // Magnitude of beta0_i + eps u_i to first order in eps, beyond |beta0_i|.
    secondary[i] = base[i] == 0 ? std::abs(ui) : (base[i] > 0 ? ui : -ui);
  }
  const std::vector<int> rank = rank_keys(primary, secondary);
  std::vector<int> entries(p);
  for (std::size_t i = 0; i < p; ++i) {
    const int s = base[i] != 0 ? sign_of(static_cast<double>(base[i])) : sign_of(u[static_cast<Eigen::Index>(i)]);
    entries[i] = rank[i] == 0 ? 0 : rank[i] * s;
  }
  return SlopePattern(std::move(entries));
}

double directional_derivative(const LambdaVector& lambda, const Vector& beta0, const Vector& u) {
  require_same_size(lambda.size(), static_cast<std::size_t>(beta0.size()), "directional_derivative");
  require_same_size(lambda.size(), static_cast<std::size_t>(u.size()), "directional_derivative");
  const SlopePattern base = pattern(beta0);
  const std::vector<std::size_t> order = sorting_order(limiting_pattern(beta0, u));
  double total = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t i = order[k];
    const double ui = u[static_cast<Eigen::Index>(i)];
    const double contribution = base[i] == 0 ? std::abs(ui) : (base[i] > 0 ? ui : -ui);
    total += lambda[k] * contribution;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Normal distribution

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Wichura, Algorithm AS 241 (PPND16); relative accuracy about 1e-16.
double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile: probability must lie in (0,1)");
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    const double num =
        ((((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r + 6.7265770927008700853e+4) * r +
              4.5921953931549871457e+4) * r + 1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
           1.3314166789178437745e+2) * r + 3.3871328727963666080e+0));
    const double den =
        ((((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r + 3.9307895800092710610e+4) * r +
              2.1213794301586595867e+4) * r + 5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
           4.2313330701600911252e+1) * r + 1.0));
    return q * num / den;
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double value = 0.0;
  if (r <= 5.0) {
    r -= 1.6;
    const double num =
        ((((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r + 2.41780725177450611770e-1) * r +
              1.27045825245236838258e+0) * r + 3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
           4.63033784615654529590e+0) * r + 1.42343711074968357734e+0));
    const double den =
        ((((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r + 1.51986665636164571966e-2) * r +
              1.48103976427480074590e-1) * r + 6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
           2.05319162663775882187e+0) * r + 1.0));
    value = num / den;
  } else {
    r -= 5.0;
    const double num =
        ((((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 1.24266094738807843860e-3) * r +
              2.65321895265761230930e-2) * r + 2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
           5.46378491116411436990e+0) * r + 6.65790464350110377720e+0));
    const double den =
        ((((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r + 1.84631831751005468180e-5) * r +
              7.86869131145613259100e-4) * r + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
           5.99832206555887937690e-1) * r + 1.0));
    value = num / den;
  }
  return q < 0.0 ? -value : value;
}

LambdaVector bhq_lambdas(std::size_t p, double q, double scale) {
  if (p == 0) throw std::invalid_argument("bhq: p must be positive");
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("q must lie in (0,1)");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw std::invalid_argument("bhq: scale must be positive");
  Vector values(static_cast<Eigen::Index>(p));
  for (std::size_t i = 1; i <= p; ++i) {
    const double tail = static_cast<double>(i) * q / (2.0 * static_cast<double>(p));
    values[static_cast<Eigen::Index>(i - 1)] = scale * normal_quantile(1.0 - tail);
  }
  return LambdaVector(std::move(values));
}

std::vector<SlopePattern> enumerate_patterns(std::size_t p) {
  std::vector<SlopePattern> out;
  const int bound = static_cast<int>(p);
  std::vector<int> entries(p, -bound);
  while (true) {
    int m = 0;
    for (int e : entries) m = std::max(m, std::abs(e));
    std::vector<bool> seen(static_cast<std::size_t>(m) + 1, false);
    for (int e : entries) seen[static_cast<std::size_t>(std::abs(e))] = true;
    bool valid = true;
    for (int k = 1; k <= m; ++k) valid = valid && seen[static_cast<std::size_t>(k)];
    if (valid) out.emplace_back(entries);
    std::size_t pos = 0;
    while (pos < p && entries[pos] == bound) entries[pos++] = -bound;
    if (pos == p) break;
    ++entries[pos];
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace slope

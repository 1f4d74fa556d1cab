#include "slope/montecarlo.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <random>
#include <thread>

#include "slope/geometry.hpp"

namespace slope {

void ModelSpec::validate() const {
  if (beta0.size() == 0) throw std::invalid_argument("beta0 must be nonempty");
  require_same_size(dimension(), covariance.size(), "covariance vs beta0");
  noise.validate();
}

LambdaVector LambdaRule::resolve(const ModelSpec& model) const {
  if (const auto* explicit_lambda = std::get_if<LambdaVector>(&rule)) {
    require_same_size(explicit_lambda->size(), model.dimension(), "lambda vs beta0");
    return *explicit_lambda;
  }
  const BhqRule& bhq = std::get<BhqRule>(rule);
  const double scale = bhq.scale ? *bhq.scale : std::sqrt(loss_constants(model.loss, model.noise).delta);
  return bhq_lambdas(model.dimension(), bhq.q, scale);
}

void ExperimentConfig::validate() const {
  model.validate();
  if (replications < 1) throw std::invalid_argument("replications must be >= 1");
  if (n < model.dimension()) throw std::invalid_argument("n must be >= p");
  solver.validate();
  lambda.resolve(model);
}

void PatternDistribution::add(const SlopePattern& p, long count) {
  counts_[p] += count;
  total_ += count;
}

long PatternDistribution::count(const SlopePattern& p) const {
  const auto it = counts_.find(p);
  return it == counts_.end() ? 0 : it->second;
}

double PatternDistribution::frequency(const SlopePattern& p) const {
  return total_ == 0 ? 0.0 : static_cast<double>(count(p)) / static_cast<double>(total_);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t r) { return splitmix64(splitmix64(seed) ^ r); }

unsigned resolve_threads(unsigned threads) {
  if (threads > 0) return threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

Vector standard_normal(std::mt19937_64& rng, Eigen::Index p) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(p);
  for (Eigen::Index i = 0; i < p; ++i) z[i] = normal(rng);
  return z;
}

// Calls body(r) for r in [0, count) on `threads` workers; rethrows the first
// exception after all workers stop.
template <typename Body>
void parallel_for(std::size_t count, unsigned threads, Body body) {
  const unsigned workers = std::min<std::size_t>(resolve_threads(threads), std::max<std::size_t>(count, 1));
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  const auto work = [&] {
    while (!stop.load()) {
      const std::size_t r = next.fetch_add(1);
      if (r >= count) return;
      try {
        body(r);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        stop = true;
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
}

void tally_discoveries(ReplicationRecord& rec, const Vector& estimate, const Vector& beta0) {
  int v = 0;
  int r = 0;
  int true_found = 0;
  int true_total = 0;
  for (Eigen::Index i = 0; i < beta0.size(); ++i) {
    const bool found = std::abs(estimate[i]) > kClusterTolerance;
    const bool null = beta0[i] == 0.0;
    r += found;
    v += found && null;
    true_total += !null;
    true_found += found && !null;
  }
  rec.false_discoveries = v;
  rec.discoveries = r;
  rec.fdr_contribution = static_cast<double>(v) / std::max(1, r);
  rec.power_contribution = true_total == 0 ? 1.0 : static_cast<double>(true_found) / true_total;
}

FdrReport aggregate(const std::vector<ReplicationRecord>& records) {
  FdrReport out;
  double sum = 0.0;
  double sum_sq = 0.0;
  double power = 0.0;
  for (const auto& rec : records) {
    if (rec.failed) {
      ++out.failures;
      continue;
    }
    ++out.replications;
    sum += rec.fdr_contribution;
    sum_sq += rec.fdr_contribution * rec.fdr_contribution;
    power += rec.power_contribution;
  }
  if (out.replications == 0) return out;
  const double r = static_cast<double>(out.replications);
  out.fdr_estimate = sum / r;
  out.power_estimate = power / r;
  if (out.replications > 1) {
    const double var = std::max(0.0, (sum_sq - r * out.fdr_estimate * out.fdr_estimate) / (r - 1.0));
    out.standard_error = std::sqrt(var / r);
  }
  return out;
}

void enforce_failure_budget(const FdrReport& report) {
  const long total = report.replications + report.failures;
  if (report.failures * 100 > total) {
    throw ExperimentAborted(std::to_string(report.failures) + " of " + std::to_string(total) +
                            " replications failed to converge (budget 1%)");
  }
}

}  // namespace

Dataset generate_data(const ModelSpec& model, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  const auto p = static_cast<Eigen::Index>(model.dimension());
  std::mt19937_64 rng(seed);
  const Matrix& chol = model.covariance.cholesky_factor();
  Dataset out{Matrix(static_cast<Eigen::Index>(n), p), Vector(static_cast<Eigen::Index>(n))};
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i)
    out.x.row(i) = (chol * standard_normal(rng, p)).transpose();
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) out.y[i] = model.noise.sample(rng);
  out.y += out.x * model.beta0;
  return out;
}

FiniteSampleReport run_finite_sample(const ExperimentConfig& config) {
  config.validate();
  const ModelSpec& model = config.model;
  const double root_n = std::sqrt(static_cast<double>(config.n));
  const LambdaVector lambda_n = config.lambda.resolve(model).scaled(root_n);
  std::vector<ReplicationRecord> records(config.replications);
  parallel_for(config.replications, config.threads, [&](std::size_t r) {
    ReplicationRecord& rec = records[r];
    rec.index = r;
    const Dataset data = generate_data(model, config.n, stream_seed(config.seed, r));
    SolverOptions opts = config.solver;
    opts.record_trace = false;
    try {
      const SolveResult fit = solve_slope(data.x, data.y, lambda_n, model.loss, opts);
      rec.iterations = fit.iterations;
      rec.pattern = pattern(fit.solution);
      rec.secondary_pattern = pattern(root_n * (fit.solution - model.beta0));
      rec.estimate = fit.solution;
      tally_discoveries(rec, fit.solution, model.beta0);
    } catch (const ConvergenceError& e) {
      rec.failed = true;
      rec.iterations = e.last().iterations;
    }
  });
  FiniteSampleReport out;
  out.fdr = aggregate(records);
  enforce_failure_budget(out.fdr);
  for (const auto& rec : records) {
    if (rec.failed) continue;
    out.patterns.add(rec.pattern);
    out.rescaled_patterns.add(rec.secondary_pattern);
  }
  out.records = std::move(records);
  return out;
}

LimitingReport run_limiting(const ModelSpec& model, const LambdaVector& lambda, const LimitingOptions& options) {
  model.validate();
  require_same_size(lambda.size(), model.dimension(), "lambda vs beta0");
  if (options.replications < 1) throw std::invalid_argument("replications must be >= 1");
  const LossConstants constants = loss_constants(model.loss, model.noise);
  const CovarianceMatrix c_tilde(constants.curvature * model.covariance.matrix());
  const Matrix w_factor = std::sqrt(constants.delta) * model.covariance.cholesky_factor();
  const auto p = static_cast<Eigen::Index>(model.dimension());
  std::vector<ReplicationRecord> records(options.replications);
  parallel_for(options.replications, options.threads, [&](std::size_t r) {
    ReplicationRecord& rec = records[r];
    rec.index = r;
    std::mt19937_64 rng(stream_seed(options.seed, r));
    LimitProblem problem{c_tilde, w_factor * standard_normal(rng, p), lambda, model.beta0};
    SolverOptions opts = options.solver;
    opts.record_trace = false;
    try {
      const SolveResult fit = solve_limit_problem(problem, opts);
      rec.iterations = fit.iterations;
      rec.pattern = pattern(fit.solution);
      rec.secondary_pattern = limiting_pattern(model.beta0, fit.solution);
      rec.estimate = fit.solution;
      tally_discoveries(rec, rec.secondary_pattern.as_vector(), model.beta0);
    } catch (const ConvergenceError& e) {
      rec.failed = true;
      rec.iterations = e.last().iterations;
    }
  });
  LimitingReport out;
  out.fdr = aggregate(records);
  enforce_failure_budget(out.fdr);
  for (const auto& rec : records) {
    if (rec.failed) continue;
    out.patterns.add(rec.pattern);
    out.limiting_patterns.add(rec.secondary_pattern);
  }
  out.records = std::move(records);
  return out;
}

Estimate recovery_probability(const LambdaVector& lambda, const Vector& beta0, const CovarianceMatrix& c,
                              double sigma, std::size_t replications, std::uint64_t seed) {
  const std::size_t p = lambda.size();
  require_same_size(p, static_cast<std::size_t>(beta0.size()), "recovery_probability beta0");
  require_same_size(p, c.size(), "recovery_probability covariance");
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  if (replications < 1) throw std::invalid_argument("replications must be >= 1");

  const SlopePattern base = pattern(beta0);
  const ClusterPartition part = clusters(base);
  const Vector signs = sign_diagonal(base);
  const auto pp = static_cast<Eigen::Index>(p);
  const auto m = static_cast<Eigen::Index>(part.cluster_count());

  Matrix u = Matrix::Zero(pp, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (std::size_t i : part.nonzero_clusters[static_cast<std::size_t>(m - 1 - j)])
      u(static_cast<Eigen::Index>(i), j) = signs[static_cast<Eigen::Index>(i)];
  }
  Vector lambda0(pp);
  const std::vector<std::size_t> order = sorting_order(base);
  for (std::size_t k = 0; k < p; ++k) {
    const auto i = static_cast<Eigen::Index>(order[k]);
    lambda0[i] = signs[i] * lambda[k];
  }

  const Matrix c_half = c.sqrt();
  const Matrix c_half_inv = c_half.inverse();
  Matrix proj = Matrix::Zero(pp, pp);
  if (m > 0) {
    const Matrix cu = c_half * u;
    proj = cu * (u.transpose() * c.matrix() * u).ldlt().solve(cu.transpose());
  }
  const Matrix identity = Matrix::Identity(pp, pp);
  const Vector mean = c_half * proj * c_half_inv * lambda0;
  const Matrix spread = sigma * c_half * (identity - proj);

  long hits = 0;
  std::mt19937_64 rng(splitmix64(seed));
  for (std::size_t r = 0; r < replications; ++r) {
    const Vector z = mean + spread * standard_normal(rng, pp);
    hits += dual_ball_membership(lambda, z);
  }
  const double rate = static_cast<double>(hits) / static_cast<double>(replications);
  return {rate, std::sqrt(rate * (1.0 - rate) / static_cast<double>(replications))};
}

double compare_distributions(const PatternDistribution& a, const PatternDistribution& b) {
  if (a.total() == 0 || b.total() == 0) throw std::invalid_argument("compare_distributions: empty distribution");
  double sum = 0.0;
  for (const auto& [p, count] : a.counts()) sum += std::abs(a.frequency(p) - b.frequency(p));
  for (const auto& [p, count] : b.counts()) {
    if (a.count(p) == 0) sum += b.frequency(p);
  }
  return 0.5 * sum;
}

double comparison_noise(const PatternDistribution& a, const PatternDistribution& b) {
  const auto sd = [](double f, long total) { return f * (1.0 - f) / static_cast<double>(total); };
  double sum = 0.0;
  std::map<SlopePattern, bool> support;
  for (const auto& [p, count] : a.counts()) support[p] = true;
  for (const auto& [p, count] : b.counts()) support[p] = true;
  for (const auto& [p, unused] : support)
    sum += std::sqrt(sd(a.frequency(p), a.total()) + sd(b.frequency(p), b.total()));
  return 0.5 * sum;
}

std::vector<AttainabilityEntry> attainability_sweep(const LambdaVector& lambda, const Vector& beta0,
                                                    const CovarianceMatrix& c, double sigma,
                                                    std::size_t replications, std::uint64_t seed,
                                                    unsigned threads) {
  if (beta0.size() > 4) throw std::invalid_argument("attainability_sweep: p must be <= 4");
  ModelSpec model{beta0, c, NoiseSpec::gaussian(sigma), LossSpec::quadratic()};
  LimitingOptions options;
  options.replications = replications;
  options.seed = seed;
  options.threads = threads;
  const LimitingReport report = run_limiting(model, lambda, options);
  std::vector<AttainabilityEntry> out;
  for (const SlopePattern& p : enumerate_patterns(static_cast<std::size_t>(beta0.size()))) {
    AttainabilityEntry entry;
    entry.pattern = p;
    entry.count = report.patterns.count(p);
    entry.frequency = report.patterns.frequency(p);
    entry.attainable = attainable(lambda, beta0, p);
    out.push_back(std::move(entry));
  }
  return out;
}

}  // namespace slope

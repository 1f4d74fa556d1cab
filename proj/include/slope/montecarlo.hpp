#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <variant>

#include "slope/core.hpp"
#include "slope/noise.hpp"
#include "slope/solvers.hpp"

namespace slope {

struct ModelSpec {
  Vector beta0;
  CovarianceMatrix covariance = CovarianceMatrix::identity(1);
  NoiseSpec noise = NoiseSpec::gaussian(1.0);
  LossSpec loss = LossSpec::quadratic();

  std::size_t dimension() const noexcept { return static_cast<std::size_t>(beta0.size()); }
  void validate() const;
};

/// lambda_i = scale * Phi^{-1}(1 - i q / 2p); scale defaults to sqrt(delta)
/// of the model's loss and noise.
struct BhqRule {
  double q = 0.1;
  std::optional<double> scale;
};

struct LambdaRule {
  std::variant<LambdaVector, BhqRule> rule;

  LambdaVector resolve(const ModelSpec& model) const;
};

struct ExperimentConfig {
  ModelSpec model;
  std::size_t n = 100;
  std::size_t replications = 100;
  LambdaRule lambda{BhqRule{}};
  std::uint64_t seed = 0;
  SolverOptions solver;
  /// Worker threads; 0 uses the hardware concurrency.
  unsigned threads = 1;

  void validate() const;
};

class PatternDistribution {
 public:
  void add(const SlopePattern& p, long count = 1);
  long count(const SlopePattern& p) const;
  double frequency(const SlopePattern& p) const;
  long total() const noexcept { return total_; }
  const std::map<SlopePattern, long>& counts() const noexcept { return counts_; }

 private:
  std::map<SlopePattern, long> counts_;
  long total_ = 0;
};

struct FdrReport {
  double fdr_estimate = 0.0;
  double power_estimate = 0.0;
  double standard_error = 0.0;
  long replications = 0;
  long failures = 0;
};

struct ReplicationRecord {
  std::size_t index = 0;
  bool failed = false;
  int false_discoveries = 0;  // V
  int discoveries = 0;        // R
  double fdr_contribution = 0.0;
  double power_contribution = 0.0;
  SlopePattern pattern;
  /// patt(sqrt(n)(beta_hat - beta0)) for finite samples, the limiting pattern otherwise.
  SlopePattern secondary_pattern;
  /// beta_hat for finite samples, u_hat in the limit; empty on failure.
  Vector estimate;
  int iterations = 0;
};

struct FiniteSampleReport {
  PatternDistribution patterns;           // patt(beta_hat)
  PatternDistribution rescaled_patterns;  // patt(sqrt(n)(beta_hat - beta0))
  FdrReport fdr;
  std::vector<ReplicationRecord> records;
};

struct LimitingReport {
  PatternDistribution patterns;           // patt(u_hat)
  PatternDistribution limiting_patterns;  // patt_{beta0}(u_hat)
  FdrReport fdr;
  std::vector<ReplicationRecord> records;
};

class ExperimentAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Dataset {
  Matrix x;
  Vector y;
};

std::uint64_t splitmix64(std::uint64_t x);
/// Seed of replication r's private random stream.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t r);

Dataset generate_data(const ModelSpec& model, std::size_t n, std::uint64_t stream_seed);

FiniteSampleReport run_finite_sample(const ExperimentConfig& config);

struct LimitingOptions {
  std::size_t replications = 1000;
  std::uint64_t seed = 0;
  SolverOptions solver;
  unsigned threads = 1;
};

LimitingReport run_limiting(const ModelSpec& model, const LambdaVector& lambda, const LimitingOptions& options);

struct Estimate {
  double value = 0.0;
  double standard_error = 0.0;
};

Estimate recovery_probability(const LambdaVector& lambda, const Vector& beta0, const CovarianceMatrix& c,
                              double sigma, std::size_t replications, std::uint64_t seed);

double compare_distributions(const PatternDistribution& a, const PatternDistribution& b);
/// Rough sampling noise of compare_distributions: 1/2 sum of binomial SDs.
double comparison_noise(const PatternDistribution& a, const PatternDistribution& b);

struct AttainabilityEntry {
  SlopePattern pattern;
  long count = 0;
  double frequency = 0.0;
  bool attainable = false;
};

std::vector<AttainabilityEntry> attainability_sweep(const LambdaVector& lambda, const Vector& beta0,
                                                    const CovarianceMatrix& c, double sigma,
                                                    std::size_t replications, std::uint64_t seed,
                                                    unsigned threads = 1);

/// Worker count for a request of `threads` (0 = hardware concurrency).
unsigned resolve_threads(unsigned threads);

}  // namespace slope

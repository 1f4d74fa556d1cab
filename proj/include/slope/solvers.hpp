#pragma once

#include <stdexcept>
#include <variant>

#include "slope/core.hpp"
#include "slope/noise.hpp"

namespace slope {

struct QuadraticLoss {};
struct HuberLoss {
  double k = 1.345;
};
struct QuantileLoss {
  double alpha = 0.5;
};

struct LossSpec {
  std::variant<QuadraticLoss, HuberLoss, QuantileLoss> kind;

  static LossSpec quadratic() { return {QuadraticLoss{}}; }
  static LossSpec huber(double k);
  static LossSpec quantile(double alpha);
  std::string name() const;
};

enum class StepRule { fixed_lipschitz, backtracking };

/// mu_k = 0.1 * 2^-k, k = 0, 1, ..., down to 1e-8.
std::vector<double> default_smoothing_schedule();

struct SolverOptions {
  int max_iterations = 50000;
  double kkt_tolerance = 1e-8;
  StepRule step_rule = StepRule::fixed_lipschitz;
  /// FISTA with function-value restart; false gives ISTA.
  bool accelerate = true;
  bool record_trace = true;
  std::vector<double> smoothing_schedule = default_smoothing_schedule();
  /// Stage tolerance for all but the last smoothing stage.
  double intermediate_tolerance = 1e-6;

  void validate() const;
};

struct SolveResult {
  Vector solution;
  int iterations = 0;
  double kkt_residual = 0.0;
  std::vector<double> objective_trace;
  /// Quantile loss: the solution reached at each smoothing level.
  std::vector<Vector> stage_solutions;
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, SolveResult last)
      : std::runtime_error(what), last_(std::move(last)) {}
  const SolveResult& last() const noexcept { return last_; }

 private:
  SolveResult last_;
};

/// Data (C_tilde, W, lambda, beta0) of V(u) = u'C u / 2 - u'W + J'_lambda(beta0; u).
struct LimitProblem {
  CovarianceMatrix c_tilde;
  Vector w;
  LambdaVector lambda;
  Vector beta0;

  void validate() const;
};

SolveResult solve_slope_ls(const Matrix& x, const Vector& y, const LambdaVector& lambda,
                           const SolverOptions& opts = {});
SolveResult solve_slope_huber(const Matrix& x, const Vector& y, const LambdaVector& lambda, double k,
                              const SolverOptions& opts = {});
SolveResult solve_slope_quantile(const Matrix& x, const Vector& y, const LambdaVector& lambda, double alpha,
                                 const SolverOptions& opts = {});
SolveResult solve_slope(const Matrix& x, const Vector& y, const LambdaVector& lambda, const LossSpec& loss,
                        const SolverOptions& opts = {});
SolveResult solve_limit_problem(const LimitProblem& problem, const SolverOptions& opts = {});

/// Huber function and its derivative, H(x) = x^2/2 on |x| <= k.
double huber(double x, double k);
double huber_derivative(double x, double k);
/// Check loss |x|_alpha.
double check_loss(double x, double alpha);
/// Moreau envelope of the check loss at parameter mu, and its derivative.
double smoothed_check_loss(double x, double alpha, double mu);
double smoothed_check_derivative(double x, double alpha, double mu);

/// Data term sum_i h(y_i - x_i'beta) and its gradient for the Huber and
/// smoothed check losses.
double huber_objective(const Matrix& x, const Vector& y, const Vector& beta, double k);
Vector huber_gradient(const Matrix& x, const Vector& y, const Vector& beta, double k);
double smoothed_quantile_objective(const Matrix& x, const Vector& y, const Vector& beta, double alpha, double mu);
Vector smoothed_quantile_gradient(const Matrix& x, const Vector& y, const Vector& beta, double alpha, double mu);

/// C_Delta = delta * C and C_tilde = curvature * C in the limit.
struct LossConstants {
  double delta = 0.0;
  double curvature = 0.0;
};

LossConstants loss_constants(const LossSpec& loss, const NoiseSpec& noise);

/// Largest eigenvalue of a symmetric positive semidefinite matrix.
double lipschitz_constant(const Matrix& gram);

}  // namespace slope

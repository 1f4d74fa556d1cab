#include "slope/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <optional>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "slope/geometry.hpp"
#include "slope/prox.hpp"

namespace slope {

LossSpec LossSpec::huber(double k) {
  if (!(k > 0.0) || !std::isfinite(k)) throw std::invalid_argument("huber k must be positive");
  return {HuberLoss{k}};
}

LossSpec LossSpec::quantile(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0,1)");
  return {QuantileLoss{alpha}};
}

std::string LossSpec::name() const {
  if (std::holds_alternative<QuadraticLoss>(kind)) return "quadratic";
  if (std::holds_alternative<HuberLoss>(kind)) return "huber";
  return "quantile";
}

std::vector<double> default_smoothing_schedule() {
  std::vector<double> out;
  for (double mu = 0.1; mu >= 1e-8; mu *= 0.5) out.push_back(mu);
  return out;
}

void SolverOptions::validate() const {
  if (max_iterations <= 0) throw std::invalid_argument("max_iterations must be positive");
  if (!(kkt_tolerance > 0.0)) throw std::invalid_argument("kkt_tolerance must be positive");
  if (!(intermediate_tolerance > 0.0)) throw std::invalid_argument("intermediate_tolerance must be positive");
  if (smoothing_schedule.empty()) throw std::invalid_argument("smoothing_schedule must be nonempty");
  for (std::size_t i = 0; i < smoothing_schedule.size(); ++i) {
    if (!(smoothing_schedule[i] > 0.0)) throw std::invalid_argument("smoothing_schedule entries must be positive");
    if (i > 0 && smoothing_schedule[i] >= smoothing_schedule[i - 1])
      throw std::invalid_argument("smoothing_schedule must be decreasing");
  }
}

void LimitProblem::validate() const {
  const std::size_t p = lambda.size();
  require_same_size(p, c_tilde.size(), "limit problem C_tilde");
  require_same_size(p, static_cast<std::size_t>(w.size()), "limit problem W");
  require_same_size(p, static_cast<std::size_t>(beta0.size()), "limit problem beta0");
}

double lipschitz_constant(const Matrix& gram) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  return std::max(eig.eigenvalues().maxCoeff(), 0.0);
}

// ---------------------------------------------------------------------------
// Scalar losses

double huber(double x, double k) {
  const double a = std::abs(x);
  return a <= k ? 0.5 * x * x : k * a - 0.5 * k * k;
}

double huber_derivative(double x, double k) { return std::clamp(x, -k, k); }

double check_loss(double x, double alpha) { return x > 0.0 ? alpha * x : (alpha - 1.0) * x; }

double smoothed_check_loss(double x, double alpha, double mu) {
  if (x > alpha * mu) return alpha * x - 0.5 * alpha * alpha * mu;
  if (x < -(1.0 - alpha) * mu) return -(1.0 - alpha) * x - 0.5 * (1.0 - alpha) * (1.0 - alpha) * mu;
  return 0.5 * x * x / mu;
}

double smoothed_check_derivative(double x, double alpha, double mu) {
  return std::clamp(x / mu, alpha - 1.0, alpha);
}

double huber_objective(const Matrix& x, const Vector& y, const Vector& beta, double k) {
  const Vector r = y - x * beta;
  return r.unaryExpr([k](double v) { return huber(v, k); }).sum();
}

Vector huber_gradient(const Matrix& x, const Vector& y, const Vector& beta, double k) {
  const Vector r = y - x * beta;
  return -(x.transpose() * r.unaryExpr([k](double v) { return huber_derivative(v, k); }));
}

double smoothed_quantile_objective(const Matrix& x, const Vector& y, const Vector& beta, double alpha, double mu) {
  const Vector r = y - x * beta;
  return r.unaryExpr([=](double v) { return smoothed_check_loss(v, alpha, mu); }).sum();
}

Vector smoothed_quantile_gradient(const Matrix& x, const Vector& y, const Vector& beta, double alpha, double mu) {
  const Vector r = y - x * beta;
  return -(x.transpose() * r.unaryExpr([=](double v) { return smoothed_check_derivative(v, alpha, mu); }));
}

// ---------------------------------------------------------------------------
// Proximal gradient engine

namespace {

struct Composite {
  // Smooth value; writes the gradient when the pointer is non-null.
  std::function<double(const Vector&, Vector*)> smooth;
  std::function<double(const Vector&)> penalty;
  // prox of step * penalty.
  std::function<Vector(const Vector&, double)> prox;
};

struct EngineSettings {
  double lipschitz = 1.0;
  // Step used in the fixed-point residual; 0 means the current step.
  double kkt_lipschitz = 0.0;
  double tolerance = 1e-8;
};

SolveResult run_proximal_gradient(const Composite& problem, const Vector& start, const EngineSettings& settings,
                                  const SolverOptions& opts, SolveResult result = {}) {
  double lip = settings.lipschitz > 0.0 ? settings.lipschitz : 1.0;
  const bool backtrack = opts.step_rule == StepRule::backtracking;

  Vector x = start;
  Vector gx;
  double fx = problem.smooth(x, &gx);
  double big_fx = fx + problem.penalty(x);
  Vector y = x;
  Vector gy = gx;
  double fy = fx;
  double t = 1.0;

  const auto residual_at = [&](const Vector& z, const Vector& gz) {
    const double l = settings.kkt_lipschitz > 0.0 ? settings.kkt_lipschitz : lip;
    return (z - problem.prox(z - gz / l, 1.0 / l)).norm() / (1.0 + z.norm());
  };

  // Proximal step from `from`; updates lip under backtracking.
  const auto step_from = [&](const Vector& from, const Vector& g, double f_from, Vector& z, Vector& gz) {
    while (true) {
      z = problem.prox(from - g / lip, 1.0 / lip);
      const double fz = problem.smooth(z, &gz);
      if (!backtrack) return fz;
      const Vector d = z - from;
      const double model = f_from + g.dot(d) + 0.5 * lip * d.squaredNorm();
      if (fz <= model + 1e-12 * std::max(1.0, std::abs(f_from))) return fz;
      lip *= 2.0;
    }
  };

  double residual = residual_at(x, gx);
  if (opts.record_trace) result.objective_trace.push_back(big_fx);
  int it = 0;
  while (residual > settings.tolerance && it < opts.max_iterations) {
    ++it;
    Vector z;
    Vector gz;
    double fz = step_from(y, gy, fy, z, gz);
    double big_fz = fz + problem.penalty(z);
    if (opts.accelerate && big_fz > big_fx) {
      t = 1.0;
      fz = step_from(x, gx, fx, z, gz);
      big_fz = fz + problem.penalty(z);
    }
    if (opts.accelerate) {
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      y = z + ((t - 1.0) / t_next) * (z - x);
      t = t_next;
    } else {
      y = z;
    }
    x = std::move(z);
    gx = std::move(gz);
    fx = fz;
    big_fx = big_fz;
    if (opts.accelerate) {
      fy = problem.smooth(y, &gy);
    } else {
      gy = gx;
      fy = fx;
    }
    if (opts.record_trace) result.objective_trace.push_back(big_fx);
    residual = residual_at(x, gx);
    if (backtrack) lip *= 0.9;
  }
  result.iterations += it;
  result.kkt_residual = residual;
  result.solution = x;
  if (residual > settings.tolerance) {
    throw ConvergenceError("solver did not converge within " + std::to_string(opts.max_iterations) +
                               " iterations (kkt residual " + std::to_string(residual) + ")",
                           std::move(result));
  }
  return result;
}

Composite slope_penalty(const LambdaVector& lambda) {
  Composite c;
  c.penalty = [lambda](const Vector& b) { return slope_norm(lambda, b); };
  c.prox = [lambda](const Vector& v, double step) { return prox_slope(lambda.scaled(step), v); };
  return c;
}

void check_design(const Matrix& x, const Vector& y, const LambdaVector& lambda) {
  if (x.rows() < 1) throw std::invalid_argument("design must have at least one row");
  require_same_size(static_cast<std::size_t>(x.rows()), static_cast<std::size_t>(y.size()), "design rows vs y");
  require_same_size(static_cast<std::size_t>(x.cols()), lambda.size(), "design columns vs lambda");
}

}  // namespace

SolveResult solve_slope_ls(const Matrix& x, const Vector& y, const LambdaVector& lambda, const SolverOptions& opts) {
  check_design(x, y, lambda);
  opts.validate();
  const Matrix gram = x.transpose() * x;
  const Vector xty = x.transpose() * y;
  const double yy = 0.5 * y.squaredNorm();
  Composite c = slope_penalty(lambda);
  c.smooth = [&](const Vector& b, Vector* g) {
    const Vector gb = gram * b;
    if (g) *g = gb - xty;
    return 0.5 * b.dot(gb) - b.dot(xty) + yy;
  };
  EngineSettings s;
  s.lipschitz = lipschitz_constant(gram);
  s.tolerance = opts.kkt_tolerance;
  return run_proximal_gradient(c, Vector::Zero(x.cols()), s, opts);
}

SolveResult solve_slope_huber(const Matrix& x, const Vector& y, const LambdaVector& lambda, double k,
                              const SolverOptions& opts) {
  check_design(x, y, lambda);
  opts.validate();
  if (!(k > 0.0)) throw std::invalid_argument("huber k must be positive");
  Composite c = slope_penalty(lambda);
  c.smooth = [&](const Vector& b, Vector* g) {
    const Vector r = y - x * b;
    if (g) *g = -(x.transpose() * r.unaryExpr([k](double v) { return huber_derivative(v, k); }));
    return r.unaryExpr([k](double v) { return huber(v, k); }).sum();
  };
  EngineSettings s;
  s.lipschitz = lipschitz_constant(x.transpose() * x);
  s.tolerance = opts.kkt_tolerance;
  return run_proximal_gradient(c, Vector::Zero(x.cols()), s, opts);
}

namespace {

// Exact finish for the check loss. Near the optimum the smoothed solution
// keeps the pattern of beta and the set A of residuals inside the smoothing
// band; within that regime the objective is linear in the cluster values
// outside A, and the smoothed solution is affine in mu with the nonsmooth
// solution as its mu -> 0 limit. Starting from a smoothed solution, the
// finish walks along the regime's descent directions (an active-set step)
// until |A| matches the number of clusters, then solves the square system
// and accepts the point only after a full KKT check.
struct QuantileFinish {
  Vector solution;
  Vector slope;  // the smoothed solution at level mu' is solution + mu' * slope
  Vector subgradient;
  double kkt_residual = 0.0;
};

struct PatternBasis {
  SlopePattern patt;
  Matrix u;         // column j is S 1_{I_j}, clusters in rank order
  Vector block_sums;  // U' S Pi lambda
  Vector magnitudes;  // cluster values, increasing
};

/// Basis of the cone of `patt`; `values` supplies the cluster magnitudes.
PatternBasis pattern_basis(const SlopePattern& patt, const Vector& values, const LambdaVector& lambda) {
  PatternBasis out;
  out.patt = patt;
  const ClusterPartition part = clusters(out.patt);
  const Vector signs = sign_diagonal(out.patt);
  const auto m = static_cast<Eigen::Index>(part.cluster_count());
  out.u = Matrix::Zero(values.size(), m);
  out.magnitudes = Vector::Zero(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto& cluster = part.nonzero_clusters[static_cast<std::size_t>(j)];
    double total = 0.0;
    for (std::size_t i : cluster) {
      out.u(static_cast<Eigen::Index>(i), j) = signs[static_cast<Eigen::Index>(i)];
      total += std::abs(values[static_cast<Eigen::Index>(i)]);
    }
    out.magnitudes[j] = total / static_cast<double>(cluster.size());
  }
  Vector lambda_p(values.size());
  const std::vector<std::size_t> order = sorting_order(out.patt);
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(order[k]);
    lambda_p[i] = signs[i] * lambda[k];
  }
  out.block_sums = out.u.transpose() * lambda_p;
  return out;
}

PatternBasis pattern_basis(const Vector& beta, const LambdaVector& lambda) {
  return pattern_basis(pattern(beta), beta, lambda);
}

std::optional<QuantileFinish> finish_quantile(const Matrix& x, const Vector& y, const LambdaVector& lambda,
                                              double alpha, double mu, Vector beta, double l0) {
  const Eigen::Index n = x.rows();
  const double lo = alpha - 1.0;
  // Row states: in the zero-residual set A, or outside with a fixed check-loss slope.
  std::vector<bool> in_set(static_cast<std::size_t>(n), false);
  std::vector<double> forced(static_cast<std::size_t>(n), 0.0);
  {
    const Vector r = y - x * beta;
    for (Eigen::Index i = 0; i < n; ++i) in_set[static_cast<std::size_t>(i)] = r[i] > lo * mu && r[i] < alpha * mu;
  }
  const double zero_residual = 1e-12 * (1.0 + y.cwiseAbs().maxCoeff());
  const int max_steps = 4 * static_cast<int>(x.cols()) + 20;

  for (int step = 0; step < max_steps; ++step) {
    const PatternBasis basis = pattern_basis(beta, lambda);
    const Eigen::Index m = basis.u.cols();
    const Vector r = y - x * beta;
    std::vector<Eigen::Index> rows;
    Vector g = Vector::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      if (in_set[ui]) {
        rows.push_back(i);
      } else if (forced[ui] != 0.0 && std::abs(r[i]) <= zero_residual) {
        g[i] = forced[ui];
      } else {
        forced[ui] = 0.0;
        g[i] = r[i] > 0.0 ? alpha : lo;
      }
    }
    const auto a = static_cast<Eigen::Index>(rows.size());
    if (a > m) return std::nullopt;
    Matrix xa(a, x.cols());
    Vector ya(a);
    for (Eigen::Index k = 0; k < a; ++k) {
      xa.row(k) = x.row(rows[static_cast<std::size_t>(k)]);
      ya[k] = y[rows[static_cast<std::size_t>(k)]];
    }
    const Matrix mat = xa * basis.u;
    // Gradient, in cluster coordinates, of the objective on this regime.
    const Vector h = basis.block_sums - basis.u.transpose() * (x.transpose() * g);

    Vector direction;
    if (a == m) {
      Vector psi = Vector::Zero(m);
      Vector coef = Vector::Zero(m);
      Eigen::FullPivLU<Matrix> lu(mat);
      if (m > 0) {
        if (!lu.isInvertible()) return std::nullopt;
        psi = lu.transpose().solve(h);
        coef = lu.solve(ya);
      }
      // A multiplier outside [alpha - 1, alpha] means that row should leave A.
      Eigen::Index worst = -1;
      double worst_excess = 1e-12;
      for (Eigen::Index k = 0; k < m; ++k) {
        const double excess = std::max(psi[k] - alpha, lo - psi[k]);
        if (excess > worst_excess) {
          worst_excess = excess;
          worst = k;
        }
      }
      if (worst >= 0) {
        const auto row = static_cast<std::size_t>(rows[static_cast<std::size_t>(worst)]);
        in_set[row] = false;
        forced[row] = psi[worst] > alpha ? alpha : lo;
        continue;
      }
      const Vector target = basis.u * coef;
      if (pattern(target) == basis.patt) {
        QuantileFinish out;
        out.solution = target;
        out.slope = m > 0 ? Vector(-(basis.u * lu.solve(psi))) : Vector::Zero(x.cols());
        for (Eigen::Index k = 0; k < m; ++k) g[rows[static_cast<std::size_t>(k)]] = std::clamp(psi[k], lo, alpha);
        out.subgradient = g;
        const Vector rr = y - x * target;
        for (Eigen::Index i = 0; i < n; ++i) {
          if (in_set[static_cast<std::size_t>(i)]) continue;
          if ((g[i] == alpha && rr[i] < -zero_residual) || (g[i] == lo && rr[i] > zero_residual)) return std::nullopt;
        }
        const Vector grad = x.transpose() * g;
        if (!subdiff_membership(SubdifferentialSpec(lambda, basis.patt), grad)) return std::nullopt;
        out.kkt_residual =
            (target - prox_slope(lambda.scaled(1.0 / l0), target + grad / l0)).norm() / (1.0 + target.norm());
        return out;
      }
      direction = coef - basis.magnitudes;  // the square solve left the regime; walk toward it
    } else {
      // Steepest descent within the null space of the zero-residual rows.
      direction = -h;
      if (a > 0) direction -= mat.completeOrthogonalDecomposition().solve(mat * direction);
      if (direction.norm() <= 1e-12 * (1.0 + h.norm())) return std::nullopt;
    }

    // Largest step keeping the regime, capped at 1 when walking toward a target.
    const Vector beta_dir = basis.u * direction;
    const Vector r_dir = x * beta_dir;
    double t = a == m ? 1.0 : std::numeric_limits<double>::infinity();
    int hit_row = -1;
    int hit_cluster = -1;  // cluster reaching zero, or the lower of two merging clusters
    bool hit_zero = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (in_set[static_cast<std::size_t>(i)] || r_dir[i] == 0.0) continue;
      const double ri = std::abs(r[i]) <= zero_residual ? 0.0 : r[i];
      if (ri == 0.0) {
        // Must leave zero on the side of its slope, or the step is blocked.
        if ((g[i] == alpha && r_dir[i] > 0.0) || (g[i] == lo && r_dir[i] < 0.0)) {
          t = 0.0;
          hit_row = static_cast<int>(i);
        }
        continue;
      }
      const double ti = ri / r_dir[i];
      if (ti > 0.0 && ti < t) {
        t = ti;
        hit_row = static_cast<int>(i);
      }
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      if (direction[j] < 0.0) {
        const double tj = -basis.magnitudes[j] / direction[j];
        if (tj < t) {
          t = tj;
          hit_row = -1;
          hit_cluster = static_cast<int>(j);
          hit_zero = true;
        }
      }
      if (j + 1 < m && direction[j] > direction[j + 1]) {
        const double tj = (basis.magnitudes[j + 1] - basis.magnitudes[j]) / (direction[j] - direction[j + 1]);
        if (tj < t) {
          t = tj;
          hit_row = -1;
          hit_cluster = static_cast<int>(j);
          hit_zero = false;
        }
      }
    }
    if (!std::isfinite(t)) return std::nullopt;
    Vector magnitudes = basis.magnitudes + t * direction;
    if (hit_cluster >= 0) {
      if (hit_zero) {
        magnitudes[hit_cluster] = 0.0;
      } else {
        const double joint = 0.5 * (magnitudes[hit_cluster] + magnitudes[hit_cluster + 1]);
        magnitudes[hit_cluster] = joint;
        magnitudes[hit_cluster + 1] = joint;
      }
    }
    beta = basis.u * magnitudes;
    if (hit_row >= 0) {
      in_set[static_cast<std::size_t>(hit_row)] = true;
      forced[static_cast<std::size_t>(hit_row)] = 0.0;
    }
  }
  return std::nullopt;
}

// True when solution + mu * slope solves the smoothed problem at level mu:
// same pattern, and rows outside A stay outside the smoothing band.
bool regime_holds(const Matrix& x, const Vector& y, double alpha, double mu, const QuantileFinish& finish) {
  const Vector b = finish.solution + mu * finish.slope;
  if (pattern(b) != pattern(finish.solution)) return false;
  const Vector r = y - x * b;
  const Vector r0 = y - x * finish.solution;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    const double g = finish.subgradient[i];
    if (g == alpha && r0[i] > 0.0 && r[i] < alpha * mu) return false;
    if (g == alpha - 1.0 && r0[i] < 0.0 && r[i] > (alpha - 1.0) * mu) return false;
    if (g > alpha - 1.0 && g < alpha && std::abs(r[i] - mu * g) > 1e-9 * (1.0 + std::abs(y[i]))) return false;
  }
  return true;
}

}  // namespace

SolveResult solve_slope_quantile(const Matrix& x, const Vector& y, const LambdaVector& lambda, double alpha,
                                 const SolverOptions& opts) {
  check_design(x, y, lambda);
  opts.validate();
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0,1)");
  const double l0 = lipschitz_constant(x.transpose() * x);
  Composite c = slope_penalty(lambda);
  SolveResult result;
  Vector beta = Vector::Zero(x.cols());
  const auto& schedule = opts.smoothing_schedule;
  std::optional<QuantileFinish> finish;
  for (std::size_t stage = 0; stage < schedule.size(); ++stage) {
    const double mu = schedule[stage];
    if (finish && regime_holds(x, y, alpha, mu, *finish)) {
      result.stage_solutions.push_back(finish->solution + mu * finish->slope);
      continue;
    }
    c.smooth = [&, mu](const Vector& b, Vector* g) {
      const Vector r = y - x * b;
      if (g) *g = -(x.transpose() * r.unaryExpr([=](double v) { return smoothed_check_derivative(v, alpha, mu); }));
      return r.unaryExpr([=](double v) { return smoothed_check_loss(v, alpha, mu); }).sum();
    };
    EngineSettings s;
    s.lipschitz = l0 / mu;
    s.kkt_lipschitz = l0;
    s.tolerance = stage + 1 == schedule.size() ? opts.kkt_tolerance : opts.intermediate_tolerance;
    std::vector<Vector> stages = std::move(result.stage_solutions);
    result.stage_solutions.clear();
    try {
      result = run_proximal_gradient(c, beta, s, opts, std::move(result));
    } catch (const ConvergenceError& e) {
      SolveResult last = e.last();
      last.stage_solutions = std::move(stages);
      throw ConvergenceError(std::string(e.what()) + " at smoothing level " + std::to_string(mu), std::move(last));
    }
    stages.push_back(result.solution);
    result.stage_solutions = std::move(stages);
    beta = result.solution;
    if (!finish) {
      finish = finish_quantile(x, y, lambda, alpha, mu, beta, l0);
      if (finish && finish->kkt_residual > opts.kkt_tolerance) finish.reset();
    }
  }
  if (finish) {
    result.solution = finish->solution;
    result.kkt_residual = finish->kkt_residual;
  }
  return result;
}

SolveResult solve_slope(const Matrix& x, const Vector& y, const LambdaVector& lambda, const LossSpec& loss,
                        const SolverOptions& opts) {
  return std::visit(
      [&](const auto& kind) -> SolveResult {
        using T = std::decay_t<decltype(kind)>;
        if constexpr (std::is_same_v<T, QuadraticLoss>) {
          return solve_slope_ls(x, y, lambda, opts);
        } else if constexpr (std::is_same_v<T, HuberLoss>) {
          return solve_slope_huber(x, y, lambda, kind.k, opts);
        } else {
          return solve_slope_quantile(x, y, lambda, kind.alpha, opts);
        }
      },
      loss.kind);
}

SolveResult solve_limit_problem(const LimitProblem& problem, const SolverOptions& opts) {
  problem.validate();
  opts.validate();
  const Matrix& c_tilde = problem.c_tilde.matrix();
  const Vector& w = problem.w;
  const LambdaVector& lambda = problem.lambda;
  const Vector& beta0 = problem.beta0;
  Composite c;
  c.smooth = [&](const Vector& u, Vector* g) {
    const Vector cu = c_tilde * u;
    if (g) *g = cu - w;
    return 0.5 * u.dot(cu) - u.dot(w);
  };
  c.penalty = [&](const Vector& u) { return directional_derivative(lambda, beta0, u); };
  c.prox = [&](const Vector& v, double step) { return prox_directional(lambda.scaled(step), beta0, v); };
  EngineSettings s;
  s.lipschitz = lipschitz_constant(c_tilde);
  s.tolerance = opts.kkt_tolerance;
  SolveResult result = run_proximal_gradient(c, Vector::Zero(w.size()), s, opts);

  // Exact minimizer on the cone of the limiting pattern found by the iteration.
  const SlopePattern limit = limiting_pattern(beta0, result.solution);
  const PatternBasis basis = pattern_basis(limit, result.solution, lambda);
  if (basis.u.cols() == 0) return result;
  const Matrix reduced = basis.u.transpose() * c_tilde * basis.u;
  const Vector coef = reduced.ldlt().solve(basis.u.transpose() * w - basis.block_sums);
  const Vector polished = basis.u * coef;
  if (limiting_pattern(beta0, polished) != limit) return result;
  Vector grad;
  const double before = c.smooth(result.solution, nullptr) + c.penalty(result.solution);
  const double after = c.smooth(polished, &grad) + c.penalty(polished);
  if (after > before + 1e-12 * (1.0 + std::abs(before))) return result;
  const double lip = s.lipschitz;
  const double residual = (polished - c.prox(polished - grad / lip, 1.0 / lip)).norm() / (1.0 + polished.norm());
  if (residual > result.kkt_residual) return result;
  result.solution = polished;
  result.kkt_residual = residual;
  return result;
}

// ---------------------------------------------------------------------------
// Limit constants

namespace {

double integrate(const std::function<double(double)>& f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 20, 1e-12);
}

}  // namespace

LossConstants loss_constants(const LossSpec& loss, const NoiseSpec& noise) {
  noise.validate();
  return std::visit(
      [&](const auto& kind) -> LossConstants {
        using T = std::decay_t<decltype(kind)>;
        if constexpr (std::is_same_v<T, QuadraticLoss>) {
          if (noise.shift != 0.0) throw std::invalid_argument("quadratic loss requires centered noise");
          return {noise.variance(), 1.0};
        } else if constexpr (std::is_same_v<T, HuberLoss>) {
          if (noise.shift != 0.0) throw std::invalid_argument("huber loss requires centered noise");
          const double k = kind.k;
          if (noise.kind == NoiseSpec::Kind::gaussian) {
            const double c = k / noise.scale;
            const double phi = std::exp(-0.5 * c * c) / std::sqrt(2.0 * M_PI);
            const double inside = 2.0 * normal_cdf(c) - 1.0;
            const double tails = 2.0 * normal_cdf(-c);
            return {noise.scale * noise.scale * (inside - 2.0 * c * phi) + k * k * tails, inside};
          }
          const double inside = noise.cdf(k) - noise.cdf(-k);
          const double second = integrate([&](double v) { return v * v * noise.pdf(v); }, -k, k);
          return {second + k * k * (1.0 - inside), inside};
        } else {
          const double alpha = kind.alpha;
          if (std::abs(noise.cdf(0.0) - alpha) > 1e-8)
            throw std::invalid_argument("quantile loss requires noise with alpha-quantile at 0");
          return {(1.0 - alpha) * (1.0 - alpha) + alpha * alpha, noise.pdf(0.0)};
        }
      },
      loss.kind);
}

}  // namespace slope

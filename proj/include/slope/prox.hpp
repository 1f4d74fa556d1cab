#pragma once

#include <optional>

#include "slope/core.hpp"

namespace slope {

/// Input to `prox`: argmin_u 0.5||u - y||^2 + step * penalty(u), where the
/// penalty is J_lambda, or J'_lambda(anchor; .) when an anchor is present.
struct ProxRequest {
  LambdaVector lambda;
  std::optional<Vector> anchor;
  Vector input;
  double step = 1.0;
};

/// Projection onto {x : x_1 >= ... >= x_p} by pool-adjacent-violators.
Vector isotonic_projection(const Vector& z);

Vector prox_slope(const LambdaVector& lambda, const Vector& y);

/// Prox of u -> J'_lambda(beta0; u).
Vector prox_directional(const LambdaVector& lambda, const Vector& beta0, const Vector& y);

Vector prox(const ProxRequest& request);

}  // namespace slope

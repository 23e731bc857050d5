#pragma once

#include <cmath>

#include "jointfair/core.hpp"
#include "jointfair/penalty.hpp"

namespace jointfair {

// Projection onto the unit L-infinity ball: coordinatewise clamp to [-1, 1].
inline Vector project_linf(Vector v) {
  return v.cwiseMax(-1.0).cwiseMin(1.0);
}

// Nesterov smooth approximation of ||D beta||_1 with parameter mu:
//   f_mu(beta) = sup { a^T D beta - (mu/2)||a||_2^2 : ||a||_inf <= 1 }.
// The sup decouples per row, giving the Huber form used for values; the
// argmax is the clamped scaled image, giving the gradient D^T clamp(D beta / mu).
struct SmoothingContext {
  const PenaltyOperator* op = nullptr;
  double mu = 0.0;

  Eigen::Index rows() const { return op->rows(); }
  // Worst-case approximation gap: 0 <= ||D beta||_1 - f_mu(beta) <= mu*m/2.
  double gap_bound() const { return mu * static_cast<double>(rows()) / 2.0; }
};

inline double smooth_value(const SmoothingContext& ctx, const Vector& beta) {
  if (ctx.rows() == 0) return 0.0;
  const Vector d = ctx.op->apply(beta);
  const double mu = ctx.mu;
  double total = 0.0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const double a = std::abs(d[i]);
    total += a <= mu ? a * a / (2.0 * mu) : a - mu / 2.0;
  }
  return total;
}

inline Vector smooth_gradient(const SmoothingContext& ctx, const Vector& beta) {
  if (ctx.rows() == 0) return Vector::Zero(beta.size());
  const Vector alpha = project_linf(ctx.op->apply(beta) / ctx.mu);
  return ctx.op->apply_adjoint(alpha);
}

}  // namespace jointfair

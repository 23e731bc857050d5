#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "jointfair/core.hpp"
#include "jointfair/data.hpp"
#include "jointfair/error.hpp"
#include "jointfair/penalty.hpp"
#include "jointfair/smoothing.hpp"

namespace jointfair {

struct SolverConfig {
  double lambda_f = 0.0;
  double lambda_sim = 0.0;
  std::vector<double> lambda_sp;  // one entry per group
  double mu = 0.0;                // <= 0 selects the default 1e-4 / m
  double epsilon = 1e-6;          // L2 norm of the iterate change
  int max_iter = 10000;
  bool tight_lipschitz = false;   // scale each group's curvature term by its loss weight
  bool adaptive_restart = false;  // plain momentum by default

  void validate() const {
    if (lambda_f < 0.0 || lambda_sim < 0.0) throw ValidationError("negative penalty weight");
    for (double v : lambda_sp) {
      if (v < 0.0) throw ValidationError("negative sparsity weight");
    }
    if (epsilon <= 0.0) throw ValidationError("epsilon must be positive");
    if (max_iter < 1) throw ValidationError("max_iter must be positive");
  }
};

// Smoothing default keeps the penalty approximation gap at or below 5e-5.
inline double effective_mu(double requested, Eigen::Index penalty_rows) {
  if (requested > 0.0) return requested;
  if (penalty_rows == 0) return 1.0;  // unused: no rows to smooth
  return 1e-4 / static_cast<double>(penalty_rows);
}

struct Convergence {
  int iterations = 0;
  double final_change = 0.0;
  double objective_exact = 0.0;
  double objective_smoothed = 0.0;
  bool converged = false;
};

struct SolverState {
  Vector beta;   // current iterate
  Vector gamma;  // momentum point
  double s = 1.0;
  int t = 0;
  double lipschitz = 0.0;
};

// The standardized, intercept-augmented problem the solver iterates on.
// Block k spans coordinates [k*(p+1), (k+1)*(p+1)); coordinate 0 of a block
// is the group intercept. `threshold` holds the per-coordinate L1 weight
// (zero on intercepts), and `loss_weights` holds the per-group likelihood
// weights (1/n_k for the joint objective, 1 for pooled unweighted fits).
struct JointProblem {
  std::vector<Matrix> X;  // per group, with a leading ones column
  std::vector<Vector> y;
  Vector loss_weights;
  PenaltyOperator op;
  Vector threshold;

  Eigen::Index dim() const { return threshold.size(); }
  int num_groups() const { return static_cast<int>(X.size()); }
  Eigen::Index block_size() const { return X.empty() ? 0 : X.front().cols(); }

  // Builds the augmented problem from an already-standardized design.
  static JointProblem from_design(const GroupedDesign& design, PenaltyOperator op,
                                  const std::vector<double>& lambda_sp) {
    design.validate();
    const int K = design.num_groups();
    if (static_cast<int>(lambda_sp.size()) != K) {
      throw ValidationError("lambda_sp has " + std::to_string(lambda_sp.size()) +
                            " entries, expected one per group (" + std::to_string(K) + ")");
    }
    const Eigen::Index p = design.num_features();
    const Eigen::Index q = p + 1;
    if (op.cols() != 0 && op.cols() != q * K) {
      throw ValidationError("penalty operator column count does not match the augmented design");
    }

    JointProblem prob;
    prob.loss_weights.resize(K);
    prob.threshold.setZero(q * K);
    for (int k = 0; k < K; ++k) {
      const auto& g = design.groups[static_cast<std::size_t>(k)];
      Matrix xa(g.X.rows(), q);
      xa.col(0).setOnes();
      xa.rightCols(p) = g.X;
      prob.X.push_back(std::move(xa));
      prob.y.push_back(g.y);
      prob.loss_weights[k] = 1.0 / static_cast<double>(g.X.rows());
      prob.threshold.segment(q * k + 1, p).setConstant(lambda_sp[static_cast<std::size_t>(k)]);
    }
    if (op.cols() == 0) op = PenaltyOperator::zero(q * K);
    prob.op = std::move(op);
    return prob;
  }
};

// Proximal operator of the weighted L1 norm.
inline Vector soft_threshold(const Vector& v, const Vector& t) {
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    if (t[i] < 0.0) throw ValidationError("negative soft-threshold");
  }
  return v.array().sign() * (v.array().abs() - t.array()).max(0.0);
}

inline Vector soft_threshold(const Vector& v, double t) {
  if (t < 0.0) throw ValidationError("negative soft-threshold");
  return v.array().sign() * (v.array().abs() - t).max(0.0);
}

// Weighted negative log-likelihood of the grouped logistic model and its
// gradient: value = sum_k w_k sum_i [log(1+exp(x b_k)) - y x b_k],
// gradient block k = w_k X_k^T (sigmoid(X_k b_k) - y_k).
inline std::pair<double, Vector> weighted_loss_grad(const JointProblem& prob, const Vector& beta) {
  const Eigen::Index q = prob.block_size();
  double value = 0.0;
  Vector grad = Vector::Zero(prob.dim());
  for (int k = 0; k < prob.num_groups(); ++k) {
    const auto& x = prob.X[static_cast<std::size_t>(k)];
    const auto& y = prob.y[static_cast<std::size_t>(k)];
    const double w = prob.loss_weights[k];
    const Vector z = x * beta.segment(q * k, q);
    Vector residual(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      value += w * (log1p_exp(z[i]) - y[i] * z[i]);
      residual[i] = sigmoid(z[i]) - y[i];
    }
    grad.segment(q * k, q) = w * (x.transpose() * residual);
  }
  return {value, std::move(grad)};
}

// Step-size constant: quarter of the largest per-group Gram eigenvalue plus
// the smoothed-penalty curvature ||D||_2^2 / mu. The tight variant scales
// each group's term by its loss weight, matching the weighted likelihood.
inline double lipschitz_constant(const std::vector<Matrix>& xs, const PenaltyOperator& op,
                                 double mu, bool tight = false,
                                 const Vector* loss_weights = nullptr) {
  double max_gram = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    double lam = largest_eigenvalue_gram(xs[k]);
    if (tight && loss_weights != nullptr) lam *= (*loss_weights)[static_cast<Eigen::Index>(k)];
    max_gram = std::max(max_gram, lam);
  }
  double penalty_term = 0.0;
  if (op.rows() > 0 && op.spectral_norm > 0.0) {
    if (mu <= 0.0) throw ValidationError("mu must be positive with penalty rows present");
    penalty_term = op.spectral_norm * op.spectral_norm / mu;
  }
  return 0.25 * max_gram + penalty_term;
}

struct ObjectivePair {
  double exact = 0.0;     // loss + ||D beta||_1 + sum_k lambda_sp_k ||beta_k||_1
  double smoothed = 0.0;  // same with the stacked L1 term replaced by f_mu
};

inline ObjectivePair objective_value(const JointProblem& prob, double mu, const Vector& beta) {
  const double loss = weighted_loss_grad(prob, beta).first;
  const double sparsity = prob.threshold.dot(beta.cwiseAbs());
  double l1 = 0.0;
  double smooth = 0.0;
  if (prob.op.rows() > 0) {
    l1 = prob.op.apply(beta).cwiseAbs().sum();
    const SmoothingContext ctx{&prob.op, effective_mu(mu, prob.op.rows())};
    smooth = smooth_value(ctx, beta);
  }
  return {loss + l1 + sparsity, loss + smooth + sparsity};
}

// Max soft-threshold optimality residual of the smoothed objective at beta:
// active coordinates must cancel the subgradient, inactive ones must sit
// inside the threshold interval.
inline double kkt_residual(const JointProblem& prob, double mu, const Vector& beta) {
  Vector g = weighted_loss_grad(prob, beta).second;
  if (prob.op.rows() > 0) {
    const SmoothingContext ctx{&prob.op, effective_mu(mu, prob.op.rows())};
    g += smooth_gradient(ctx, beta);
  }
  double worst = 0.0;
  for (Eigen::Index i = 0; i < beta.size(); ++i) {
    const double t = prob.threshold[i];
    double r = 0.0;
    if (beta[i] != 0.0) {
      r = std::abs(g[i] + t * (beta[i] > 0.0 ? 1.0 : -1.0));
    } else {
      r = std::max(0.0, std::abs(g[i]) - t);
    }
    worst = std::max(worst, r);
  }
  return worst;
}

// Accelerated smoothing proximal gradient iteration: gradient step on the
// smooth part (weighted loss + f_mu) at the momentum point with step 1/L,
// proximal soft-threshold with per-coordinate lambda_sp/L, stop on iterate
// change, then momentum extrapolation with the s-sequence.
inline std::pair<Vector, Convergence> aspg_solve(const JointProblem& prob,
                                                 const SolverConfig& cfg) {
  cfg.validate();
  const double mu = effective_mu(cfg.mu, prob.op.rows());
  const SmoothingContext ctx{&prob.op, mu};

  SolverState st;
  st.beta = Vector::Zero(prob.dim());
  st.gamma = st.beta;
  st.s = 1.0;
  st.lipschitz = lipschitz_constant(prob.X, prob.op, mu, cfg.tight_lipschitz, &prob.loss_weights);
  const double L = std::max(st.lipschitz, 1e-12);

  Convergence conv;
  Vector grad(prob.dim());
  const Vector threshold_step = prob.threshold / L;
  for (st.t = 1; st.t <= cfg.max_iter; ++st.t) {
    grad = weighted_loss_grad(prob, st.gamma).second;
    if (prob.op.rows() > 0) grad += smooth_gradient(ctx, st.gamma);
    const Vector step = st.gamma - grad / L;
    Vector beta_next = soft_threshold(step, threshold_step);
    if (!beta_next.allFinite()) {
      throw NumericalError("non-finite iterate at iteration " + std::to_string(st.t));
    }
    const double change = (beta_next - st.beta).norm();
    conv.iterations = st.t;
    conv.final_change = change;
    if (change <= cfg.epsilon) {
      st.beta = std::move(beta_next);
      conv.converged = true;
      break;
    }
    double s_next = (1.0 + std::sqrt(1.0 + 4.0 * st.s * st.s)) / 2.0;
    if (cfg.adaptive_restart && (st.gamma - beta_next).dot(beta_next - st.beta) > 0.0) {
      s_next = 1.0;
      st.gamma = beta_next;
    } else {
      st.gamma = beta_next + ((st.s - 1.0) / s_next) * (beta_next - st.beta);
    }
    st.beta = std::move(beta_next);
    st.s = s_next;
  }

  const ObjectivePair obj = objective_value(prob, mu, st.beta);
  if (!std::isfinite(obj.exact) || !std::isfinite(obj.smoothed)) {
    throw NumericalError("non-finite objective at iteration " + std::to_string(conv.iterations));
  }
  conv.objective_exact = obj.exact;
  conv.objective_smoothed = obj.smoothed;
  return {std::move(st.beta), conv};
}

// Convenience overload: standardized design in, per-group 1/n_k loss weights.
inline std::pair<Vector, Convergence> aspg_solve(const GroupedDesign& std_design,
                                                 const PenaltyOperator& op,
                                                 const SolverConfig& cfg) {
  std::vector<double> sp = cfg.lambda_sp;
  if (sp.empty()) sp.assign(static_cast<std::size_t>(std_design.num_groups()), 0.0);
  if (sp.size() == 1 && std_design.num_groups() > 1) {
    sp.assign(static_cast<std::size_t>(std_design.num_groups()), sp.front());
  }
  return aspg_solve(JointProblem::from_design(std_design, op, sp), cfg);
}

}  // namespace jointfair

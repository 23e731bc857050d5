#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "jointfair/core.hpp"
#include "jointfair/data.hpp"
#include "jointfair/error.hpp"
#include "jointfair/penalty.hpp"
#include "jointfair/solver.hpp"

namespace jointfair {

enum class ModelKind { jfm, sfm, separate, ignorant };

inline const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::jfm: return "jfm";
    case ModelKind::sfm: return "sfm";
    case ModelKind::separate: return "separate";
    case ModelKind::ignorant: return "ignorant";
  }
  return "?";
}

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "jfm") return ModelKind::jfm;
  if (s == "sfm") return ModelKind::sfm;
  if (s == "separate") return ModelKind::separate;
  if (s == "ignorant") return ModelKind::ignorant;
  throw ValidationError("unknown model '" + s + "' (expected jfm|sfm|separate|ignorant)");
}

// Solver and convention overrides shared by all fits.
struct FitOptions {
  double mu = 0.0;       // <= 0 selects the solver default
  double epsilon = 1e-6;
  int max_iter = 10000;
  bool tight_lipschitz = false;
  // Sensitivity switch: when false the intercept column inside the fairness
  // rows is zeroed, so the penalty acts on E[X beta | y] without intercepts.
  bool fairness_includes_intercept = true;
  bool penalize_dummies = true;  // ignorant model's group indicators
};

// Fitted model. Coefficients and intercepts live on the standardized scale;
// raw_* accessors undo the transform for comparison against generating truth.
struct FitResult {
  std::string model_kind;
  std::vector<std::string> group_ids;
  std::vector<std::string> feature_names;
  std::vector<Vector> coefficients;  // per group, length p
  Vector intercepts;                 // per group
  std::vector<std::pair<std::string, double>> dummy_coefficients;  // ignorant only
  double lambda_f = 0.0;
  double lambda_sim = 0.0;
  std::vector<double> lambda_sp;
  StandardizationParams standardization;
  Convergence convergence;

  int num_groups() const { return static_cast<int>(group_ids.size()); }

  int require_group(std::string_view id) const {
    for (int k = 0; k < num_groups(); ++k) {
      if (group_ids[static_cast<std::size_t>(k)] == id) return k;
    }
    std::string known;
    for (const auto& g : group_ids) known += (known.empty() ? "" : ", ") + g;
    throw ValidationError("unknown group '" + std::string(id) + "' (known: " + known + ")");
  }

  Vector raw_coefficients(int k) const {
    return coefficients[static_cast<std::size_t>(k)].cwiseQuotient(standardization.scales);
  }

  double raw_intercept(int k) const {
    const Vector& b = coefficients[static_cast<std::size_t>(k)];
    return intercepts[k] -
           (b.cwiseProduct(standardization.means).cwiseQuotient(standardization.scales)).sum();
  }
};

namespace detail {

inline std::vector<double> expand_lambda_sp(std::vector<double> sp, int K) {
  if (sp.size() == 1 && K > 1) sp.assign(static_cast<std::size_t>(K), sp.front());
  if (static_cast<int>(sp.size()) != K) {
    throw ValidationError("lambda_sp needs 1 or " + std::to_string(K) + " values");
  }
  return sp;
}

inline SolverConfig solver_config(const FitOptions& opt, double lambda_f, double lambda_sim,
                                  std::vector<double> lambda_sp) {
  SolverConfig cfg;
  cfg.lambda_f = lambda_f;
  cfg.lambda_sim = lambda_sim;
  cfg.lambda_sp = std::move(lambda_sp);
  cfg.mu = opt.mu;
  cfg.epsilon = opt.epsilon;
  cfg.max_iter = opt.max_iter;
  cfg.tight_lipschitz = opt.tight_lipschitz;
  return cfg;
}

inline ClassMeans fairness_means(const GroupedDesign& std_design, const FitOptions& opt) {
  ClassMeans cm = class_conditional_means(std_design, /*augment=*/true);
  if (!opt.fairness_includes_intercept) {
    cm.outcome0.col(0).setZero();
    cm.outcome1.col(0).setZero();
  }
  return cm;
}

}  // namespace detail

// Builds the augmented stacked operator [lambda_f D0; lambda_f D1;
// lambda_sim F] for a standardized multi-group design.
inline PenaltyOperator build_jfm_operator(const GroupedDesign& std_design, double lambda_f,
                                          double lambda_sim, const FitOptions& opt = {}) {
  const ClassMeans cm = detail::fairness_means(std_design, opt);
  FairnessMatrices fm = build_fairness_matrices(cm);
  Matrix fusion =
      build_fusion_matrix_augmented(std_design.num_groups(), std_design.num_features());
  return stack_penalty_operator(std::move(fm.d0), std::move(fm.d1), std::move(fusion), lambda_f,
                                lambda_sim);
}

// Joint Fairness Model: group-specific logistic coefficients minimizing the
// 1/n_k-weighted loss plus fairness, fusion, and per-group sparsity penalties.
inline FitResult fit_jfm(const GroupedDesign& raw, double lambda_f, double lambda_sim,
                         std::vector<double> lambda_sp, const FitOptions& opt = {}) {
  raw.validate();
  const int K = raw.num_groups();
  if (K < 2) {
    throw ValidationError("jfm needs at least 2 groups; use the separate model for one group");
  }
  raw.require_both_classes();
  lambda_sp = detail::expand_lambda_sp(std::move(lambda_sp), K);

  auto [std_design, params] = standardize(raw);
  PenaltyOperator op = build_jfm_operator(std_design, lambda_f, lambda_sim, opt);
  const SolverConfig cfg = detail::solver_config(opt, lambda_f, lambda_sim, lambda_sp);
  auto [beta, conv] = aspg_solve(std_design, op, cfg);

  const Eigen::Index p = raw.num_features();
  const Eigen::Index q = p + 1;
  FitResult fit;
  fit.model_kind = "jfm";
  fit.feature_names = raw.feature_names;
  fit.intercepts.resize(K);
  for (int k = 0; k < K; ++k) {
    fit.group_ids.push_back(raw.groups[static_cast<std::size_t>(k)].group_id);
    fit.intercepts[k] = beta[q * k];
    fit.coefficients.push_back(beta.segment(q * k + 1, p));
  }
  fit.lambda_f = lambda_f;
  fit.lambda_sim = lambda_sim;
  fit.lambda_sp = std::move(lambda_sp);
  fit.standardization = std::move(params);
  fit.convergence = conv;
  return fit;
}

// Single Fairness Model: one shared coefficient vector, unweighted pooled
// likelihood, fairness rows over a single block, no fusion.
inline FitResult fit_sfm(const GroupedDesign& raw, double lambda_f, double lambda_sp,
                         const FitOptions& opt = {}) {
  raw.validate();
  const int K = raw.num_groups();
  if (K < 2) throw ValidationError("sfm needs at least 2 groups");
  raw.require_both_classes();
  if (lambda_sp < 0.0) throw ValidationError("negative sparsity weight");

  auto [std_design, params] = standardize(raw);
  const Eigen::Index p = raw.num_features();
  const Eigen::Index q = p + 1;

  // Fairness rows over the shared block: aug(Xbar_{jy}) - aug(Xbar_{ky}).
  // The intercept entries cancel, so the shared intercept is never penalized.
  const ClassMeans cm = detail::fairness_means(std_design, opt);
  const Eigen::Index pairs = static_cast<Eigen::Index>(K) * (K - 1) / 2;
  Matrix d0(pairs, q), d1(pairs, q);
  Eigen::Index row = 0;
  for (int j = 0; j < K; ++j) {
    for (int k = j + 1; k < K; ++k) {
      d0.row(row) = cm.outcome0.row(j) - cm.outcome0.row(k);
      d1.row(row) = cm.outcome1.row(j) - cm.outcome1.row(k);
      ++row;
    }
  }
  PenaltyOperator op =
      stack_penalty_operator(std::move(d0), std::move(d1), Matrix(0, q), lambda_f, 0.0);

  // Pooled rows, unweighted likelihood (weight 1, not 1/n).
  const Eigen::Index n_total = std_design.total_samples();
  JointProblem prob;
  {
    Matrix x(n_total, q);
    Vector y(n_total);
    Eigen::Index at = 0;
    for (const auto& g : std_design.groups) {
      x.block(at, 0, g.X.rows(), 1).setOnes();
      x.block(at, 1, g.X.rows(), p) = g.X;
      y.segment(at, g.y.size()) = g.y;
      at += g.X.rows();
    }
    prob.X.push_back(std::move(x));
    prob.y.push_back(std::move(y));
  }
  prob.loss_weights = Vector::Ones(1);
  prob.op = std::move(op);
  prob.threshold.setZero(q);
  prob.threshold.tail(p).setConstant(lambda_sp);

  const SolverConfig cfg = detail::solver_config(opt, lambda_f, 0.0, {lambda_sp});
  auto [beta, conv] = aspg_solve(prob, cfg);

  FitResult fit;
  fit.model_kind = "sfm";
  fit.feature_names = raw.feature_names;
  fit.intercepts = Vector::Constant(K, beta[0]);
  for (int k = 0; k < K; ++k) {
    fit.group_ids.push_back(raw.groups[static_cast<std::size_t>(k)].group_id);
    fit.coefficients.push_back(beta.tail(p));
  }
  fit.lambda_f = lambda_f;
  fit.lambda_sp = {lambda_sp};
  fit.standardization = std::move(params);
  fit.convergence = conv;
  return fit;
}

// K independent lasso-logistic fits sharing the pooled standardization.
inline FitResult fit_group_separate(const GroupedDesign& raw, std::vector<double> lambda_sp,
                                    const FitOptions& opt = {}) {
  raw.validate();
  const int K = raw.num_groups();
  lambda_sp = detail::expand_lambda_sp(std::move(lambda_sp), K);

  auto [std_design, params] = standardize(raw);
  const Eigen::Index p = raw.num_features();

  FitResult fit;
  fit.model_kind = "separate";
  fit.feature_names = raw.feature_names;
  fit.intercepts.resize(K);
  fit.convergence.converged = true;
  for (int k = 0; k < K; ++k) {
    GroupedDesign one;
    one.feature_names = raw.feature_names;
    one.groups.push_back(std_design.groups[static_cast<std::size_t>(k)]);
    const double lam = lambda_sp[static_cast<std::size_t>(k)];
    const SolverConfig cfg = detail::solver_config(opt, 0.0, 0.0, {lam});
    auto [beta, conv] = aspg_solve(JointProblem::from_design(one, PenaltyOperator::zero(0), {lam}),
                                   cfg);
    fit.group_ids.push_back(raw.groups[static_cast<std::size_t>(k)].group_id);
    fit.intercepts[k] = beta[0];
    fit.coefficients.push_back(beta.tail(p));
    fit.convergence.iterations = std::max(fit.convergence.iterations, conv.iterations);
    fit.convergence.final_change = std::max(fit.convergence.final_change, conv.final_change);
    fit.convergence.objective_exact += conv.objective_exact;
    fit.convergence.objective_smoothed += conv.objective_smoothed;
    fit.convergence.converged = fit.convergence.converged && conv.converged;
  }
  fit.lambda_sp = std::move(lambda_sp);
  fit.standardization = std::move(params);
  return fit;
}

// Pooled lasso-logistic with K-1 reference-coded group indicator columns.
// Per-group intercepts are reconstructed as shared intercept + dummy.
inline FitResult fit_group_ignorant(const GroupedDesign& raw, double lambda_sp,
                                    const FitOptions& opt = {}) {
  raw.validate();
  const int K = raw.num_groups();
  if (K < 2) throw ValidationError("ignorant model needs at least 2 groups");
  if (lambda_sp < 0.0) throw ValidationError("negative sparsity weight");

  auto [std_design, params] = standardize(raw);
  const Eigen::Index p = raw.num_features();
  const Eigen::Index n_total = std_design.total_samples();
  const Eigen::Index q = 1 + p + (K - 1);  // intercept, features, dummies

  JointProblem prob;
  {
    Matrix x = Matrix::Zero(n_total, q);
    Vector y(n_total);
    Eigen::Index at = 0;
    for (int k = 0; k < K; ++k) {
      const auto& g = std_design.groups[static_cast<std::size_t>(k)];
      x.block(at, 0, g.X.rows(), 1).setOnes();
      x.block(at, 1, g.X.rows(), p) = g.X;
      if (k > 0) x.block(at, 1 + p + (k - 1), g.X.rows(), 1).setOnes();
      y.segment(at, g.y.size()) = g.y;
      at += g.X.rows();
    }
    prob.X.push_back(std::move(x));
    prob.y.push_back(std::move(y));
  }
  prob.loss_weights = Vector::Constant(1, 1.0 / static_cast<double>(n_total));
  prob.op = PenaltyOperator::zero(q);
  prob.threshold.setZero(q);
  prob.threshold.segment(1, p).setConstant(lambda_sp);
  if (opt.penalize_dummies) prob.threshold.tail(K - 1).setConstant(lambda_sp);

  const SolverConfig cfg = detail::solver_config(opt, 0.0, 0.0, {lambda_sp});
  auto [beta, conv] = aspg_solve(prob, cfg);

  FitResult fit;
  fit.model_kind = "ignorant";
  fit.feature_names = raw.feature_names;
  fit.intercepts.resize(K);
  for (int k = 0; k < K; ++k) {
    const double dummy = k == 0 ? 0.0 : beta[1 + p + (k - 1)];
    fit.group_ids.push_back(raw.groups[static_cast<std::size_t>(k)].group_id);
    fit.intercepts[k] = beta[0] + dummy;
    fit.coefficients.push_back(beta.segment(1, p));
    fit.dummy_coefficients.emplace_back(raw.groups[static_cast<std::size_t>(k)].group_id, dummy);
  }
  fit.lambda_sp = {lambda_sp};
  fit.standardization = std::move(params);
  fit.convergence = conv;
  return fit;
}

// Predicted event probabilities for raw-unit rows of a known group.
inline Vector predict(const FitResult& fit, const Matrix& x_raw, std::string_view group_id) {
  if (x_raw.cols() != static_cast<Eigen::Index>(fit.feature_names.size())) {
    throw ValidationError("predict: feature count mismatch");
  }
  const int k = fit.require_group(group_id);
  const Matrix xs = apply_standardization(x_raw, fit.standardization);
  const Vector z =
      (xs * fit.coefficients[static_cast<std::size_t>(k)]).array() + fit.intercepts[k];
  Vector probs(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) probs[i] = sigmoid(z[i]);
  return probs;
}

inline nlohmann::json fit_to_json(const FitResult& fit) {
  nlohmann::json doc;
  doc["model_kind"] = fit.model_kind;
  doc["feature_names"] = fit.feature_names;
  nlohmann::json groups = nlohmann::json::array();
  for (int k = 0; k < fit.num_groups(); ++k) {
    nlohmann::json g;
    g["group_id"] = fit.group_ids[static_cast<std::size_t>(k)];
    g["intercept"] = fit.intercepts[k];
    g["coefficients"] = std::vector<double>(
        fit.coefficients[static_cast<std::size_t>(k)].begin(),
        fit.coefficients[static_cast<std::size_t>(k)].end());
    // The group's dummy stays inside its record so the order survives the
    // round trip for any group naming.
    if (!fit.dummy_coefficients.empty()) {
      g["dummy_coefficient"] = fit.dummy_coefficients[static_cast<std::size_t>(k)].second;
    }
    groups.push_back(std::move(g));
  }
  doc["groups"] = std::move(groups);
  doc["hyperparameters"] = {{"lambda_f", fit.lambda_f},
                            {"lambda_sim", fit.lambda_sim},
                            {"lambda_sp", fit.lambda_sp}};
  doc["standardization"] = {
      {"means", std::vector<double>(fit.standardization.means.begin(),
                                    fit.standardization.means.end())},
      {"scales", std::vector<double>(fit.standardization.scales.begin(),
                                     fit.standardization.scales.end())}};
  doc["convergence"] = {{"iterations", fit.convergence.iterations},
                        {"final_change", fit.convergence.final_change},
                        {"objective_exact", fit.convergence.objective_exact},
                        {"objective_smoothed", fit.convergence.objective_smoothed},
                        {"converged", fit.convergence.converged}};
  return doc;
}

inline FitResult fit_from_json(const nlohmann::json& doc) {
  FitResult fit;
  fit.model_kind = doc.at("model_kind").get<std::string>();
  fit.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
  const auto& groups = doc.at("groups");
  fit.intercepts.resize(static_cast<Eigen::Index>(groups.size()));
  Eigen::Index k = 0;
  for (const auto& g : groups) {
    fit.group_ids.push_back(g.at("group_id").get<std::string>());
    fit.intercepts[k] = g.at("intercept").get<double>();
    const auto coefs = g.at("coefficients").get<std::vector<double>>();
    fit.coefficients.push_back(
        Eigen::Map<const Vector>(coefs.data(), static_cast<Eigen::Index>(coefs.size())));
    if (g.contains("dummy_coefficient")) {
      fit.dummy_coefficients.emplace_back(fit.group_ids.back(),
                                          g.at("dummy_coefficient").get<double>());
    }
    ++k;
  }
  const auto& hp = doc.at("hyperparameters");
  fit.lambda_f = hp.at("lambda_f").get<double>();
  fit.lambda_sim = hp.at("lambda_sim").get<double>();
  fit.lambda_sp = hp.at("lambda_sp").get<std::vector<double>>();
  const auto means = doc.at("standardization").at("means").get<std::vector<double>>();
  const auto scales = doc.at("standardization").at("scales").get<std::vector<double>>();
  fit.standardization.means =
      Eigen::Map<const Vector>(means.data(), static_cast<Eigen::Index>(means.size()));
  fit.standardization.scales =
      Eigen::Map<const Vector>(scales.data(), static_cast<Eigen::Index>(scales.size()));
  const auto& conv = doc.at("convergence");
  fit.convergence.iterations = conv.at("iterations").get<int>();
  fit.convergence.final_change = conv.at("final_change").get<double>();
  fit.convergence.objective_exact = conv.at("objective_exact").get<double>();
  fit.convergence.objective_smoothed = conv.at("objective_smoothed").get<double>();
  fit.convergence.converged = conv.at("converged").get<bool>();
  return fit;
}

}  // namespace jointfair

#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "jointfair/core.hpp"
#include "jointfair/data.hpp"
#include "jointfair/error.hpp"
#include "jointfair/metrics.hpp"
#include "jointfair/models.hpp"
#include "jointfair/parallel.hpp"
#include "jointfair/rng.hpp"
#include "jointfair/tuning.hpp"

namespace jointfair {

enum class Scenario {
  shared_fraction_sweep = 1,  // proportion of shared active features
  minority_size_sweep = 2,    // under-represented group's sample size
  dimensionality_sweep = 3,   // feature count, active set fixed
};

// One concrete generating configuration. Group "1" is over-represented and
// comes first; group "2" is under-represented.
struct ScenarioSpec {
  Scenario scenario = Scenario::shared_fraction_sweep;
  int p = 100;
  int n1 = 500;
  int n2 = 200;
  int n_nonzero = 40;
  double shared_fraction = 0.5;
  double coef_value = 3.0;
  double prevalence1 = 0.5;  // over-represented group
  double prevalence2 = 0.3;  // under-represented group
  int n_test = 1000;
  int replicates = 20;
  std::uint64_t seed = 1;
  bool marginal_calibration = false;

  int shared_count() const {
    return static_cast<int>(std::lround(shared_fraction * n_nonzero));
  }

  void validate() const {
    if (p < 1 || n1 < 1 || n2 < 1 || n_test < 1 || replicates < 1) {
      throw ValidationError("scenario sizes must be positive");
    }
    if (n_nonzero < 1 || n_nonzero > p) {
      throw ValidationError("n_nonzero must lie in [1, p]");
    }
    if (shared_fraction < 0.0 || shared_fraction > 1.0) {
      throw ValidationError("shared_fraction must lie in [0, 1]");
    }
    if (2 * n_nonzero - shared_count() > p) {
      throw ValidationError("supports do not fit: 2*n_nonzero - shared exceeds p");
    }
    for (double prev : {prevalence1, prevalence2}) {
      if (prev <= 0.0 || prev >= 1.0) throw ValidationError("prevalence must lie in (0, 1)");
    }
  }
};

struct SimulatedTruth {
  std::vector<Vector> beta_true;               // per group, length p
  Vector intercepts_true;                      // per group
  std::vector<std::vector<int>> support_sets;  // per group, ascending indices
};

// Intercept giving the target prevalence for a subject at the covariate mean.
inline double calibrate_intercept(double target) {
  if (target <= 0.0 || target >= 1.0) {
    throw ValidationError("prevalence target must lie strictly in (0, 1)");
  }
  return logit(target);
}

// Alternative calibration: bisection on the marginal prevalence
// E[sigmoid(b + X beta)] over a large standard-normal sample.
inline double calibrate_intercept_marginal(const Vector& beta, double target, std::uint64_t seed,
                                           int sample_size = 200000) {
  if (target <= 0.0 || target >= 1.0) {
    throw ValidationError("prevalence target must lie strictly in (0, 1)");
  }
  Rng rng = Rng::from_keys(seed, 0xca1bULL, 0);
  Vector z(sample_size);
  for (int i = 0; i < sample_size; ++i) {
    double dot = 0.0;
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
      const double x = rng.normal();
      dot += x * beta[j];
    }
    z[i] = dot;
  }
  auto mean_prob = [&](double b) {
    double s = 0.0;
    for (int i = 0; i < sample_size; ++i) s += sigmoid(b + z[i]);
    return s / static_cast<double>(sample_size);
  };
  double lo = -40.0, hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = (lo + hi) / 2.0;
    if (mean_prob(mid) < target) lo = mid; else hi = mid;
  }
  return (lo + hi) / 2.0;
}

struct ScenarioDraw {
  GroupedDesign train;
  GroupedDesign test;
  SimulatedTruth truth;
};

namespace detail {

inline GroupRecord draw_group(Rng& rng, const std::string& id, int n, const Vector& beta,
                              double intercept) {
  GroupRecord g;
  g.group_id = id;
  g.X.resize(n, beta.size());
  g.y.resize(n);
  for (int i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < beta.size(); ++j) g.X(i, j) = rng.normal();
    const double z = intercept + g.X.row(i).dot(beta);
    g.y[i] = rng.bernoulli(sigmoid(z));
  }
  return g;
}

}  // namespace detail

// Draws one replicate: i.i.d. standard-normal features, Bernoulli(sigmoid)
// labels, active coefficients set to coef_value. Supports are laid out as
// [shared | group-1-only | group-2-only] with shared = round(fraction * nnz).
// Streams are keyed by (seed, replicate, split) so every draw is reproducible
// in isolation.
inline ScenarioDraw generate_scenario(const ScenarioSpec& spec, int replicate_index) {
  spec.validate();
  const int s = spec.shared_count();
  const int p = spec.p;
  const int nnz = spec.n_nonzero;

  SimulatedTruth truth;
  truth.beta_true.assign(2, Vector::Zero(p));
  truth.support_sets.assign(2, {});
  for (int j = 0; j < nnz; ++j) {
    truth.beta_true[0][j] = spec.coef_value;
    truth.support_sets[0].push_back(j);
  }
  for (int j = 0; j < s; ++j) truth.support_sets[1].push_back(j);
  for (int j = 0; j < nnz - s; ++j) truth.support_sets[1].push_back(nnz + j);
  for (int j : truth.support_sets[1]) truth.beta_true[1][j] = spec.coef_value;

  truth.intercepts_true.resize(2);
  if (spec.marginal_calibration) {
    truth.intercepts_true[0] =
        calibrate_intercept_marginal(truth.beta_true[0], spec.prevalence1, spec.seed);
    truth.intercepts_true[1] =
        calibrate_intercept_marginal(truth.beta_true[1], spec.prevalence2, spec.seed);
  } else {
    truth.intercepts_true[0] = calibrate_intercept(spec.prevalence1);
    truth.intercepts_true[1] = calibrate_intercept(spec.prevalence2);
  }

  ScenarioDraw draw;
  draw.truth = truth;
  const auto rep = static_cast<std::uint64_t>(replicate_index);

  Rng train_rng = Rng::from_keys(spec.seed, rep, 0);
  draw.train.feature_names.reserve(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) draw.train.feature_names.push_back("x" + std::to_string(j + 1));
  draw.train.groups.push_back(
      detail::draw_group(train_rng, "1", spec.n1, truth.beta_true[0], truth.intercepts_true[0]));
  draw.train.groups.push_back(
      detail::draw_group(train_rng, "2", spec.n2, truth.beta_true[1], truth.intercepts_true[1]));

  Rng test_rng = Rng::from_keys(spec.seed, rep, 1);
  draw.test.feature_names = draw.train.feature_names;
  draw.test.groups.push_back(detail::draw_group(test_rng, "1", spec.n_test, truth.beta_true[0],
                                                truth.intercepts_true[0]));
  draw.test.groups.push_back(detail::draw_group(test_rng, "2", spec.n_test, truth.beta_true[1],
                                                truth.intercepts_true[1]));
  return draw;
}

// Applies one sweep value to the base spec.
inline ScenarioSpec apply_sweep_value(ScenarioSpec spec, double value) {
  switch (spec.scenario) {
    case Scenario::shared_fraction_sweep: spec.shared_fraction = value; break;
    case Scenario::minority_size_sweep: spec.n2 = static_cast<int>(std::lround(value)); break;
    case Scenario::dimensionality_sweep: spec.p = static_cast<int>(std::lround(value)); break;
  }
  return spec;
}

// Scenario 3's dimensionality sweep starts at p=100: with 40 active features
// half-shared the supports occupy 60 distinct columns, so p=50 cannot host
// the layout.
inline std::vector<double> default_sweep(Scenario scenario) {
  switch (scenario) {
    case Scenario::shared_fraction_sweep: return {0.0, 0.25, 0.5, 0.75, 1.0};
    case Scenario::minority_size_sweep: return {50, 100, 150, 200, 250, 300};
    case Scenario::dimensionality_sweep: return {100, 200, 500, 1000, 2000};
  }
  return {};
}

// Hyperparameter source for the replicate runner: fixed values per model, or
// a grid searched by CV on each replicate's training set.
struct RunSettings {
  std::vector<ModelKind> models{ModelKind::jfm, ModelKind::sfm, ModelKind::separate,
                                ModelKind::ignorant};
  std::map<ModelKind, Hypers> fixed_hypers;
  std::optional<HyperGrid> grid;
  CVConfig cv;
  FitOptions fit_options;
  int workers = 0;
};

struct SweepRow {
  double sweep_value = 0.0;
  std::string model;
  std::string metric;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
};

struct SweepTable {
  std::vector<SweepRow> rows;
  int replicates_attempted = 0;
  int replicates_failed = 0;
};

using TruthSink =
    std::function<void(double sweep_value, int replicate, const SimulatedTruth&)>;

namespace detail {

inline void collect_metrics(const FitResult& fit, const GroupedDesign& test,
                            const SimulatedTruth& truth,
                            std::map<std::string, double>& out) {
  std::vector<double> group_auc, group_brier, group_fpr, group_fnr;
  std::vector<double> pooled_p, pooled_y;
  for (int k = 0; k < test.num_groups(); ++k) {
    const auto& g = test.groups[static_cast<std::size_t>(k)];
    const Vector probs = predict(fit, g.X, g.group_id);
    const double a = auc(probs, g.y);
    const double b = brier(probs, g.y);
    const ConfusionRates cr = confusion_rates(probs, g.y);
    group_auc.push_back(a);
    group_brier.push_back(b);
    group_fpr.push_back(cr.fpr);
    group_fnr.push_back(cr.fnr);
    out["auc:" + g.group_id] = a;
    out["brier:" + g.group_id] = b;
    out["fpr:" + g.group_id] = cr.fpr;
    out["fnr:" + g.group_id] = cr.fnr;
    out["avg_tpr_tnr:" + g.group_id] = (cr.tpr + cr.tnr) / 2.0;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
      pooled_p.push_back(probs[i]);
      pooled_y.push_back(g.y[i]);
    }

    // Estimation metrics against the generating truth, raw scale.
    const Vector est = fit.raw_coefficients(k);
    out["mse:" + g.group_id] = coefficient_mse(est, truth.beta_true[static_cast<std::size_t>(k)]);
    const SelectionRates sel =
        selection_rates(est, truth.beta_true[static_cast<std::size_t>(k)]);
    out["sel_tpr:" + g.group_id] = sel.tpr;
    out["sel_tnr:" + g.group_id] = sel.tnr;
  }
  const Vector pp =
      Eigen::Map<const Vector>(pooled_p.data(), static_cast<Eigen::Index>(pooled_p.size()));
  const Vector py =
      Eigen::Map<const Vector>(pooled_y.data(), static_cast<Eigen::Index>(pooled_y.size()));
  out["auc:overall"] = auc(pp, py);
  out["auc:disparity"] = disparity(group_auc);
  out["brier:disparity"] = disparity(group_brier);
  out["fpr:disparity"] = disparity(group_fpr);
  out["fnr:disparity"] = disparity(group_fnr);
}

inline Hypers hypers_for(const RunSettings& settings, ModelKind model,
                         const GroupedDesign& train, const FitOptions& opt) {
  if (settings.grid.has_value()) {
    CVConfig cv = settings.cv;
    cv.criterion = default_criterion(model);
    return grid_search(train, model, *settings.grid, cv, opt, settings.workers).best;
  }
  const auto it = settings.fixed_hypers.find(model);
  if (it == settings.fixed_hypers.end()) {
    throw ValidationError(std::string("no hyperparameters provided for model ") +
                          to_string(model));
  }
  Hypers h = it->second;
  if (h.lambda_sp.size() == 1 && train.num_groups() > 1) {
    h.lambda_sp.assign(static_cast<std::size_t>(train.num_groups()), h.lambda_sp.front());
  }
  return h;
}

}  // namespace detail

// Replicate study over one sweep: generate, fit every model, evaluate on the
// held-out test draw, aggregate medians and quartiles across replicates.
// Failed replicates are excluded and counted; more than half failing aborts.
inline SweepTable run_replicates(const ScenarioSpec& base_spec,
                                 const std::vector<double>& sweep_values,
                                 const RunSettings& settings, const TruthSink& truth_sink = {}) {
  if (sweep_values.empty()) throw ValidationError("sweep has no values");
  SweepTable table;

  for (const double sweep_value : sweep_values) {
    const ScenarioSpec spec = apply_sweep_value(base_spec, sweep_value);
    spec.validate();

    // metric -> model -> replicate values
    std::map<std::string, std::map<std::string, std::vector<double>>> values;
    std::vector<std::optional<std::map<std::string, std::map<std::string, double>>>> results(
        static_cast<std::size_t>(spec.replicates));
    std::vector<std::optional<SimulatedTruth>> truths(static_cast<std::size_t>(spec.replicates));

    parallel_for(static_cast<std::size_t>(spec.replicates), settings.workers,
                 [&](std::size_t r) {
                   try {
                     const ScenarioDraw draw = generate_scenario(spec, static_cast<int>(r));
                     std::map<std::string, std::map<std::string, double>> rep;
                     for (ModelKind model : settings.models) {
                       const Hypers h = detail::hypers_for(settings, model, draw.train,
                                                           settings.fit_options);
                       const FitResult fit =
                           detail::fit_model(model, draw.train, h, settings.fit_options);
                       std::map<std::string, double> metrics;
                       detail::collect_metrics(fit, draw.test, draw.truth, metrics);
                       rep[to_string(model)] = std::move(metrics);
                     }
                     results[r] = std::move(rep);
                     truths[r] = draw.truth;
                   } catch (const std::exception&) {
                     results[r] = std::nullopt;
                   }
                 });

    int failed = 0;
    for (int r = 0; r < spec.replicates; ++r) {
      const auto& rep = results[static_cast<std::size_t>(r)];
      if (!rep.has_value()) {
        ++failed;
        continue;
      }
      if (truth_sink && truths[static_cast<std::size_t>(r)].has_value()) {
        truth_sink(sweep_value, r, *truths[static_cast<std::size_t>(r)]);
      }
      for (const auto& [model, metrics] : *rep) {
        for (const auto& [metric, v] : metrics) values[metric][model].push_back(v);
      }
    }
    table.replicates_attempted += spec.replicates;
    table.replicates_failed += failed;
    if (failed * 2 > spec.replicates) {
      throw NumericalError("more than half of the replicates failed at sweep value " +
                           std::to_string(sweep_value));
    }

    for (const auto& [metric, by_model] : values) {
      for (const auto& [model, v] : by_model) {
        SweepRow row;
        row.sweep_value = sweep_value;
        row.model = model;
        row.metric = metric;
        row.median = median(v);
        row.q1 = quantile(v, 0.25);
        row.q3 = quantile(v, 0.75);
        table.rows.push_back(std::move(row));
      }
    }
  }
  return table;
}

}  // namespace jointfair

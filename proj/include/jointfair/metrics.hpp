#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "jointfair/core.hpp"
#include "jointfair/error.hpp"

namespace jointfair {

// Mann-Whitney AUC with midrank tie handling:
// (sum of positive ranks - n_pos(n_pos+1)/2) / (n_pos * n_neg).
inline double auc(const Vector& scores, const Vector& labels) {
  const Eigen::Index n = scores.size();
  if (labels.size() != n) throw ValidationError("auc: scores/labels length mismatch");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::isnan(scores[i])) throw ValidationError("auc: NaN score");
  }
  Eigen::Index n_pos = 0;
  for (Eigen::Index i = 0; i < n; ++i) n_pos += labels[i] == 1.0 ? 1 : 0;
  const Eigen::Index n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw ValidationError("auc undefined: labels contain a single class");
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return scores[a] < scores[b]; });

  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t t = i; t <= j; ++t) {
      if (labels[order[t]] == 1.0) rank_sum_pos += midrank;
    }
    i = j + 1;
  }
  const double np = static_cast<double>(n_pos);
  const double nn = static_cast<double>(n_neg);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

// Mean squared deviation of predicted probabilities from labels.
inline double brier(const Vector& probs, const Vector& labels) {
  if (labels.size() != probs.size()) throw ValidationError("brier: length mismatch");
  if (probs.size() == 0) throw ValidationError("brier: empty input");
  return (probs - labels).squaredNorm() / static_cast<double>(probs.size());
}

struct ConfusionRates {
  double fpr = 0.0;
  double fnr = 0.0;
  double tpr = 0.0;
  double tnr = 0.0;
};

// Classification at the cutoff (prob >= cutoff predicts positive).
inline ConfusionRates confusion_rates(const Vector& probs, const Vector& labels,
                                      double cutoff = 0.5) {
  if (labels.size() != probs.size()) throw ValidationError("confusion_rates: length mismatch");
  Eigen::Index pos = 0, neg = 0, fp = 0, fn = 0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    const bool predicted = probs[i] >= cutoff;
    if (labels[i] == 1.0) {
      ++pos;
      if (!predicted) ++fn;
    } else {
      ++neg;
      if (predicted) ++fp;
    }
  }
  if (pos == 0) throw ValidationError("confusion rates undefined: no positive samples");
  if (neg == 0) throw ValidationError("confusion rates undefined: no negative samples");
  ConfusionRates r;
  r.fpr = static_cast<double>(fp) / static_cast<double>(neg);
  r.fnr = static_cast<double>(fn) / static_cast<double>(pos);
  r.tpr = 1.0 - r.fnr;
  r.tnr = 1.0 - r.fpr;
  return r;
}

// (1/p) sum_j (est_j - truth_j)^2, intercepts excluded by the caller.
inline double coefficient_mse(const Vector& est, const Vector& truth) {
  if (est.size() != truth.size() || est.size() == 0) {
    throw ValidationError("coefficient_mse: shape mismatch");
  }
  return (est - truth).squaredNorm() / static_cast<double>(est.size());
}

struct SelectionRates {
  double tpr = 0.0;  // fraction of truly nonzero coordinates recovered
  double tnr = 0.0;  // fraction of truly zero coordinates left at zero
};

inline SelectionRates selection_rates(const Vector& est, const Vector& truth, double tol = 1e-8) {
  if (est.size() != truth.size()) throw ValidationError("selection_rates: shape mismatch");
  Eigen::Index nz = 0, z = 0, hit = 0, clean = 0;
  for (Eigen::Index j = 0; j < truth.size(); ++j) {
    if (truth[j] != 0.0) {
      ++nz;
      if (std::abs(est[j]) > tol) ++hit;
    } else {
      ++z;
      if (std::abs(est[j]) <= tol) ++clean;
    }
  }
  if (nz == 0 || z == 0) {
    throw ValidationError("selection rates undefined: truth needs zero and nonzero entries");
  }
  return {static_cast<double>(hit) / static_cast<double>(nz),
          static_cast<double>(clean) / static_cast<double>(z)};
}

// Group disparity: max minus min (|a-b| for two groups).
inline double disparity(const std::vector<double>& values) {
  if (values.size() < 2) throw ValidationError("disparity needs at least 2 values");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return *hi - *lo;
}

inline double harmonic_mean(const std::vector<double>& values) {
  if (values.empty()) throw ValidationError("harmonic_mean of empty set");
  double inv = 0.0;
  for (double v : values) {
    if (v <= 0.0) throw ValidationError("harmonic_mean needs positive values");
    inv += 1.0 / v;
  }
  return static_cast<double>(values.size()) / inv;
}

// Type-7 (linear interpolation) quantile of unsorted data.
inline double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ValidationError("quantile of empty set");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = static_cast<std::size_t>(std::ceil(h));
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

inline double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

struct GroupMetrics {
  double auc = 0.0;
  double brier = 0.0;
  double fpr = 0.0;
  double fnr = 0.0;
  double tpr = 0.0;
  double tnr = 0.0;
  double avg_tpr_tnr = 0.0;
};

struct EstimationMetrics {
  std::vector<double> mse;      // per group
  std::vector<double> sel_tpr;  // per group
  std::vector<double> sel_tnr;  // per group
};

struct MetricReport {
  std::vector<std::pair<std::string, GroupMetrics>> per_group;  // design order
  std::map<std::string, double> disparity;  // metric name -> max-min over groups
  double cutoff = 0.5;
  std::optional<EstimationMetrics> estimation;
};

inline MetricReport build_metric_report(
    const std::vector<std::pair<std::string, GroupMetrics>>& per_group, double cutoff) {
  MetricReport report;
  report.per_group = per_group;
  report.cutoff = cutoff;
  auto collect = [&](auto field) {
    std::vector<double> vals;
    vals.reserve(per_group.size());
    for (const auto& [id, gm] : per_group) vals.push_back(gm.*field);
    return vals;
  };
  if (per_group.size() >= 2) {
    report.disparity["auc"] = disparity(collect(&GroupMetrics::auc));
    report.disparity["brier"] = disparity(collect(&GroupMetrics::brier));
    report.disparity["fpr"] = disparity(collect(&GroupMetrics::fpr));
    report.disparity["fnr"] = disparity(collect(&GroupMetrics::fnr));
    report.disparity["avg_tpr_tnr"] = disparity(collect(&GroupMetrics::avg_tpr_tnr));
  }
  return report;
}

}  // namespace jointfair

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
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

namespace jointfair {

enum class Criterion {
  overall_auc,
  group_avg_auc_harmonic,
  group_avg_auc_arithmetic,
  group_avg_auc_minus_disparity,
  overall_brier,
  group_avg_brier_harmonic,
  group_avg_brier_minus_disparity,
};

inline const char* to_string(Criterion c) {
  switch (c) {
    case Criterion::overall_auc: return "overall_auc";
    case Criterion::group_avg_auc_harmonic: return "group_avg_auc_harmonic";
    case Criterion::group_avg_auc_arithmetic: return "group_avg_auc_arithmetic";
    case Criterion::group_avg_auc_minus_disparity: return "group_avg_auc_minus_disparity";
    case Criterion::overall_brier: return "overall_brier";
    case Criterion::group_avg_brier_harmonic: return "group_avg_brier_harmonic";
    case Criterion::group_avg_brier_minus_disparity: return "group_avg_brier_minus_disparity";
  }
  return "?";
}

inline Criterion parse_criterion(const std::string& s) {
  for (Criterion c : {Criterion::overall_auc, Criterion::group_avg_auc_harmonic,
                      Criterion::group_avg_auc_arithmetic, Criterion::group_avg_auc_minus_disparity,
                      Criterion::overall_brier, Criterion::group_avg_brier_harmonic,
                      Criterion::group_avg_brier_minus_disparity}) {
    if (s == to_string(c)) return c;
  }
  throw ValidationError("unknown criterion '" + s + "'");
}

inline Criterion default_criterion(ModelKind model) {
  switch (model) {
    case ModelKind::jfm:
    case ModelKind::sfm: return Criterion::group_avg_auc_harmonic;
    case ModelKind::ignorant: return Criterion::overall_auc;
    case ModelKind::separate: return Criterion::group_avg_auc_arithmetic;
  }
  return Criterion::group_avg_auc_harmonic;
}

struct CVConfig {
  int folds = 5;
  std::uint64_t seed = 0;
  Criterion criterion = Criterion::group_avg_auc_harmonic;
};

// One hyperparameter assignment.
struct Hypers {
  double lambda_f = 0.0;
  double lambda_sim = 0.0;
  std::vector<double> lambda_sp;   // per group
  double lambda_sp_base = 0.0;     // the grid value lambda_sp was expanded from

  double lambda_sp_total() const {
    double t = 0.0;
    for (double v : lambda_sp) t += v;
    return t;
  }
};

struct HyperGrid {
  std::vector<double> lambda_f;
  std::vector<double> lambda_sim;
  std::vector<double> lambda_sp;
  enum class CMode { independent, inverse_sqrt_n };
  CMode c_mode = CMode::inverse_sqrt_n;
};

inline std::vector<double> default_lambda_grid() {
  std::vector<double> v;
  for (int i = 0; i < 8; ++i) v.push_back(std::pow(10.0, -3.0 + 4.0 * i / 7.0));
  return v;
}

inline HyperGrid default_grid() {
  HyperGrid g;
  g.lambda_f = default_lambda_grid();
  g.lambda_sim = default_lambda_grid();
  g.lambda_sp = default_lambda_grid();
  return g;
}

// Deterministic stratified assignment: within each (group, class) cell the
// samples are shuffled by the seed and dealt round-robin, so per-cell fold
// sizes differ by at most one and every fold keeps both classes everywhere.
inline std::vector<std::vector<int>> stratified_folds(const GroupedDesign& design, int folds,
                                                      std::uint64_t seed) {
  design.validate();
  if (folds < 2) throw ValidationError("folds must be at least 2");
  std::vector<std::vector<int>> assignment;
  for (int k = 0; k < design.num_groups(); ++k) {
    const auto& g = design.groups[static_cast<std::size_t>(k)];
    std::vector<int> fold_of(static_cast<std::size_t>(g.y.size()), -1);
    for (int cls = 0; cls <= 1; ++cls) {
      std::vector<Eigen::Index> cell;
      for (Eigen::Index i = 0; i < g.y.size(); ++i) {
        if (static_cast<int>(g.y[i]) == cls) cell.push_back(i);
      }
      if (static_cast<int>(cell.size()) < folds) {
        throw ValidationError("group '" + g.group_id + "' has only " +
                              std::to_string(cell.size()) + " samples with y=" +
                              std::to_string(cls) + ", fewer than " + std::to_string(folds) +
                              " folds");
      }
      Rng rng = Rng::from_keys(seed, static_cast<std::uint64_t>(k),
                               0xf01d5ULL + static_cast<std::uint64_t>(cls));
      rng.shuffle(cell);
      for (std::size_t i = 0; i < cell.size(); ++i) {
        fold_of[static_cast<std::size_t>(cell[i])] = static_cast<int>(i % folds);
      }
    }
    assignment.push_back(std::move(fold_of));
  }
  return assignment;
}

namespace detail {

inline GroupedDesign subset_design(const GroupedDesign& design,
                                   const std::vector<std::vector<int>>& folds, int fold,
                                   bool keep_fold) {
  GroupedDesign out;
  out.feature_names = design.feature_names;
  for (int k = 0; k < design.num_groups(); ++k) {
    const auto& g = design.groups[static_cast<std::size_t>(k)];
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < g.y.size(); ++i) {
      const bool in_fold = folds[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] == fold;
      if (in_fold == keep_fold) rows.push_back(i);
    }
    GroupRecord rec;
    rec.group_id = g.group_id;
    rec.X.resize(static_cast<Eigen::Index>(rows.size()), g.X.cols());
    rec.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      rec.X.row(static_cast<Eigen::Index>(i)) = g.X.row(rows[i]);
      rec.y[static_cast<Eigen::Index>(i)] = g.y[rows[i]];
    }
    out.groups.push_back(std::move(rec));
  }
  return out;
}

inline FitResult fit_model(ModelKind model, const GroupedDesign& train, const Hypers& h,
                           const FitOptions& opt) {
  switch (model) {
    case ModelKind::jfm: return fit_jfm(train, h.lambda_f, h.lambda_sim, h.lambda_sp, opt);
    case ModelKind::sfm: return fit_sfm(train, h.lambda_f, h.lambda_sp.front(), opt);
    case ModelKind::separate: return fit_group_separate(train, h.lambda_sp, opt);
    case ModelKind::ignorant: return fit_group_ignorant(train, h.lambda_sp.front(), opt);
  }
  throw ValidationError("unknown model kind");
}

inline double aggregate_criterion(Criterion criterion, const std::vector<double>& group_auc,
                                  const std::vector<double>& group_brier, const Vector& pooled_probs,
                                  const Vector& pooled_labels) {
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  switch (criterion) {
    case Criterion::overall_auc: return auc(pooled_probs, pooled_labels);
    case Criterion::group_avg_auc_harmonic: return harmonic_mean(group_auc);
    case Criterion::group_avg_auc_arithmetic: return mean(group_auc);
    case Criterion::group_avg_auc_minus_disparity:
      return mean(group_auc) - (group_auc.size() >= 2 ? disparity(group_auc) : 0.0);
    case Criterion::overall_brier: return -brier(pooled_probs, pooled_labels);
    case Criterion::group_avg_brier_harmonic: return -harmonic_mean(group_brier);
    case Criterion::group_avg_brier_minus_disparity:
      // Lower mean and lower disparity are both good, so both are penalized.
      return -(mean(group_brier) + (group_brier.size() >= 2 ? disparity(group_brier) : 0.0));
  }
  throw ValidationError("unknown criterion");
}

}  // namespace detail

// Mean over folds of the criterion: fit on the complement, score the held-out
// fold per group, aggregate. Also reports fold-averaged per-group AUCs.
inline double cv_score(const GroupedDesign& design, ModelKind model, const Hypers& hypers,
                       const CVConfig& cv, const FitOptions& opt = {},
                       std::vector<double>* per_group_auc_out = nullptr) {
  const auto folds = stratified_folds(design, cv.folds, cv.seed);
  const int K = design.num_groups();
  double score_sum = 0.0;
  std::vector<double> auc_sum(static_cast<std::size_t>(K), 0.0);

  for (int f = 0; f < cv.folds; ++f) {
    const GroupedDesign train = detail::subset_design(design, folds, f, false);
    const GroupedDesign hold = detail::subset_design(design, folds, f, true);
    const FitResult fit = detail::fit_model(model, train, hypers, opt);

    std::vector<double> group_auc, group_brier;
    std::vector<double> pooled_p, pooled_y;
    for (int k = 0; k < K; ++k) {
      const auto& g = hold.groups[static_cast<std::size_t>(k)];
      const Vector probs = predict(fit, g.X, g.group_id);
      group_auc.push_back(auc(probs, g.y));
      group_brier.push_back(brier(probs, g.y));
      for (Eigen::Index i = 0; i < probs.size(); ++i) {
        pooled_p.push_back(probs[i]);
        pooled_y.push_back(g.y[i]);
      }
      auc_sum[static_cast<std::size_t>(k)] += group_auc.back();
    }
    const Vector pp = Eigen::Map<const Vector>(pooled_p.data(),
                                               static_cast<Eigen::Index>(pooled_p.size()));
    const Vector py = Eigen::Map<const Vector>(pooled_y.data(),
                                               static_cast<Eigen::Index>(pooled_y.size()));
    score_sum += detail::aggregate_criterion(cv.criterion, group_auc, group_brier, pp, py);
  }

  if (per_group_auc_out != nullptr) {
    per_group_auc_out->clear();
    for (double s : auc_sum) per_group_auc_out->push_back(s / static_cast<double>(cv.folds));
  }
  return score_sum / static_cast<double>(cv.folds);
}

struct CellScore {
  Hypers hypers;
  double score = 0.0;
  std::vector<double> per_group_auc;
  bool failed = false;
  std::string error;
};

struct GridSearchResult {
  Hypers best;
  double best_score = 0.0;
  std::vector<CellScore> table;  // enumeration order, one row per cell
};

namespace detail {

inline std::vector<Hypers> enumerate_cells(const HyperGrid& grid, ModelKind model,
                                           const GroupedDesign& design) {
  if (grid.lambda_sp.empty()) throw ValidationError("lambda_sp grid is empty");
  if ((model == ModelKind::jfm || model == ModelKind::sfm) && grid.lambda_f.empty()) {
    throw ValidationError("lambda_f grid is empty");
  }
  if (model == ModelKind::jfm && grid.lambda_sim.empty()) {
    throw ValidationError("lambda_sim grid is empty");
  }
  for (const auto* list : {&grid.lambda_f, &grid.lambda_sim, &grid.lambda_sp}) {
    for (double v : *list) {
      if (v < 0.0) throw ValidationError("grid values must be nonnegative");
    }
  }
  const int K = design.num_groups();
  std::vector<double> inv_sqrt_n;
  for (const auto& g : design.groups) {
    inv_sqrt_n.push_back(1.0 / std::sqrt(static_cast<double>(g.X.rows())));
  }

  auto expand_sp = [&](double base) {
    std::vector<std::vector<double>> out;
    if (grid.c_mode == HyperGrid::CMode::inverse_sqrt_n && model == ModelKind::jfm) {
      std::vector<double> sp;
      for (int k = 0; k < K; ++k) sp.push_back(base * inv_sqrt_n[static_cast<std::size_t>(k)]);
      out.push_back(std::move(sp));
    } else {
      out.push_back(std::vector<double>(static_cast<std::size_t>(K), base));
    }
    return out;
  };

  std::vector<Hypers> cells;
  switch (model) {
    case ModelKind::jfm: {
      if (grid.c_mode == HyperGrid::CMode::independent && K > 1) {
        // Full Cartesian power over groups.
        std::vector<std::vector<double>> combos{{}};
        for (int k = 0; k < K; ++k) {
          std::vector<std::vector<double>> next;
          for (const auto& c : combos) {
            for (double v : grid.lambda_sp) {
              auto cc = c;
              cc.push_back(v);
              next.push_back(std::move(cc));
            }
          }
          combos = std::move(next);
        }
        for (double lf : grid.lambda_f) {
          for (double ls : grid.lambda_sim) {
            for (const auto& sp : combos) {
              Hypers h;
              h.lambda_f = lf;
              h.lambda_sim = ls;
              h.lambda_sp = sp;
              h.lambda_sp_base = 0.0;  // no single base value; report per group
              cells.push_back(std::move(h));
            }
          }
        }
      } else {
        for (double lf : grid.lambda_f) {
          for (double ls : grid.lambda_sim) {
            for (double base : grid.lambda_sp) {
              Hypers h;
              h.lambda_f = lf;
              h.lambda_sim = ls;
              h.lambda_sp = expand_sp(base).front();
              h.lambda_sp_base = base;
              cells.push_back(std::move(h));
            }
          }
        }
      }
      break;
    }
    case ModelKind::sfm: {
      for (double lf : grid.lambda_f) {
        for (double base : grid.lambda_sp) {
          Hypers h;
          h.lambda_f = lf;
          h.lambda_sp.assign(static_cast<std::size_t>(K), base);
          h.lambda_sp_base = base;
          cells.push_back(std::move(h));
        }
      }
      break;
    }
    case ModelKind::separate:
    case ModelKind::ignorant: {
      for (double base : grid.lambda_sp) {
        Hypers h;
        h.lambda_sp.assign(static_cast<std::size_t>(K), base);
        h.lambda_sp_base = base;
        cells.push_back(std::move(h));
      }
      break;
    }
  }
  return cells;
}

// More-regularized-wins tie order: score, then lambda_sp total, lambda_sim,
// lambda_f.
inline bool cell_beats(const CellScore& a, const CellScore& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.hypers.lambda_sp_total() != b.hypers.lambda_sp_total()) {
    return a.hypers.lambda_sp_total() > b.hypers.lambda_sp_total();
  }
  if (a.hypers.lambda_sim != b.hypers.lambda_sim) return a.hypers.lambda_sim > b.hypers.lambda_sim;
  return a.hypers.lambda_f > b.hypers.lambda_f;
}

}  // namespace detail

// Evaluates every grid cell by cross-validation and returns the argmax plus
// the full audit table. The separate model picks each group's lambda_sp
// independently by that group's fold-averaged AUC.
inline GridSearchResult grid_search(const GroupedDesign& design, ModelKind model,
                                    const HyperGrid& grid, CVConfig cv,
                                    const FitOptions& opt = {}, int workers = 0) {
  const std::vector<Hypers> cells = detail::enumerate_cells(grid, model, design);
  if (cells.empty()) throw ValidationError("hyperparameter grid is empty");

  GridSearchResult result;
  result.table.resize(cells.size());
  parallel_for(cells.size(), workers, [&](std::size_t i) {
    CellScore cell;
    cell.hypers = cells[i];
    try {
      cell.score = cv_score(design, model, cells[i], cv, opt, &cell.per_group_auc);
    } catch (const std::exception& e) {
      cell.failed = true;
      cell.error = e.what();
      cell.score = -std::numeric_limits<double>::infinity();
    }
    result.table[i] = std::move(cell);
  });

  std::size_t ok = 0;
  for (const auto& c : result.table) ok += c.failed ? 0 : 1;
  if (ok == 0) {
    throw ValidationError("every grid cell failed; first error: " + result.table.front().error);
  }

  if (model == ModelKind::separate) {
    // Independent per-group argmax over the lambda_sp dimension.
    const int K = design.num_groups();
    Hypers best;
    best.lambda_sp.resize(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
      const CellScore* pick = nullptr;
      for (const auto& c : result.table) {
        if (c.failed) continue;
        if (pick == nullptr || c.per_group_auc[static_cast<std::size_t>(k)] >
                                   pick->per_group_auc[static_cast<std::size_t>(k)] ||
            (c.per_group_auc[static_cast<std::size_t>(k)] ==
                 pick->per_group_auc[static_cast<std::size_t>(k)] &&
             c.hypers.lambda_sp_base > pick->hypers.lambda_sp_base)) {
          pick = &c;
        }
      }
      best.lambda_sp[static_cast<std::size_t>(k)] = pick->hypers.lambda_sp_base;
    }
    best.lambda_sp_base = 0.0;
    result.best = std::move(best);
    result.best_score = -std::numeric_limits<double>::infinity();
    for (const auto& c : result.table) {
      if (!c.failed) result.best_score = std::max(result.best_score, c.score);
    }
    return result;
  }

  const CellScore* best = nullptr;
  for (const auto& c : result.table) {
    if (c.failed) continue;
    if (best == nullptr || detail::cell_beats(c, *best)) best = &c;
  }
  result.best = best->hypers;
  result.best_score = best->score;
  return result;
}

}  // namespace jointfair

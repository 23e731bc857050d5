// Command-line front end: fit, cv, simulate, evaluate.
//
// Exit codes: 0 success, 2 input/validation problem, 3 numerical/runtime
// failure. Every command writes a run manifest next to its outputs so runs
// are auditable and reproducible.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "jointfair/jointfair.hpp"

namespace {

using jointfair::Criterion;
using jointfair::FitOptions;
using jointfair::FitResult;
using jointfair::GroupedDesign;
using jointfair::HyperGrid;
using jointfair::Hypers;
using jointfair::ModelKind;
using jointfair::ScenarioSpec;
using jointfair::Vector;
using nlohmann::json;

std::string format_double(double v) {
  return jointfair::detail::format_shortest(v);
}

// FNV-1a over the canonical (sorted-key) dump, so the digest is stable under
// key reordering of the config document.
std::string config_digest(const json& config) {
  const std::string canon = config.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string timestamp_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

struct ManifestWriter {
  std::string command;
  json resolved_config;
  std::uint64_t seed = 0;
  std::string started_at = timestamp_now();

  void write(const std::string& path) const {
    json doc;
    doc["command"] = command;
    doc["config_digest"] = config_digest(resolved_config);
    doc["resolved_config"] = resolved_config;
    doc["seed"] = seed;
    doc["tool_version"] = jointfair::kVersion;
    doc["started_at"] = started_at;
    doc["finished_at"] = timestamp_now();
    std::ofstream out(path);
    if (!out) throw jointfair::ValidationError("cannot write manifest '" + path + "'");
    out << doc.dump(2) << "\n";
  }
};

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw jointfair::ValidationError("cannot write '" + path + "'");
  out << content;
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw jointfair::ValidationError("cannot open '" + path + "'");
  try {
    json doc;
    in >> doc;
    return doc;
  } catch (const json::parse_error& e) {
    throw jointfair::ValidationError("invalid JSON in '" + path + "': " + e.what());
  }
}

FitOptions fit_options_from_json(const json& cfg) {
  FitOptions opt;
  opt.mu = cfg.value("mu", 0.0);
  opt.epsilon = cfg.value("epsilon", 1e-6);
  opt.max_iter = cfg.value("max_iter", 10000);
  opt.tight_lipschitz = cfg.value("tight_lipschitz", false);
  opt.fairness_includes_intercept = cfg.value("fairness_includes_intercept", true);
  opt.penalize_dummies = cfg.value("penalize_dummies", true);
  return opt;
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
  std::string data_path, group_col = "group", label_col = "label";
  std::string model = "jfm";
  double lambda_f = 0.0, lambda_sim = 0.0;
  std::vector<double> lambda_sp{0.0};
  std::string out = "fit.json";
  std::string dump_operator;
  double mu = 0.0, epsilon = 1e-6;
  int max_iter = 10000;
  bool tight_lipschitz = false;
  bool no_fairness_intercept = false;
  bool unpenalized_dummies = false;
};

int run_fit(const FitArgs& a) {
  const GroupedDesign design = jointfair::load_csv(a.data_path, a.group_col, a.label_col);
  FitOptions opt;
  opt.mu = a.mu;
  opt.epsilon = a.epsilon;
  opt.max_iter = a.max_iter;
  opt.tight_lipschitz = a.tight_lipschitz;
  opt.fairness_includes_intercept = !a.no_fairness_intercept;
  opt.penalize_dummies = !a.unpenalized_dummies;

  const ModelKind model = jointfair::parse_model_kind(a.model);
  if ((model == ModelKind::sfm || model == ModelKind::ignorant) && a.lambda_sp.size() > 1) {
    throw jointfair::ValidationError(std::string("model ") + to_string(model) +
                                     " takes a single --lambda-sp value");
  }
  FitResult fit;
  switch (model) {
    case ModelKind::jfm:
      fit = jointfair::fit_jfm(design, a.lambda_f, a.lambda_sim, a.lambda_sp, opt);
      break;
    case ModelKind::sfm:
      fit = jointfair::fit_sfm(design, a.lambda_f, a.lambda_sp.front(), opt);
      break;
    case ModelKind::separate:
      fit = jointfair::fit_group_separate(design, a.lambda_sp, opt);
      break;
    case ModelKind::ignorant:
      fit = jointfair::fit_group_ignorant(design, a.lambda_sp.front(), opt);
      break;
  }

  if (!a.dump_operator.empty()) {
    if (model == ModelKind::jfm) {
      auto [std_design, params] = jointfair::standardize(design);
      const auto op = jointfair::build_jfm_operator(std_design, a.lambda_f, a.lambda_sim, opt);
      std::ostringstream text;
      for (Eigen::Index i = 0; i < op.stacked.rows(); ++i) {
        for (Eigen::Index j = 0; j < op.stacked.cols(); ++j) {
          if (j > 0) text << ',';
          text << format_double(op.stacked(i, j));
        }
        text << '\n';
      }
      write_text(a.dump_operator, text.str());
    } else {
      std::cerr << "warning: --dump-operator only applies to the jfm model\n";
    }
  }

  json doc = jointfair::fit_to_json(fit);
  json training_auc;
  for (const auto& g : design.groups) {
    training_auc[g.group_id] = jointfair::auc(jointfair::predict(fit, g.X, g.group_id), g.y);
  }
  doc["training_auc"] = std::move(training_auc);
  write_text(a.out, doc.dump(2) + "\n");

  ManifestWriter manifest;
  manifest.command = "fit";
  manifest.resolved_config = {
      {"data", a.data_path},     {"group_col", a.group_col},
      {"label_col", a.label_col}, {"model", a.model},
      {"lambda_f", a.lambda_f},  {"lambda_sim", a.lambda_sim},
      {"lambda_sp", a.lambda_sp}, {"mu", a.mu},
      {"epsilon", a.epsilon},    {"max_iter", a.max_iter},
      {"tight_lipschitz", a.tight_lipschitz},
      {"fairness_includes_intercept", !a.no_fairness_intercept},
      {"penalize_dummies", !a.unpenalized_dummies}};
  manifest.write(a.out + ".manifest.json");

  if (!fit.convergence.converged) {
    std::cerr << "warning: solver stopped at max_iter without meeting epsilon\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// cv

struct CvArgs {
  std::string data_path, group_col = "group", label_col = "label";
  std::string model = "jfm";
  std::string grid_path;
  int folds = 5;
  std::string criterion;
  std::uint64_t seed = 0;
  std::string out_table = "cv.csv";
  std::string out_best = "best.json";
  int workers = 0;
  double mu = 0.0, epsilon = 1e-6;
  int max_iter = 10000;
};

HyperGrid grid_from_json(const json& doc) {
  HyperGrid grid = jointfair::default_grid();
  if (doc.contains("lambda_f")) grid.lambda_f = doc["lambda_f"].get<std::vector<double>>();
  if (doc.contains("lambda_sim")) grid.lambda_sim = doc["lambda_sim"].get<std::vector<double>>();
  if (doc.contains("lambda_sp")) grid.lambda_sp = doc["lambda_sp"].get<std::vector<double>>();
  if (doc.contains("c_mode")) {
    const std::string mode = doc["c_mode"].get<std::string>();
    if (mode == "independent") {
      grid.c_mode = HyperGrid::CMode::independent;
    } else if (mode == "inverse_sqrt_n") {
      grid.c_mode = HyperGrid::CMode::inverse_sqrt_n;
    } else {
      throw jointfair::ValidationError("unknown c_mode '" + mode + "'");
    }
  }
  return grid;
}

int run_cv(const CvArgs& a) {
  const GroupedDesign design = jointfair::load_csv(a.data_path, a.group_col, a.label_col);
  const ModelKind model = jointfair::parse_model_kind(a.model);
  const json grid_doc = a.grid_path.empty() ? json::object() : load_json(a.grid_path);
  const HyperGrid grid = grid_from_json(grid_doc);

  jointfair::CVConfig cv;
  cv.folds = a.folds;
  cv.seed = a.seed;
  cv.criterion = a.criterion.empty() ? jointfair::default_criterion(model)
                                     : jointfair::parse_criterion(a.criterion);
  FitOptions opt;
  opt.mu = a.mu;
  opt.epsilon = a.epsilon;
  opt.max_iter = a.max_iter;

  const auto result = jointfair::grid_search(design, model, grid, cv, opt, a.workers);

  std::ostringstream table;
  table << "lambda_f,lambda_sim,lambda_sp,criterion,score";
  for (const auto& g : design.groups) table << ",auc_" << g.group_id;
  table << '\n';
  for (const auto& cell : result.table) {
    table << format_double(cell.hypers.lambda_f) << ',' << format_double(cell.hypers.lambda_sim)
          << ',';
    if (cell.hypers.lambda_sp_base > 0.0 || cell.hypers.lambda_sp_total() == 0.0 ||
        cell.hypers.lambda_sp.empty()) {
      table << format_double(cell.hypers.lambda_sp_base);
    } else {
      for (std::size_t i = 0; i < cell.hypers.lambda_sp.size(); ++i) {
        if (i > 0) table << ';';
        table << format_double(cell.hypers.lambda_sp[i]);
      }
    }
    table << ',' << to_string(cv.criterion) << ',';
    if (cell.failed) {
      table << "failed";
      for (int k = 0; k < design.num_groups(); ++k) table << ',';
    } else {
      table << format_double(cell.score);
      for (double v : cell.per_group_auc) table << ',' << format_double(v);
    }
    table << '\n';
  }
  write_text(a.out_table, table.str());

  json best;
  best["model"] = a.model;
  best["criterion"] = to_string(cv.criterion);
  best["score"] = result.best_score;
  best["lambda_f"] = result.best.lambda_f;
  best["lambda_sim"] = result.best.lambda_sim;
  best["lambda_sp"] = result.best.lambda_sp;
  best["lambda_sp_base"] = result.best.lambda_sp_base;
  write_text(a.out_best, best.dump(2) + "\n");

  ManifestWriter manifest;
  manifest.command = "cv";
  manifest.seed = a.seed;
  manifest.resolved_config = {{"data", a.data_path},
                              {"group_col", a.group_col},
                              {"label_col", a.label_col},
                              {"model", a.model},
                              {"grid", grid_doc},
                              {"folds", a.folds},
                              {"criterion", to_string(cv.criterion)},
                              {"seed", a.seed},
                              {"mu", a.mu},
                              {"epsilon", a.epsilon},
                              {"max_iter", a.max_iter}};
  manifest.write(a.out_table + ".manifest.json");
  return 0;
}

// ---------------------------------------------------------------------------
// simulate

struct SimArgs {
  int scenario = 1;
  std::string config_path;
  std::string models = "all";
  std::string out_dir = "simout";
  int workers = 0;
};

Hypers hypers_from_json(const json& doc, int num_groups) {
  Hypers h;
  h.lambda_f = doc.value("lambda_f", 0.0);
  h.lambda_sim = doc.value("lambda_sim", 0.0);
  if (doc.contains("lambda_sp") && doc["lambda_sp"].is_array()) {
    h.lambda_sp = doc["lambda_sp"].get<std::vector<double>>();
  } else {
    h.lambda_sp.assign(static_cast<std::size_t>(num_groups), doc.value("lambda_sp", 0.0));
  }
  return h;
}

// Representative defaults used when the config gives neither fixed
// hyperparameters nor a grid (see README).
std::map<ModelKind, Hypers> default_sim_hypers(const ScenarioSpec& spec) {
  auto per_group = [&](double base) {
    return std::vector<double>{base / std::sqrt(static_cast<double>(spec.n1)),
                               base / std::sqrt(static_cast<double>(spec.n2))};
  };
  std::map<ModelKind, Hypers> out;
  out[ModelKind::jfm] = Hypers{0.05, 0.05, per_group(0.5), 0.5};
  out[ModelKind::sfm] = Hypers{0.05, 0.0, {0.02, 0.02}, 0.02};
  out[ModelKind::separate] = Hypers{0.0, 0.0, {0.05, 0.05}, 0.05};
  out[ModelKind::ignorant] = Hypers{0.0, 0.0, {0.02, 0.02}, 0.02};
  return out;
}

int run_simulate(const SimArgs& a) {
  json cfg = a.config_path.empty() ? json::object() : load_json(a.config_path);

  ScenarioSpec spec;
  switch (a.scenario) {
    case 1: spec.scenario = jointfair::Scenario::shared_fraction_sweep; break;
    case 2: spec.scenario = jointfair::Scenario::minority_size_sweep; break;
    case 3: spec.scenario = jointfair::Scenario::dimensionality_sweep; break;
    default: throw jointfair::ValidationError("scenario must be 1, 2, or 3");
  }
  spec.p = cfg.value("p", spec.p);
  spec.n1 = cfg.value("n1", spec.n1);
  spec.n2 = cfg.value("n2", spec.n2);
  spec.n_nonzero = cfg.value("n_nonzero", spec.scenario == jointfair::Scenario::dimensionality_sweep
                                              ? 40
                                              : spec.p * 2 / 5);
  spec.shared_fraction = cfg.value("shared_fraction", spec.shared_fraction);
  spec.coef_value = cfg.value("coef_value", spec.coef_value);
  spec.prevalence1 = cfg.value("prevalence1", spec.prevalence1);
  spec.prevalence2 = cfg.value("prevalence2", spec.prevalence2);
  spec.n_test = cfg.value("n_test", spec.n_test);
  spec.replicates = cfg.value("replicates", spec.replicates);
  spec.seed = cfg.value("seed", static_cast<std::uint64_t>(1));
  spec.marginal_calibration = cfg.value("marginal_calibration", false);

  std::vector<double> sweep = cfg.value("sweep", jointfair::default_sweep(spec.scenario));

  jointfair::RunSettings settings;
  settings.workers = a.workers;
  settings.fit_options = fit_options_from_json(cfg);
  settings.models.clear();
  std::string models_csv = a.models;
  if (models_csv == "all" && cfg.contains("models")) {
    models_csv.clear();
    for (const auto& m : cfg["models"]) {
      models_csv += (models_csv.empty() ? "" : ",") + m.get<std::string>();
    }
  }
  if (models_csv == "all") models_csv = "jfm,sfm,separate,ignorant";
  {
    std::stringstream ss(models_csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (!tok.empty()) settings.models.push_back(jointfair::parse_model_kind(tok));
    }
  }
  if (settings.models.empty()) throw jointfair::ValidationError("no models selected");

  if (cfg.contains("grid")) {
    settings.grid = grid_from_json(cfg["grid"]);
    settings.cv.folds = cfg.value("folds", 5);
    settings.cv.seed = spec.seed;
  } else if (cfg.contains("hyperparameters")) {
    for (const auto& [name, doc] : cfg["hyperparameters"].items()) {
      settings.fixed_hypers[jointfair::parse_model_kind(name)] = hypers_from_json(doc, 2);
    }
    for (ModelKind m : settings.models) {
      if (!settings.fixed_hypers.count(m)) {
        throw jointfair::ValidationError(std::string("config lacks hyperparameters for model ") +
                                         to_string(m));
      }
    }
  } else {
    settings.fixed_hypers = default_sim_hypers(spec);
  }

  std::filesystem::create_directories(a.out_dir);
  const std::filesystem::path dir(a.out_dir);

  std::vector<std::tuple<double, int, jointfair::SimulatedTruth>> truths;
  const auto table = jointfair::run_replicates(
      spec, sweep, settings, [&](double sv, int rep, const jointfair::SimulatedTruth& t) {
        truths.emplace_back(sv, rep, t);
      });

  // Plot-ready CSV, deterministic row order.
  auto rows = table.rows;
  std::sort(rows.begin(), rows.end(), [](const auto& x, const auto& y) {
    return std::tie(x.sweep_value, x.model, x.metric) < std::tie(y.sweep_value, y.model, y.metric);
  });
  std::ostringstream csv;
  csv << "sweep_value,model,metric,median,q1,q3\n";
  for (const auto& r : rows) {
    csv << format_double(r.sweep_value) << ',' << r.model << ',' << r.metric << ','
        << format_double(r.median) << ',' << format_double(r.q1) << ',' << format_double(r.q3)
        << '\n';
  }
  write_text((dir / "results.csv").string(), csv.str());

  for (const auto& [sv, rep, truth] : truths) {
    json t;
    t["sweep_value"] = sv;
    t["replicate"] = rep;
    t["intercepts_true"] =
        std::vector<double>(truth.intercepts_true.begin(), truth.intercepts_true.end());
    json betas = json::array();
    json supports = json::array();
    for (std::size_t k = 0; k < truth.beta_true.size(); ++k) {
      betas.push_back(std::vector<double>(truth.beta_true[k].begin(), truth.beta_true[k].end()));
      supports.push_back(truth.support_sets[k]);
    }
    t["beta_true"] = std::move(betas);
    t["support_sets"] = std::move(supports);
    std::ostringstream name;
    name << "truth_s" << format_double(sv) << "_r" << rep << ".json";
    write_text((dir / name.str()).string(), t.dump(2) + "\n");
  }

  ManifestWriter manifest;
  manifest.command = "simulate";
  manifest.seed = spec.seed;
  json resolved = cfg;
  resolved["scenario"] = a.scenario;
  resolved["sweep"] = sweep;
  resolved["models"] = models_csv;
  resolved["replicates"] = spec.replicates;
  resolved["seed"] = spec.seed;
  manifest.resolved_config = resolved;
  manifest.write((dir / "manifest.json").string());

  if (table.replicates_failed > 0) {
    std::cerr << "warning: " << table.replicates_failed << " of " << table.replicates_attempted
              << " replicates failed and were excluded\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvalArgs {
  std::string fit_path, data_path;
  std::string group_col = "group", label_col = "label";
  double cutoff = 0.5;
  std::string out = "metrics.json";
};

int run_evaluate(const EvalArgs& a) {
  const FitResult fit = jointfair::fit_from_json(load_json(a.fit_path));
  const GroupedDesign test = jointfair::load_csv(a.data_path, a.group_col, a.label_col);

  if (test.feature_names != fit.feature_names) {
    std::string msg = "feature names do not match the fit;";
    bool listed = false;
    for (const auto& n : fit.feature_names) {
      if (std::find(test.feature_names.begin(), test.feature_names.end(), n) ==
          test.feature_names.end()) {
        msg += " missing '" + n + "'";
        listed = true;
      }
    }
    for (const auto& n : test.feature_names) {
      if (std::find(fit.feature_names.begin(), fit.feature_names.end(), n) ==
          fit.feature_names.end()) {
        msg += " unexpected '" + n + "'";
        listed = true;
      }
    }
    if (!listed) msg += " column order differs";
    throw jointfair::ValidationError(msg);
  }

  std::vector<std::pair<std::string, jointfair::GroupMetrics>> per_group;
  for (const auto& g : test.groups) {
    const Vector probs = jointfair::predict(fit, g.X, g.group_id);
    jointfair::GroupMetrics gm;
    gm.auc = jointfair::auc(probs, g.y);
    gm.brier = jointfair::brier(probs, g.y);
    const auto cr = jointfair::confusion_rates(probs, g.y, a.cutoff);
    gm.fpr = cr.fpr;
    gm.fnr = cr.fnr;
    gm.tpr = cr.tpr;
    gm.tnr = cr.tnr;
    gm.avg_tpr_tnr = (cr.tpr + cr.tnr) / 2.0;
    per_group.emplace_back(g.group_id, gm);
  }
  const auto report = jointfair::build_metric_report(per_group, a.cutoff);

  json doc;
  doc["cutoff"] = report.cutoff;
  json pg;
  for (const auto& [gid, gm] : report.per_group) {
    pg[gid] = {{"auc", gm.auc}, {"brier", gm.brier},       {"fpr", gm.fpr},
               {"fnr", gm.fnr}, {"tpr", gm.tpr},           {"tnr", gm.tnr},
               {"avg_tpr_tnr", gm.avg_tpr_tnr}};
  }
  doc["per_group"] = std::move(pg);
  doc["disparity"] = report.disparity;
  write_text(a.out, doc.dump(2) + "\n");

  ManifestWriter manifest;
  manifest.command = "evaluate";
  manifest.resolved_config = {{"fit", a.fit_path},
                              {"data", a.data_path},
                              {"group_col", a.group_col},
                              {"label_col", a.label_col},
                              {"cutoff", a.cutoff}};
  manifest.write(a.out + ".manifest.json");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint fairness model toolkit: grouped sparse logistic regression with "
               "fairness and similarity penalties"};
  app.require_subcommand(1);

  FitArgs fit_args;
  auto* fit_cmd = app.add_subcommand("fit", "Fit one model and write fit.json");
  fit_cmd->add_option("data", fit_args.data_path, "training CSV")->required();
  fit_cmd->add_option("--model", fit_args.model, "jfm|sfm|separate|ignorant");
  fit_cmd->add_option("--group-col", fit_args.group_col, "group column name");
  fit_cmd->add_option("--label-col", fit_args.label_col, "label column name");
  fit_cmd->add_option("--lambda-f", fit_args.lambda_f, "fairness penalty weight");
  fit_cmd->add_option("--lambda-sim", fit_args.lambda_sim, "similarity penalty weight");
  fit_cmd->add_option("--lambda-sp", fit_args.lambda_sp,
                      "sparsity weight(s); one value or one per group");
  fit_cmd->add_option("--out", fit_args.out, "output fit JSON path");
  fit_cmd->add_option("--mu", fit_args.mu, "smoothing parameter (0 = auto)");
  fit_cmd->add_option("--epsilon", fit_args.epsilon, "convergence tolerance");
  fit_cmd->add_option("--max-iter", fit_args.max_iter, "iteration cap");
  fit_cmd->add_flag("--tight-lipschitz", fit_args.tight_lipschitz,
                    "scale curvature terms by the loss weights");
  fit_cmd->add_flag("--no-fairness-intercept", fit_args.no_fairness_intercept,
                    "exclude intercepts from the fairness rows");
  fit_cmd->add_flag("--unpenalized-dummies", fit_args.unpenalized_dummies,
                    "leave group dummies unpenalized (ignorant model)");
  fit_cmd->add_option("--dump-operator", fit_args.dump_operator,
                      "write the stacked penalty matrix to this CSV");

  CvArgs cv_args;
  auto* cv_cmd = app.add_subcommand("cv", "Cross-validated hyperparameter search");
  cv_cmd->add_option("data", cv_args.data_path, "training CSV")->required();
  cv_cmd->add_option("--model", cv_args.model, "jfm|sfm|separate|ignorant");
  cv_cmd->add_option("--group-col", cv_args.group_col, "group column name");
  cv_cmd->add_option("--label-col", cv_args.label_col, "label column name");
  cv_cmd->add_option("--grid", cv_args.grid_path, "grid JSON (defaults when omitted)");
  cv_cmd->add_option("--folds", cv_args.folds, "stratified folds");
  cv_cmd->add_option("--criterion", cv_args.criterion, "selection criterion");
  cv_cmd->add_option("--seed", cv_args.seed, "fold-shuffle seed");
  cv_cmd->add_option("--out-table", cv_args.out_table, "score table CSV path");
  cv_cmd->add_option("--out-best", cv_args.out_best, "best-hyperparameters JSON path");
  cv_cmd->add_option("--workers,-j", cv_args.workers, "parallel grid cells (JF_WORKERS)");
  cv_cmd->add_option("--mu", cv_args.mu, "smoothing parameter (0 = auto)");
  cv_cmd->add_option("--epsilon", cv_args.epsilon, "convergence tolerance");
  cv_cmd->add_option("--max-iter", cv_args.max_iter, "iteration cap");

  SimArgs sim_args;
  auto* sim_cmd = app.add_subcommand("simulate", "Replicate study over a scenario sweep");
  sim_cmd->add_option("--scenario", sim_args.scenario, "1, 2, or 3")->required();
  sim_cmd->add_option("--config", sim_args.config_path, "scenario config JSON");
  sim_cmd->add_option("--models", sim_args.models, "comma list or 'all'");
  sim_cmd->add_option("--out", sim_args.out_dir, "output directory");
  sim_cmd->add_option("--workers,-j", sim_args.workers, "parallel replicates (JF_WORKERS)");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score a saved fit on a test CSV");
  eval_cmd->add_option("fit", eval_args.fit_path, "fit JSON")->required();
  eval_cmd->add_option("data", eval_args.data_path, "test CSV")->required();
  eval_cmd->add_option("--group-col", eval_args.group_col, "group column name");
  eval_cmd->add_option("--label-col", eval_args.label_col, "label column name");
  eval_cmd->add_option("--cutoff", eval_args.cutoff, "classification cutoff");
  eval_cmd->add_option("--out", eval_args.out, "metrics JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (fit_cmd->parsed()) return run_fit(fit_args);
    if (cv_cmd->parsed()) return run_cv(cv_args);
    if (sim_cmd->parsed()) return run_simulate(sim_args);
    if (eval_cmd->parsed()) return run_evaluate(eval_args);
  } catch (const jointfair::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const jointfair::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

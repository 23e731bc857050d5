#include <catch2/catch.hpp>

#include "jointfair/models.hpp"
#include "jointfair/rng.hpp"
#include "jointfair/simulation.hpp"
#include "oracles.hpp"

using namespace jointfair;

namespace {

GroupedDesign random_design(Rng& rng, std::vector<int> sizes, Eigen::Index p,
                            double signal = 1.0) {
  GroupedDesign d;
  for (Eigen::Index j = 0; j < p; ++j) d.feature_names.push_back("x" + std::to_string(j));
  Vector beta(p);
  for (Eigen::Index j = 0; j < p; ++j) beta[j] = signal * rng.normal();
  int gid = 1;
  for (int n : sizes) {
    GroupRecord g;
    g.group_id = std::to_string(gid++);
    g.X.resize(n, p);
    g.y.resize(n);
    for (int i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < p; ++j) g.X(i, j) = rng.normal();
      g.y[i] = rng.bernoulli(sigmoid(g.X.row(i).dot(beta)));
    }
    d.groups.push_back(std::move(g));
  }
  return d;
}

Matrix pooled_augmented(const GroupedDesign& d) {
  Matrix x(d.total_samples(), d.num_features() + 1);
  Eigen::Index at = 0;
  for (const auto& g : d.groups) {
    x.block(at, 0, g.X.rows(), 1).setOnes();
    x.block(at, 1, g.X.rows(), d.num_features()) = g.X;
    at += g.X.rows();
  }
  return x;
}

Vector pooled_labels(const GroupedDesign& d) {
  Vector y(d.total_samples());
  Eigen::Index at = 0;
  for (const auto& g : d.groups) {
    y.segment(at, g.y.size()) = g.y;
    at += g.y.size();
  }
  return y;
}

}  // namespace

TEST_CASE("jfm with zero fairness and fusion weights equals group-separate") {
  Rng rng(131);
  const GroupedDesign d = random_design(rng, {40, 30}, 3, 0.7);
  FitOptions opt;
  opt.epsilon = 1e-9;
  opt.max_iter = 200000;
  const FitResult joint = fit_jfm(d, 0.0, 0.0, {0.05, 0.05}, opt);
  const FitResult sep = fit_group_separate(d, {0.05, 0.05}, opt);
  for (int k = 0; k < 2; ++k) {
    CHECK((joint.coefficients[k] - sep.coefficients[k]).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(std::abs(joint.intercepts[k] - sep.intercepts[k]) < 1e-6);
  }
}

TEST_CASE("jfm fusion limit makes the group coefficients agree") {
  Rng rng(137);
  const GroupedDesign d = random_design(rng, {30, 30}, 3, 0.7);
  const FitResult fit = fit_jfm(d, 0.0, 1e6, {0.01, 0.01});
  CHECK((fit.coefficients[0] - fit.coefficients[1]).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("jfm refuses a single group") {
  Rng rng(139);
  const GroupedDesign d = random_design(rng, {20}, 2);
  CHECK_THROWS_WITH(fit_jfm(d, 0.1, 0.1, {0.1}), Catch::Contains("separate"));
}

TEST_CASE("jfm borrowing beats separate fits for the minority group when truths agree") {
  // Scenario-1-like generator at 100% sharing, desk scale.
  ScenarioSpec spec;
  spec.scenario = Scenario::shared_fraction_sweep;
  spec.p = 10;
  spec.n_nonzero = 4;
  spec.shared_fraction = 1.0;
  spec.n1 = 150;
  spec.n2 = 30;
  spec.coef_value = 1.0;
  spec.n_test = 50;
  spec.seed = 424242;

  FitOptions opt;
  opt.mu = 1e-3;
  int jfm_wins = 0;
  const int reps = 20;
  for (int r = 0; r < reps; ++r) {
    const ScenarioDraw draw = generate_scenario(spec, r);
    const FitResult joint = fit_jfm(draw.train, 0.05, 0.2, {0.05, 0.1}, opt);
    const FitResult sep = fit_group_separate(draw.train, {0.05, 0.1}, opt);
    const double mse_joint =
        coefficient_mse(joint.raw_coefficients(1), draw.truth.beta_true[1]);
    const double mse_sep = coefficient_mse(sep.raw_coefficients(1), draw.truth.beta_true[1]);
    if (mse_joint <= mse_sep) ++jfm_wins;
  }
  CHECK(jfm_wins >= 15);
}

TEST_CASE("stacked operator image equals the penalty computed from raw sample sums") {
  Rng rng(547);
  for (int draw = 0; draw < 20; ++draw) {
    const int K = 2 + static_cast<int>(rng.bounded(2));
    std::vector<int> sizes;
    for (int k = 0; k < K; ++k) sizes.push_back(8 + static_cast<int>(rng.bounded(10)));
    const GroupedDesign d = random_design(rng, sizes, 3, 0.6);
    bool both = true;
    for (const auto& g : d.groups) {
      const double s = g.y.sum();
      if (s == 0.0 || s == static_cast<double>(g.y.size())) both = false;
    }
    if (!both) continue;

    const double lf = rng.uniform01();
    const double ls = rng.uniform01();
    const PenaltyOperator op = build_jfm_operator(d, lf, ls);

    Vector beta(4 * K);
    for (Eigen::Index i = 0; i < beta.size(); ++i) beta[i] = rng.normal();

    std::vector<Matrix> xs;
    std::vector<Vector> ys;
    std::vector<Vector> blocks, coef_blocks;
    for (int k = 0; k < K; ++k) {
      xs.push_back(d.groups[static_cast<std::size_t>(k)].X);
      ys.push_back(d.groups[static_cast<std::size_t>(k)].y);
      blocks.push_back(beta.segment(4 * k, 4));
      coef_blocks.push_back(beta.segment(4 * k + 1, 3));
    }
    const double expected = oracles::fairness_penalty_direct(xs, ys, blocks, lf) +
                            oracles::fusion_penalty_direct(coef_blocks, ls);
    const double via_operator = (op.stacked * beta).cwiseAbs().sum();
    CHECK(via_operator == Approx(expected).epsilon(1e-10).margin(1e-10));
  }
}

TEST_CASE("the fairness-intercept switch zeroes the intercept columns") {
  Rng rng(557);
  const GroupedDesign d = random_design(rng, {12, 10}, 3, 0.6);
  FitOptions opt;
  opt.fairness_includes_intercept = false;
  const PenaltyOperator op = build_jfm_operator(d, 1.0, 0.0, opt);
  for (int k = 0; k < 2; ++k) {
    CHECK(op.stacked.col(4 * k).isZero(0.0));
  }
  const PenaltyOperator with = build_jfm_operator(d, 1.0, 0.0);
  CHECK(with.stacked(0, 0) == 1.0);
  CHECK(with.stacked(0, 4) == -1.0);
}

TEST_CASE("sfm with zero fairness equals the pooled lasso-logistic oracle") {
  Rng rng(149);
  const GroupedDesign d = random_design(rng, {25, 20}, 3, 0.6);
  FitOptions opt;
  opt.epsilon = 1e-10;
  opt.max_iter = 300000;
  const double lambda = 0.5;
  const FitResult fit = fit_sfm(d, 0.0, lambda, opt);

  // The pooled fit sees standardized features; reproduce that for the oracle.
  auto [sd, params] = standardize(d);
  const Matrix x_aug = pooled_augmented(sd);
  const Vector y = pooled_labels(sd);
  const Vector oracle = oracles::ista_lasso_logistic(x_aug, y, 1.0, lambda, 1e-10);

  const double mine = oracles::lasso_logistic_objective(
      x_aug, y, 1.0, lambda,
      (Vector(4) << fit.intercepts[0], fit.coefficients[0]).finished());
  const double theirs = oracles::lasso_logistic_objective(x_aug, y, 1.0, lambda, oracle);
  CHECK(std::abs(mine - theirs) < 1e-6);
}

TEST_CASE("sfm on mirrored groups matches its own zero-fairness fit") {
  Rng rng(151);
  GroupedDesign d = random_design(rng, {30}, 3, 0.7);
  GroupRecord copy = d.groups[0];
  copy.group_id = "2";
  d.groups.push_back(copy);  // identical groups: all fairness rows vanish

  const FitResult with_fair = fit_sfm(d, 5.0, 0.05);
  const FitResult without = fit_sfm(d, 0.0, 0.05);
  CHECK((with_fair.coefficients[0] - without.coefficients[0]).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("sfm fairness limit closes the class-mean gaps") {
  Rng rng(157);
  const GroupedDesign d = random_design(rng, {30, 20}, 3, 0.8);
  const FitResult fit = fit_sfm(d, 1e6, 0.01);
  auto [sd, params] = standardize(d);
  const ClassMeans cm = class_conditional_means(sd);
  for (const auto& outcome : {cm.outcome0, cm.outcome1}) {
    const double gap = std::abs(outcome.row(0).dot(fit.coefficients[0]) -
                                outcome.row(1).dot(fit.coefficients[0]));
    CHECK(gap < 1e-3);
  }
}

TEST_CASE("sfm and ignorant fits replicate their shared coefficients exactly") {
  Rng rng(163);
  const GroupedDesign d = random_design(rng, {20, 15}, 3);
  const FitResult sfm = fit_sfm(d, 0.1, 0.05);
  CHECK(sfm.coefficients[0] == sfm.coefficients[1]);
  const FitResult ign = fit_group_ignorant(d, 0.05);
  CHECK(ign.coefficients[0] == ign.coefficients[1]);
}

TEST_CASE("separate fit of one group is plain lasso logistic") {
  Rng rng(167);
  const GroupedDesign d = random_design(rng, {25}, 4, 0.7);
  FitOptions opt;
  opt.epsilon = 1e-10;
  opt.max_iter = 300000;
  const double lambda = 0.08;
  const FitResult fit = fit_group_separate(d, {lambda}, opt);

  auto [sd, params] = standardize(d);
  Matrix x_aug(25, 5);
  x_aug.col(0).setOnes();
  x_aug.rightCols(4) = sd.groups[0].X;
  const Vector oracle =
      oracles::ista_lasso_logistic(x_aug, sd.groups[0].y, 1.0 / 25.0, lambda, 1e-10);
  const Vector mine = (Vector(5) << fit.intercepts[0], fit.coefficients[0]).finished();
  const double obj_mine =
      oracles::lasso_logistic_objective(x_aug, sd.groups[0].y, 1.0 / 25.0, lambda, mine);
  const double obj_oracle =
      oracles::lasso_logistic_objective(x_aug, sd.groups[0].y, 1.0 / 25.0, lambda, oracle);
  CHECK(std::abs(obj_mine - obj_oracle) < 1e-6);
}

TEST_CASE("permuting the group order permutes separate fits correspondingly") {
  Rng rng(173);
  GroupedDesign d = random_design(rng, {20, 26}, 3, 0.6);
  GroupedDesign swapped = d;
  std::swap(swapped.groups[0], swapped.groups[1]);

  const FitResult a = fit_group_separate(d, {0.05, 0.02});
  const FitResult b = fit_group_separate(swapped, {0.02, 0.05});
  CHECK(a.coefficients[0] == b.coefficients[1]);
  CHECK(a.coefficients[1] == b.coefficients[0]);
  CHECK(a.intercepts[0] == b.intercepts[1]);
}

TEST_CASE("ignorant fit on duplicated groups zeroes the dummy") {
  Rng rng(179);
  GroupedDesign d = random_design(rng, {30}, 3, 0.7);
  GroupRecord copy = d.groups[0];
  copy.group_id = "2";
  d.groups.push_back(copy);

  FitOptions opt;
  opt.epsilon = 1e-9;
  opt.max_iter = 200000;
  const FitResult fit = fit_group_ignorant(d, 0.05, opt);
  CHECK(std::abs(fit.dummy_coefficients[1].second) < 1e-6);
  CHECK(std::abs(fit.intercepts[0] - fit.intercepts[1]) < 1e-6);

  // Equals the pooled lasso on the shared slopes.
  auto [sd, params] = standardize(d);
  const Matrix x_aug = pooled_augmented(sd);
  const Vector y = pooled_labels(sd);
  const double w = 1.0 / static_cast<double>(d.total_samples());
  const Vector oracle = oracles::ista_lasso_logistic(x_aug, y, w, 0.05, 1e-10);
  CHECK((fit.coefficients[0] - oracle.tail(3)).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("unpenalized ignorant fit matches the Newton oracle with a dummy column") {
  Rng rng(181);
  const GroupedDesign d = random_design(rng, {18, 14}, 2, 0.5);
  FitOptions opt;
  opt.epsilon = 1e-11;
  opt.max_iter = 500000;
  const FitResult fit = fit_group_ignorant(d, 0.0, opt);

  auto [sd, params] = standardize(d);
  Matrix x_aug(32, 4);  // intercept, 2 features, dummy for group 2
  x_aug.setZero();
  x_aug.col(0).setOnes();
  x_aug.block(0, 1, 18, 2) = sd.groups[0].X;
  x_aug.block(18, 1, 14, 2) = sd.groups[1].X;
  x_aug.block(18, 3, 14, 1).setOnes();
  const Vector y = pooled_labels(sd);
  const Vector mle = oracles::newton_logistic(x_aug, y);

  CHECK(std::abs(fit.intercepts[0] - mle[0]) < 1e-4);
  CHECK((fit.coefficients[0] - mle.segment(1, 2)).cwiseAbs().maxCoeff() < 1e-4);
  CHECK(std::abs(fit.dummy_coefficients[1].second - mle[3]) < 1e-4);
}

TEST_CASE("prediction for a group uses its reconstructed intercept") {
  Rng rng(191);
  const GroupedDesign d = random_design(rng, {22, 18}, 2, 0.6);
  const FitResult fit = fit_group_ignorant(d, 0.02);
  const Matrix probe = Matrix::Zero(1, 2);
  const double p1 = predict(fit, probe, "1")[0];
  const double p2 = predict(fit, probe, "2")[0];
  const Vector xs = apply_standardization(probe, fit.standardization).row(0).transpose();
  CHECK(p1 == Approx(sigmoid(fit.intercepts[0] + xs.dot(fit.coefficients[0]))));
  CHECK(p2 == Approx(sigmoid(fit.intercepts[1] + xs.dot(fit.coefficients[1]))));
  CHECK(fit.intercepts[1] ==
        Approx(fit.intercepts[0] - fit.dummy_coefficients[0].second +
               fit.dummy_coefficients[1].second));
}

TEST_CASE("predict saturates cleanly and errors on unknown groups") {
  FitResult fit;
  fit.model_kind = "separate";
  fit.group_ids = {"a"};
  fit.feature_names = {"x"};
  fit.coefficients = {Vector::Zero(1)};
  fit.intercepts = Vector::Zero(1);
  fit.standardization.means = Vector::Zero(1);
  fit.standardization.scales = Vector::Ones(1);

  Matrix x(1, 1);
  x << 0.0;
  CHECK(predict(fit, x, "a")[0] == 0.5);

  fit.coefficients[0][0] = 1000.0;
  x << 1.0;
  CHECK(predict(fit, x, "a")[0] == 1.0);  // saturates without overflow
  x << -1.0;
  CHECK(predict(fit, x, "a")[0] == 0.0);  // mirror saturation, no NaN

  CHECK_THROWS_WITH(predict(fit, x, "zz"), Catch::Contains("known: a"));
}

TEST_CASE("probabilities stay in [0,1] and increase with the linear predictor") {
  Rng rng(193);
  const GroupedDesign d = random_design(rng, {30, 20}, 2, 0.8);
  const FitResult fit = fit_jfm(d, 0.05, 0.05, {0.02});
  Matrix grid(9, 2);
  for (int i = 0; i < 9; ++i) {
    grid(i, 0) = -2.0 + 0.5 * i;
    grid(i, 1) = 0.0;
  }
  const Vector probs = predict(fit, grid, "1");
  double prev = -1.0;
  const double slope = fit.coefficients[0][0];
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    CHECK(probs[i] >= 0.0);
    CHECK(probs[i] <= 1.0);
    if (i > 0 && slope > 0.0) CHECK(probs[i] >= prev);
    if (i > 0 && slope < 0.0) CHECK(probs[i] <= prev);
    prev = probs[i];
  }
}

TEST_CASE("score equation holds at an unregularized converged fit") {
  Rng rng(197);
  const GroupedDesign d = random_design(rng, {40}, 3, 0.5);
  FitOptions opt;
  opt.epsilon = 1e-11;
  opt.max_iter = 500000;
  const FitResult fit = fit_group_separate(d, {0.0}, opt);
  const Vector probs = predict(fit, d.groups[0].X, "1");
  const Vector resid = d.groups[0].y - probs;
  auto [sd, params] = standardize(d);
  CHECK(std::abs(resid.sum()) < 1e-6);
  CHECK((sd.groups[0].X.transpose() * resid).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("fit JSON round-trips through serialization") {
  Rng rng(199);
  GroupedDesign d = random_design(rng, {20, 15}, 3, 0.6);
  // Non-alphabetical ids: the round trip must keep design order anyway.
  d.groups[0].group_id = "z";
  d.groups[1].group_id = "a";
  const FitResult fit = fit_group_ignorant(d, 0.03);
  const FitResult back = fit_from_json(fit_to_json(fit));
  CHECK(back.model_kind == fit.model_kind);
  CHECK(back.group_ids == fit.group_ids);
  CHECK(back.feature_names == fit.feature_names);
  for (int k = 0; k < 2; ++k) {
    CHECK(back.coefficients[k] == fit.coefficients[k]);
    CHECK(back.intercepts[k] == fit.intercepts[k]);
  }
  CHECK(back.dummy_coefficients == fit.dummy_coefficients);
  CHECK(back.lambda_sp == fit.lambda_sp);
  CHECK(back.standardization.means == fit.standardization.means);
  CHECK(back.convergence.iterations == fit.convergence.iterations);

  Matrix probe(2, 3);
  probe << 0.1, -0.2, 0.3, 1.0, 0.0, -1.0;
  CHECK(predict(back, probe, "a") == predict(fit, probe, "a"));
  CHECK(back.group_ids == std::vector<std::string>{"z", "a"});
}

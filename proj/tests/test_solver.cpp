#include <catch2/catch.hpp>

#include "jointfair/models.hpp"
#include "jointfair/rng.hpp"
#include "jointfair/solver.hpp"
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

JointProblem lasso_problem(const GroupedDesign& d, double lambda) {
  return JointProblem::from_design(
      d, PenaltyOperator::zero(0),
      std::vector<double>(static_cast<std::size_t>(d.num_groups()), lambda));
}

}  // namespace

TEST_CASE("soft threshold shrinks, kills, and passes through") {
  Vector v(3);
  v << 2.0, -0.3, 1.5;
  Vector t(3);
  t << 0.5, 0.5, 0.0;
  const Vector out = soft_threshold(v, t);
  CHECK(out[0] == Approx(1.5));
  CHECK(out[1] == 0.0);
  CHECK(out[2] == Approx(1.5));

  CHECK_THROWS_AS(soft_threshold(v, -0.1), ValidationError);
}

TEST_CASE("weighted loss at zero is K log 2 with the sigmoid(0) gradient") {
  Rng rng(71);
  const GroupedDesign d = random_design(rng, {8, 5}, 3);
  const JointProblem prob = lasso_problem(d, 0.0);
  const Vector beta = Vector::Zero(prob.dim());
  const auto [value, grad] = weighted_loss_grad(prob, beta);
  CHECK(value == Approx(2.0 * std::log(2.0)));
  for (int k = 0; k < 2; ++k) {
    const auto& x = prob.X[static_cast<std::size_t>(k)];
    const auto& y = prob.y[static_cast<std::size_t>(k)];
    const Vector expected =
        (x.transpose() * (Vector::Constant(y.size(), 0.5) - y)) / static_cast<double>(y.size());
    CHECK((grad.segment(4 * k, 4) - expected).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("weighted loss matches the high-precision scalar case") {
  GroupedDesign d;
  d.feature_names = {"x"};
  GroupRecord g{"1", Matrix(1, 1), Vector(1)};
  g.X << 1.0;
  g.y << 1.0;
  d.groups = {g};
  JointProblem prob = lasso_problem(d, 0.0);
  Vector beta(2);
  beta << 0.0, 10.0;  // intercept 0, slope 10 so x*beta = 10
  const auto [value, grad] = weighted_loss_grad(prob, beta);
  // value = log1p(exp(-10)) up to the cancellation in (z + log1p(exp(-z))) - z
  CHECK(value == Approx(4.539889921686465e-05).epsilon(1e-9));
  CHECK(grad[1] == Approx(-4.5397868702434395e-05).epsilon(1e-12));
}

TEST_CASE("weighted loss gradient matches central finite differences") {
  Rng rng(73);
  const GroupedDesign d = random_design(rng, {12, 7}, 4);
  const JointProblem prob = lasso_problem(d, 0.0);
  Vector beta(prob.dim());
  for (Eigen::Index i = 0; i < beta.size(); ++i) beta[i] = 0.5 * rng.normal();

  const Vector grad = weighted_loss_grad(prob, beta).second;
  const Vector fd = oracles::fd_gradient(
      [&](const Vector& b) { return weighted_loss_grad(prob, b).first; }, beta, 1e-6);
  CHECK((grad - fd).norm() < 1e-6 * (1.0 + grad.norm()));
}

TEST_CASE("lipschitz constant follows the explicit formula") {
  // Identity designs, no penalty rows: L = 1/4.
  std::vector<Matrix> xs{Matrix::Identity(2, 2), Matrix::Identity(2, 2)};
  CHECK(lipschitz_constant(xs, PenaltyOperator::zero(4), 1.0) == Approx(0.25));

  // Zero design, ||D|| = 2, mu = 0.5: L = 8.
  Matrix row = Matrix::Zero(1, 2);
  row(0, 0) = 2.0;
  const PenaltyOperator op = PenaltyOperator::from_stacked(std::move(row));
  std::vector<Matrix> zero_xs{Matrix::Zero(3, 2)};
  CHECK(lipschitz_constant(zero_xs, op, 0.5) == Approx(8.0));
}

TEST_CASE("lipschitz constant matches the dense eigensolver oracle") {
  Rng rng(79);
  for (int draw = 0; draw < 10; ++draw) {
    Matrix x(6, 4);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i / 4, i % 4) = rng.normal();
    Matrix rows(3, 4);
    for (Eigen::Index i = 0; i < rows.size(); ++i) rows(i / 4, i % 4) = rng.normal();
    const PenaltyOperator op = PenaltyOperator::from_stacked(std::move(rows));
    const double mu = 0.1 + rng.uniform01();

    const double expected = 0.25 * oracles::gram_eig_max(x) +
                            std::pow(oracles::svd_largest(op.stacked), 2) / mu;
    CHECK(lipschitz_constant({x}, op, mu) == Approx(expected).epsilon(1e-6));
  }
}

TEST_CASE("unregularized solve matches the Newton oracle") {
  Rng rng(83);
  const GroupedDesign d = random_design(rng, {20}, 2, 0.8);
  SolverConfig cfg;
  cfg.lambda_sp = {0.0};
  cfg.epsilon = 1e-10;
  cfg.max_iter = 200000;
  const auto [beta, conv] = aspg_solve(lasso_problem(d, 0.0), cfg);
  REQUIRE(conv.converged);

  Matrix x_aug(20, 3);
  x_aug.col(0).setOnes();
  x_aug.rightCols(2) = d.groups[0].X;
  const Vector mle = oracles::newton_logistic(x_aug, d.groups[0].y);
  CHECK((beta - mle).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("huge sparsity weight zeroes every feature and leaves the intercept MLE") {
  Rng rng(89);
  const GroupedDesign d = random_design(rng, {30, 25}, 3);
  SolverConfig cfg;
  cfg.lambda_sp = {1e6, 1e6};
  cfg.epsilon = 1e-10;
  cfg.max_iter = 100000;
  const auto [beta, conv] = aspg_solve(lasso_problem(d, 1e6), cfg);
  for (int k = 0; k < 2; ++k) {
    const auto block = beta.segment(4 * k, 4);
    CHECK(block.tail(3).cwiseAbs().maxCoeff() == 0.0);  // exact zeros via prox
    const double ybar = d.groups[static_cast<std::size_t>(k)].y.mean();
    CHECK(block[0] == Approx(logit(ybar)).margin(1e-6));
  }
}

TEST_CASE("K=1 lasso solve reaches the independent ISTA oracle objective") {
  Rng rng(97);
  const GroupedDesign d = random_design(rng, {20}, 5, 0.7);
  const double lambda = 0.1;

  SolverConfig cfg;
  cfg.lambda_sp = {lambda};
  cfg.epsilon = 1e-10;
  cfg.max_iter = 200000;
  const JointProblem prob = lasso_problem(d, lambda);
  const auto [beta, conv] = aspg_solve(prob, cfg);

  Matrix x_aug(20, 6);
  x_aug.col(0).setOnes();
  x_aug.rightCols(5) = d.groups[0].X;
  const double w = 1.0 / 20.0;
  const Vector oracle = oracles::ista_lasso_logistic(x_aug, d.groups[0].y, w, lambda, 1e-10);

  const double mine = objective_value(prob, 0.0, beta).exact;
  const double theirs = oracles::lasso_logistic_objective(x_aug, d.groups[0].y, w, lambda, oracle);
  CHECK(mine <= theirs + 1e-6);
  CHECK(std::abs(mine - theirs) < 1e-6);
}

TEST_CASE("objective value: penalties vanish at zero and the gap bound holds") {
  Rng rng(101);
  GroupedDesign d = random_design(rng, {10, 10}, 2);
  auto [sd, params] = standardize(d);
  const PenaltyOperator op = build_jfm_operator(sd, 0.4, 0.7);
  const JointProblem prob = JointProblem::from_design(sd, op, {0.1, 0.1});

  const Vector zero = Vector::Zero(prob.dim());
  const ObjectivePair at_zero = objective_value(prob, 0.0, zero);
  CHECK(at_zero.exact == Approx(2.0 * std::log(2.0)));
  CHECK(at_zero.smoothed == Approx(2.0 * std::log(2.0)));

  const double mu = 0.01;
  for (int draw = 0; draw < 20; ++draw) {
    Vector beta(prob.dim());
    for (Eigen::Index i = 0; i < beta.size(); ++i) beta[i] = rng.normal();
    const ObjectivePair obj = objective_value(prob, mu, beta);
    const double gap = obj.exact - obj.smoothed;
    CHECK(gap >= -1e-12);
    CHECK(gap <= mu * static_cast<double>(op.rows()) / 2.0 + 1e-12);
  }
}

TEST_CASE("exact and smoothed objectives coincide without penalty rows") {
  Rng rng(103);
  const GroupedDesign d = random_design(rng, {15}, 3);
  const JointProblem prob = lasso_problem(d, 0.0);
  Vector beta(prob.dim());
  for (Eigen::Index i = 0; i < beta.size(); ++i) beta[i] = rng.normal();
  const ObjectivePair obj = objective_value(prob, 0.0, beta);
  CHECK(obj.exact == Approx(weighted_loss_grad(prob, beta).first));
  CHECK(obj.exact == obj.smoothed);
}

TEST_CASE("the exact objective equals an end-to-end independent recomputation") {
  Rng rng(379);
  for (int draw = 0; draw < 10; ++draw) {
    GroupedDesign d = random_design(rng, {15, 11}, 3, 0.8);
    if (d.groups[0].y.sum() == 0 || d.groups[0].y.sum() == 15) continue;
    if (d.groups[1].y.sum() == 0 || d.groups[1].y.sum() == 11) continue;
    const double lf = rng.uniform01();
    const double ls = rng.uniform01();
    const double lsp = 0.5 * rng.uniform01();
    const PenaltyOperator op = build_jfm_operator(d, lf, ls);
    const JointProblem prob = JointProblem::from_design(d, op, {lsp, lsp});
    Vector beta(prob.dim());
    for (Eigen::Index i = 0; i < beta.size(); ++i) beta[i] = rng.normal();

    // Independent route: per-sample likelihood sums plus the three penalty
    // definitions evaluated directly from the raw group data.
    double expected = 0.0;
    std::vector<Matrix> xs;
    std::vector<Vector> ys;
    std::vector<Vector> blocks, coef_blocks;
    for (int k = 0; k < 2; ++k) {
      const auto& g = d.groups[static_cast<std::size_t>(k)];
      const Vector block = beta.segment(4 * k, 4);
      double nll = 0.0;
      for (Eigen::Index i = 0; i < g.y.size(); ++i) {
        const double z = block[0] + g.X.row(i).dot(block.tail(3));
        nll += oracles::log1p_exp(z) - g.y[i] * z;
      }
      expected += nll / static_cast<double>(g.y.size());
      expected += lsp * block.tail(3).cwiseAbs().sum();
      xs.push_back(g.X);
      ys.push_back(g.y);
      blocks.push_back(block);
      coef_blocks.push_back(block.tail(3));
    }
    expected += oracles::fairness_penalty_direct(xs, ys, blocks, lf);
    expected += oracles::fusion_penalty_direct(coef_blocks, ls);

    const double mine = objective_value(prob, 0.0, beta).exact;
    CHECK(mine == Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("converged solutions satisfy the soft-threshold optimality conditions") {
  Rng rng(107);
  GroupedDesign d = random_design(rng, {40, 30}, 4, 0.8);
  auto [sd, params] = standardize(d);
  const PenaltyOperator op = build_jfm_operator(sd, 0.05, 0.05);
  const JointProblem prob = JointProblem::from_design(sd, op, {0.05, 0.05});

  SolverConfig cfg;
  cfg.lambda_sp = {0.05, 0.05};
  cfg.mu = 1e-3;
  cfg.epsilon = 1e-9;
  cfg.max_iter = 300000;
  const auto [beta, conv] = aspg_solve(prob, cfg);
  REQUIRE(conv.converged);
  CHECK(kkt_residual(prob, cfg.mu, beta) < 1e-3);
}

TEST_CASE("a huge similarity weight collapses the group coefficients") {
  Rng rng(109);
  GroupedDesign d = random_design(rng, {25, 25}, 3, 0.8);
  auto [sd, params] = standardize(d);
  const PenaltyOperator op = build_jfm_operator(sd, 0.0, 1e6);
  const JointProblem prob = JointProblem::from_design(sd, op, {0.01, 0.01});

  SolverConfig cfg;
  cfg.lambda_sp = {0.01, 0.01};
  cfg.epsilon = 1e-8;
  cfg.max_iter = 50000;
  const auto [beta, conv] = aspg_solve(prob, cfg);
  const Vector diff = beta.segment(1, 3) - beta.segment(5, 3);
  CHECK(diff.cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("identical inputs produce bit-identical solutions") {
  Rng rng(113);
  GroupedDesign d = random_design(rng, {18, 12}, 3);
  auto [sd, params] = standardize(d);
  const PenaltyOperator op = build_jfm_operator(sd, 0.1, 0.1);
  SolverConfig cfg;
  cfg.lambda_sp = {0.05, 0.05};
  cfg.mu = 1e-3;
  const auto [b1, c1] = aspg_solve(sd, op, cfg);
  const auto [b2, c2] = aspg_solve(sd, op, cfg);
  CHECK(b1 == b2);
  CHECK(c1.iterations == c2.iterations);
  CHECK(c1.objective_exact == c2.objective_exact);
}

TEST_CASE("an overflowing objective raises a numerical failure with the iteration") {
  // Conflicting labels on identical rows keep the minimum loss positive; an
  // absurd loss weight then pushes the objective past the double range even
  // though the iterates themselves are perfectly tame.
  JointProblem prob;
  Matrix x(4, 2);
  x << 1, 1, 1, 1, -1, 2, -1, 2;
  Vector y(4);
  y << 0, 1, 0, 1;
  prob.X = {x};
  prob.y = {y};
  prob.loss_weights = Vector::Constant(1, 1e308);
  prob.op = PenaltyOperator::zero(2);
  prob.threshold = Vector::Zero(2);
  SolverConfig cfg;
  cfg.lambda_sp = {0.0};
  cfg.max_iter = 1000;
  CHECK_THROWS_AS(aspg_solve(prob, cfg), NumericalError);
  CHECK_THROWS_WITH(aspg_solve(prob, cfg), Catch::Contains("iteration"));
}

TEST_CASE("solver reports max_iter stops without converging") {
  Rng rng(127);
  const GroupedDesign d = random_design(rng, {30}, 4);
  SolverConfig cfg;
  cfg.lambda_sp = {0.01};
  cfg.epsilon = 1e-14;
  cfg.max_iter = 3;
  const auto [beta, conv] = aspg_solve(lasso_problem(d, 0.01), cfg);
  CHECK_FALSE(conv.converged);
  CHECK(conv.iterations == 3);
  CHECK(beta.allFinite());
}

#pragma once

#include <Eigen/Sparse>
#include <cmath>
#include <utility>

#include "jointfair/core.hpp"
#include "jointfair/data.hpp"
#include "jointfair/error.hpp"
#include "jointfair/rng.hpp"

namespace jointfair {

// Largest singular value by power iteration on M^T M. Start vector is the
// normalized all-ones direction; if that direction is annihilated by a
// nonzero matrix (it lies in the null space of pure fusion operators) a fixed
// pseudo-random direction is used instead, keeping the result deterministic.
inline double spectral_norm(const Matrix& m) {
  if (m.rows() == 0 || m.cols() == 0) return 0.0;

  Vector v = Vector::Ones(m.cols()) / std::sqrt(static_cast<double>(m.cols()));
  for (int attempt = 0; attempt < 4; ++attempt) {
    double rayleigh = 0.0;
    bool stuck = false;
    for (int it = 0; it < 10000; ++it) {
      Vector mv = m * v;
      const double lambda = mv.squaredNorm();  // v^T M^T M v for unit v
      if (lambda == 0.0) {
        stuck = true;
        break;
      }
      Vector w = m.transpose() * mv;
      const double wn = w.norm();
      if (wn == 0.0) {
        stuck = true;
        break;
      }
      v = w / wn;
      if (it > 0 && std::abs(lambda - rayleigh) <= 1e-12 * lambda) {
        return std::sqrt(lambda);
      }
      rayleigh = lambda;
    }
    if (!stuck) return std::sqrt(rayleigh);
    if (m.isZero(0.0)) return 0.0;
    Rng rng(0x5eedULL + static_cast<std::uint64_t>(attempt));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.uniform01() - 0.5;
    v.normalize();
  }
  return 0.0;
}

inline double largest_eigenvalue_gram(const Matrix& x) {
  const double s = spectral_norm(x);
  return s * s;  // lambda_max(X^T X)
}

struct FairnessMatrices {
  Matrix d0;  // K(K-1)/2 x qK, one row per unordered pair j<k, outcome 0
  Matrix d1;  // same layout, outcome 1
};

// Row for pair (j,k): the group-j class mean in block j and the negated
// group-k class mean in block k. Pairs are enumerated in lexicographic order.
inline FairnessMatrices build_fairness_matrices(const ClassMeans& xbars) {
  const int K = xbars.num_groups();
  if (K < 2) throw ValidationError("fairness matrices need at least 2 groups");
  const Eigen::Index q = xbars.block_size();
  const Eigen::Index pairs = static_cast<Eigen::Index>(K) * (K - 1) / 2;

  FairnessMatrices fm;
  fm.d0.setZero(pairs, q * K);
  fm.d1.setZero(pairs, q * K);
  Eigen::Index row = 0;
  for (int j = 0; j < K; ++j) {
    for (int k = j + 1; k < K; ++k) {
      fm.d0.row(row).segment(q * j, q) = xbars.outcome0.row(j);
      fm.d0.row(row).segment(q * k, q) = -xbars.outcome0.row(k);
      fm.d1.row(row).segment(q * j, q) = xbars.outcome1.row(j);
      fm.d1.row(row).segment(q * k, q) = -xbars.outcome1.row(k);
      ++row;
    }
  }
  return fm;
}

// Pairwise coefficient-difference operator: block-row for pair (j,k) carries
// +I_p in block j and -I_p in block k.
inline Matrix build_fusion_matrix(int K, Eigen::Index p) {
  if (K < 2) throw ValidationError("fusion matrix needs at least 2 groups");
  const Eigen::Index pairs = static_cast<Eigen::Index>(K) * (K - 1) / 2;
  Matrix f = Matrix::Zero(pairs * p, p * K);
  Eigen::Index block = 0;
  for (int j = 0; j < K; ++j) {
    for (int k = j + 1; k < K; ++k) {
      for (Eigen::Index l = 0; l < p; ++l) {
        f(block * p + l, p * j + l) = 1.0;
        f(block * p + l, p * k + l) = -1.0;
      }
      ++block;
    }
  }
  return f;
}

// Same operator acting on intercept-augmented blocks of width p+1; the
// intercept coordinate of each block is skipped (fusion never touches it).
inline Matrix build_fusion_matrix_augmented(int K, Eigen::Index p) {
  if (K < 2) throw ValidationError("fusion matrix needs at least 2 groups");
  const Eigen::Index q = p + 1;
  const Eigen::Index pairs = static_cast<Eigen::Index>(K) * (K - 1) / 2;
  Matrix f = Matrix::Zero(pairs * p, q * K);
  Eigen::Index block = 0;
  for (int j = 0; j < K; ++j) {
    for (int k = j + 1; k < K; ++k) {
      for (Eigen::Index l = 0; l < p; ++l) {
        f(block * p + l, q * j + 1 + l) = 1.0;
        f(block * p + l, q * k + 1 + l) = -1.0;
      }
      ++block;
    }
  }
  return f;
}

// The stacked scaled operator [lambda_f*D0; lambda_f*D1; lambda_sim*F] whose
// L1 image equals the fairness plus fusion penalty at any coefficient vector.
// `stacked` defines the semantics; `sparse` mirrors it for fast application
// (fusion rows carry 2 nonzeros, fairness rows 2 blocks).
struct PenaltyOperator {
  Matrix rows_fpr;     // D0, unscaled
  Matrix rows_fnr;     // D1, unscaled
  Matrix rows_fusion;  // F, unscaled
  double lambda_f = 0.0;
  double lambda_sim = 0.0;
  Matrix stacked;
  Eigen::SparseMatrix<double> sparse;
  double spectral_norm = 0.0;

  Eigen::Index rows() const { return stacked.rows(); }
  Eigen::Index cols() const { return stacked.cols(); }

  Vector apply(const Vector& beta) const { return sparse * beta; }
  Vector apply_adjoint(const Vector& alpha) const { return sparse.transpose() * alpha; }

  // No penalty rows at all (single-group / lasso-only fits).
  static PenaltyOperator zero(Eigen::Index cols) {
    PenaltyOperator op;
    op.rows_fpr.resize(0, cols);
    op.rows_fnr.resize(0, cols);
    op.rows_fusion.resize(0, cols);
    op.stacked.resize(0, cols);
    op.sparse.resize(0, cols);
    return op;
  }

  // Wraps a raw stacked matrix (tests and ad hoc operators).
  static PenaltyOperator from_stacked(Matrix m);
};

inline PenaltyOperator stack_penalty_operator(Matrix d0, Matrix d1, Matrix f, double lambda_f,
                                              double lambda_sim) {
  if (lambda_f < 0.0 || lambda_sim < 0.0) {
    throw ValidationError("penalty weights must be nonnegative");
  }
  const Eigen::Index cols = d0.cols();
  if (d1.cols() != cols || f.cols() != cols) {
    throw ValidationError("penalty blocks disagree on column count");
  }
  PenaltyOperator op;
  op.lambda_f = lambda_f;
  op.lambda_sim = lambda_sim;
  op.stacked.resize(d0.rows() + d1.rows() + f.rows(), cols);
  op.stacked.topRows(d0.rows()) = lambda_f * d0;
  op.stacked.middleRows(d0.rows(), d1.rows()) = lambda_f * d1;
  op.stacked.bottomRows(f.rows()) = lambda_sim * f;
  op.rows_fpr = std::move(d0);
  op.rows_fnr = std::move(d1);
  op.rows_fusion = std::move(f);
  op.sparse = op.stacked.sparseView();
  op.sparse.makeCompressed();
  op.spectral_norm = jointfair::spectral_norm(op.stacked);
  return op;
}

inline PenaltyOperator PenaltyOperator::from_stacked(Matrix m) {
  PenaltyOperator op = PenaltyOperator::zero(m.cols());
  op.stacked = std::move(m);
  op.sparse = op.stacked.sparseView();
  op.sparse.makeCompressed();
  op.spectral_norm = jointfair::spectral_norm(op.stacked);
  return op;
}

}  // namespace jointfair

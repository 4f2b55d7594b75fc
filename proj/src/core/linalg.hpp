#pragma once

#include <Eigen/Dense>

#include "core/errors.hpp"

namespace omnitrack {

/// Lower-triangular Cholesky factor of an SPD matrix, L * L^T = M.
/// Diagonal entries are strictly positive for a valid factor.
struct CholeskyFactor {
  Eigen::MatrixXd L;

  Eigen::Index dim() const { return L.rows(); }
};

/// (M + M^T) / 2. Riccati-style updates accumulate asymmetry; every
/// covariance is passed through this before factorization.
Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m);

/// Cholesky factorization of a symmetric matrix. A pivot at or below
/// 1e-12 * max(diagonal) is treated as loss of positive definiteness
/// and raises NotPositiveDefinite so the caller can reset.
CholeskyFactor cholesky(const Eigen::MatrixXd& m);

/// Solves (L L^T) X = B for X given the factor of the left-hand side.
Eigen::MatrixXd solve_spd(const CholeskyFactor& factor, const Eigen::MatrixXd& b);

/// Squared Mahalanobis distance r^T S^-1 r.
double mahalanobis_sq(const Eigen::VectorXd& residual, const CholeskyFactor& factor);
double mahalanobis_sq(const Eigen::VectorXd& residual, const Eigen::MatrixXd& s);

/// log N(r; 0, L L^T) for a residual r and a covariance factor.
double gaussian_log_density(const Eigen::VectorXd& residual, const CholeskyFactor& factor);

/// log |L L^T| = 2 * sum(log diag(L)).
double log_det(const CholeskyFactor& factor);

/// Compact orthogonal triangularization: returns the square upper-triangular
/// R with R^T R = M^T M and nonnegative diagonal. Requires rows >= cols.
/// Rank deficiency shows up as zero diagonal entries.
Eigen::MatrixXd triangularize(const Eigen::MatrixXd& m);

/// Lower-triangular L with L L^T = C C^T for a compound block matrix C
/// (n x k, k >= n). This is the square-root filters' workhorse.
Eigen::MatrixXd lower_factor_of_blocks(const Eigen::MatrixXd& c);

/// Rank-1 update of a lower Cholesky factor in place:
///   L L^T  <-  L L^T + weight * v v^T.
/// Negative weight performs a downdate and throws NotPositiveDefinite when
/// the downdated matrix is no longer positive definite.
void chol_rank1_update(Eigen::MatrixXd& l, Eigen::VectorXd v, double weight);

struct RepairOutcome {
  Eigen::MatrixXd cov;
  bool reset = false;
};

/// Symmetrizes P and keeps it if it factorizes; otherwise returns the
/// caller-supplied SPD fallback and flags the reset event.
RepairOutcome repair_covariance(const Eigen::MatrixXd& p, const Eigen::MatrixXd& fallback);

}  // namespace omnitrack

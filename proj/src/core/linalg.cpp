#include "core/linalg.hpp"

#include <cmath>

namespace omnitrack {

namespace {
constexpr double kPivotTolerance = 1e-12;
}

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) {
    throw DimensionMismatch("symmetrized: matrix must be square");
  }
  return 0.5 * (m + m.transpose());
}

CholeskyFactor cholesky(const Eigen::MatrixXd& m) {
  const Eigen::Index n = m.rows();
  if (n != m.cols()) {
    throw DimensionMismatch("cholesky: matrix must be square");
  }

  const double max_diag = m.diagonal().maxCoeff();
  if (!(max_diag > 0.0)) {
    throw NotPositiveDefinite("cholesky: nonpositive diagonal");
  }
  const double pivot_floor = kPivotTolerance * max_diag;

  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double pivot = m(j, j);
    for (Eigen::Index k = 0; k < j; ++k) {
      pivot -= l(j, k) * l(j, k);
    }
    if (!(pivot > pivot_floor)) {
      throw NotPositiveDefinite("cholesky: pivot below tolerance at column " +
                                std::to_string(j));
    }
    const double diag = std::sqrt(pivot);
    l(j, j) = diag;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double sum = m(i, j);
      for (Eigen::Index k = 0; k < j; ++k) {
        sum -= l(i, k) * l(j, k);
      }
      l(i, j) = sum / diag;
    }
  }
  if (!l.allFinite()) {
    throw NotPositiveDefinite("cholesky: non-finite factor");
  }
  return CholeskyFactor{std::move(l)};
}

Eigen::MatrixXd solve_spd(const CholeskyFactor& factor, const Eigen::MatrixXd& b) {
  if (factor.dim() != b.rows()) {
    throw DimensionMismatch("solve_spd: factor dim " + std::to_string(factor.dim()) +
                            " vs rhs rows " + std::to_string(b.rows()));
  }
  Eigen::MatrixXd x = factor.L.triangularView<Eigen::Lower>().solve(b);
  factor.L.transpose().triangularView<Eigen::Upper>().solveInPlace(x);
  return x;
}

double mahalanobis_sq(const Eigen::VectorXd& residual, const CholeskyFactor& factor) {
  if (factor.dim() != residual.size()) {
    throw DimensionMismatch("mahalanobis_sq: residual dim mismatch");
  }
  const Eigen::VectorXd z = factor.L.triangularView<Eigen::Lower>().solve(residual);
  return z.squaredNorm();
}

double mahalanobis_sq(const Eigen::VectorXd& residual, const Eigen::MatrixXd& s) {
  return mahalanobis_sq(residual, cholesky(s));
}

double gaussian_log_density(const Eigen::VectorXd& residual, const CholeskyFactor& factor) {
  static const double kLog2Pi = std::log(2.0 * M_PI);
  const double d2 = mahalanobis_sq(residual, factor);
  return -0.5 * (d2 + static_cast<double>(residual.size()) * kLog2Pi) -
         factor.L.diagonal().array().log().sum();
}

double log_det(const CholeskyFactor& factor) {
  return 2.0 * factor.L.diagonal().array().log().sum();
}

Eigen::MatrixXd triangularize(const Eigen::MatrixXd& m) {
  const Eigen::Index rows = m.rows();
  const Eigen::Index cols = m.cols();
  if (rows < cols) {
    throw DimensionMismatch("triangularize: requires rows >= cols");
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  Eigen::MatrixXd r = qr.matrixQR()
                          .topLeftCorner(cols, cols)
                          .triangularView<Eigen::Upper>();
  // Fix the sign convention so the diagonal is nonnegative.
  for (Eigen::Index i = 0; i < cols; ++i) {
    if (r(i, i) < 0.0) {
      r.row(i) = -r.row(i);
    }
  }
  return r;
}

Eigen::MatrixXd lower_factor_of_blocks(const Eigen::MatrixXd& c) {
  return triangularize(c.transpose()).transpose();
}

void chol_rank1_update(Eigen::MatrixXd& l, Eigen::VectorXd v, double weight) {
  const Eigen::Index n = l.rows();
  if (n != l.cols() || n != v.size()) {
    throw DimensionMismatch("chol_rank1_update: dimension mismatch");
  }
  if (weight == 0.0) {
    return;
  }
  const bool update = weight > 0.0;
  v *= std::sqrt(std::abs(weight));

  for (Eigen::Index k = 0; k < n; ++k) {
    const double lkk = l(k, k);
    const double r2 = update ? lkk * lkk + v(k) * v(k) : lkk * lkk - v(k) * v(k);
    if (!(r2 > 0.0)) {
      throw NotPositiveDefinite("chol_rank1_update: downdate lost positive definiteness");
    }
    const double r = std::sqrt(r2);
    const double c = r / lkk;
    const double s = v(k) / lkk;
    l(k, k) = r;
    if (k + 1 < n) {
      auto tail = l.col(k).segment(k + 1, n - k - 1);
      auto vtail = v.segment(k + 1, n - k - 1);
      if (update) {
        tail = (tail + s * vtail) / c;
      } else {
        tail = (tail - s * vtail) / c;
      }
      vtail = c * vtail - s * tail;
    }
  }
  if (!l.allFinite()) {
    throw NotPositiveDefinite("chol_rank1_update: non-finite factor");
  }
}

RepairOutcome repair_covariance(const Eigen::MatrixXd& p, const Eigen::MatrixXd& fallback) {
  Eigen::MatrixXd sym = symmetrized(p);
  try {
    cholesky(sym);
    return RepairOutcome{std::move(sym), false};
  } catch (const NotPositiveDefinite&) {
    return RepairOutcome{fallback, true};
  }
}

}  // namespace omnitrack

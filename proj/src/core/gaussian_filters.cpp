#include "core/gaussian_filters.hpp"

#include <cmath>

namespace omnitrack {

namespace {

struct UtWeights {
  double gamma = 0.0;
  double wc0 = 0.0;
  Eigen::VectorXd wm;
  Eigen::VectorXd wc;
};

UtWeights ut_weights(const UtParams& params, Eigen::Index n) {
  double kappa = std::isnan(params.kappa) ? 3.0 - static_cast<double>(n) : params.kappa;
  double scaled = params.alpha * params.alpha * (static_cast<double>(n) + kappa);
  if (scaled <= 1e-12) {
    kappa = 0.0;  // guard: keep n + lambda positive
    scaled = params.alpha * params.alpha * static_cast<double>(n);
  }
  const double lambda = scaled - static_cast<double>(n);

  UtWeights w;
  w.gamma = std::sqrt(scaled);
  w.wm = Eigen::VectorXd::Constant(2 * n + 1, 1.0 / (2.0 * scaled));
  w.wm(0) = lambda / scaled;
  w.wc = w.wm;
  w.wc(0) += 1.0 - params.alpha * params.alpha + params.beta;
  w.wc0 = w.wc(0);
  return w;
}

double cd_step(const CdParams& params) {
  const double h = std::isnan(params.step) ? std::sqrt(3.0) : params.step;
  if (!(h > 1.0)) {
    throw std::invalid_argument("central-difference step must exceed 1");
  }
  return h;
}

}  // namespace

GaussianFilterBase::GaussianFilterBase(std::shared_ptr<const StateModel> model)
    : model_(std::move(model)), n_(model_->state_dim()), m_(model_->meas_dim()) {}

void GaussianFilterBase::init(const Eigen::VectorXd& x0, const Eigen::MatrixXd& p0,
                              const Eigen::MatrixXd& q, const Eigen::MatrixXd& r) {
  if (x0.size() != n_ || p0.rows() != n_ || p0.cols() != n_ || q.rows() != n_ ||
      q.cols() != n_ || r.rows() != m_ || r.cols() != m_) {
    throw DimensionMismatch("filter init: dimension mismatch with model");
  }
  q_ = symmetrized(q);
  r_ = symmetrized(r);
  q_chol_ = cholesky(q_).L;
  r_chol_ = cholesky(r_).L;
  reset_cov_ = symmetrized(p0);
  mean_ = x0;
  yhat_.resize(m_);
  sy_chol_.resize(m_, m_);
  resets_ = 0;
  init_belief(p0);
}

void GaussianFilterBase::step(const Eigen::VectorXd& u, const Eigen::VectorXd& y) {
  time_update(u);
  measurement_prepare();
  measurement_apply(y);
}

Eigen::VectorXd GaussianFilterBase::wrapped_residual(const Eigen::VectorXd& y) const {
  Eigen::VectorXd r = y - yhat_;
  model_->wrap_measurement_residual(r);
  return r;
}

double GaussianFilterBase::innovation_mahalanobis_sq(const Eigen::VectorXd& y) const {
  const Eigen::VectorXd r = wrapped_residual(y);
  const Eigen::VectorXd z = sy_chol_.triangularView<Eigen::Lower>().solve(r);
  return z.squaredNorm();
}

double GaussianFilterBase::innovation_log_det() const {
  return 2.0 * sy_chol_.diagonal().array().log().sum();
}

Eigen::Vector3d GaussianFilterBase::predict_pose_ahead(std::span<const Eigen::VectorXd> inputs) {
  saved_mean_ = mean_;
  saved_resets_ = resets_;
  save_belief();
  try {
    for (const Eigen::VectorXd& u : inputs) {
      time_update(u);
    }
  } catch (...) {
    mean_ = saved_mean_;
    resets_ = saved_resets_;
    restore_belief();
    throw;
  }
  const Eigen::Vector3d pose = mean_.head<3>();
  mean_ = saved_mean_;
  resets_ = saved_resets_;
  restore_belief();
  return pose;
}

CholeskyFactor DenseGaussianFilter::factor_or_repair(Eigen::MatrixXd& cov) {
  try {
    return cholesky(cov);
  } catch (const NotPositiveDefinite&) {
    RepairOutcome repaired = repair_covariance(cov, reset_cov_);
    if (repaired.reset) {
      ++resets_;
    }
    cov = std::move(repaired.cov);
    return cholesky(cov);
  }
}

// ---------------------------------------------------------------------------
// EKF

ExtendedKalmanFilter::ExtendedKalmanFilter(std::shared_ptr<const StateModel> model)
    : DenseGaussianFilter(std::move(model)) {
  pred_.resize(n_);
}

void ExtendedKalmanFilter::time_update(const Eigen::VectorXd& u) {
  model_->transition_jacobian(mean_, u, f_x_);
  model_->transition(mean_, u, pred_);
  mean_ = pred_;
  cov_ = f_x_ * cov_ * f_x_.transpose() + q_;
  cov_ = symmetrized(cov_);
}

void ExtendedKalmanFilter::measurement_prepare() {
  prepare_failed_ = false;
  model_->observation_jacobian(mean_, h_x_);
  model_->observe(mean_, yhat_);
  s_ = h_x_ * cov_ * h_x_.transpose() + r_;
  s_ = symmetrized(s_);
  try {
    sy_chol_ = cholesky(s_).L;
  } catch (const NotPositiveDefinite&) {
    // Bad innovation covariance signals a corrupted belief: repair it and
    // rebuild once; give up on the update if that still fails.
    factor_or_repair(cov_);
    s_ = symmetrized(h_x_ * cov_ * h_x_.transpose() + r_);
    try {
      sy_chol_ = cholesky(s_).L;
    } catch (const NotPositiveDefinite&) {
      prepare_failed_ = true;
    }
  }
}

void ExtendedKalmanFilter::measurement_apply(const Eigen::VectorXd& y) {
  if (prepare_failed_) {
    measurement_skip();
    return;
  }
  Eigen::MatrixXd x = sy_chol_.triangularView<Eigen::Lower>().solve(h_x_ * cov_);
  sy_chol_.transpose().triangularView<Eigen::Upper>().solveInPlace(x);
  gain_ = x.transpose();
  mean_ += gain_ * wrapped_residual(y);
  cov_ = symmetrized(cov_ - gain_ * h_x_ * cov_);
}

// ---------------------------------------------------------------------------
// UKF

UnscentedKalmanFilter::UnscentedKalmanFilter(std::shared_ptr<const StateModel> model,
                                             const UtParams& params)
    : DenseGaussianFilter(std::move(model)), ut_(params) {
  const UtWeights w = ut_weights(ut_, n_);
  gamma_ = w.gamma;
  wm_ = w.wm;
  wc_ = w.wc;
  sigma_.resize(n_, 2 * n_ + 1);
  propagated_.resize(n_, 2 * n_ + 1);
  meas_sigma_.resize(m_, 2 * n_ + 1);
  scratch_in_.resize(n_);
  scratch_out_.resize(n_);
  scratch_meas_.resize(m_);
}

void UnscentedKalmanFilter::init(const Eigen::VectorXd& x0, const Eigen::MatrixXd& p0,
                                 const Eigen::MatrixXd& q, const Eigen::MatrixXd& r) {
  GaussianFilterBase::init(x0, p0, q, r);
}

void UnscentedKalmanFilter::draw_sigma(const Eigen::VectorXd& mean, Eigen::MatrixXd& cov,
                                       Eigen::MatrixXd& out) {
  const CholeskyFactor factor = factor_or_repair(cov);
  out.col(0) = mean;
  for (Eigen::Index i = 0; i < n_; ++i) {
    out.col(1 + i) = mean + gamma_ * factor.L.col(i);
    out.col(1 + n_ + i) = mean - gamma_ * factor.L.col(i);
  }
}

void UnscentedKalmanFilter::time_update(const Eigen::VectorXd& u) {
  draw_sigma(mean_, cov_, sigma_);
  for (Eigen::Index j = 0; j < sigma_.cols(); ++j) {
    scratch_in_ = sigma_.col(j);
    model_->transition(scratch_in_, u, scratch_out_);
    propagated_.col(j) = scratch_out_;
  }
  mean_ = propagated_ * wm_;
  propagated_.colwise() -= mean_;
  cov_ = symmetrized(propagated_ * wc_.asDiagonal() * propagated_.transpose() + q_);
}

void UnscentedKalmanFilter::measurement_prepare() {
  draw_sigma(mean_, cov_, sigma_);
  for (Eigen::Index j = 0; j < sigma_.cols(); ++j) {
    scratch_in_ = sigma_.col(j);
    model_->observe(scratch_in_, scratch_meas_);
    meas_sigma_.col(j) = scratch_meas_;
  }
  yhat_ = meas_sigma_ * wm_;
  meas_sigma_.colwise() -= yhat_;
  sigma_.colwise() -= mean_;
  s_ = symmetrized(meas_sigma_ * wc_.asDiagonal() * meas_sigma_.transpose() + r_);
  pxy_ = sigma_ * wc_.asDiagonal() * meas_sigma_.transpose();
  sy_chol_ = cholesky(s_).L;
}

void UnscentedKalmanFilter::measurement_apply(const Eigen::VectorXd& y) {
  Eigen::MatrixXd x = sy_chol_.triangularView<Eigen::Lower>().solve(pxy_.transpose());
  sy_chol_.transpose().triangularView<Eigen::Upper>().solveInPlace(x);
  gain_ = x.transpose();
  mean_ += gain_ * wrapped_residual(y);
  cov_ = symmetrized(cov_ - gain_ * s_ * gain_.transpose());
}

// ---------------------------------------------------------------------------
// CDKF (central-difference moment form)

CentralDifferenceKalmanFilter::CentralDifferenceKalmanFilter(
    std::shared_ptr<const StateModel> model, const CdParams& params)
    : DenseGaussianFilter(std::move(model)), h_(cd_step(params)) {
  sigma_plus_.resize(n_, n_);
  sigma_minus_.resize(n_, n_);
  f_plus_.resize(n_, n_);
  f_minus_.resize(n_, n_);
  y_plus_.resize(m_, n_);
  y_minus_.resize(m_, n_);
  f_center_.resize(n_);
  y_center_.resize(m_);
  scratch_in_.resize(n_);
  scratch_out_.resize(std::max(n_, m_));
}

void CentralDifferenceKalmanFilter::time_update(const Eigen::VectorXd& u) {
  const CholeskyFactor factor = factor_or_repair(cov_);
  const double h2 = h_ * h_;
  const double w0 = (h2 - static_cast<double>(n_)) / h2;
  const double wi = 1.0 / (2.0 * h2);
  const double w1c = 1.0 / (4.0 * h2);
  const double w2c = (h2 - 1.0) / (4.0 * h2 * h2);

  Eigen::VectorXd out(n_);
  model_->transition(mean_, u, f_center_);
  for (Eigen::Index i = 0; i < n_; ++i) {
    scratch_in_ = mean_ + h_ * factor.L.col(i);
    model_->transition(scratch_in_, u, out);
    f_plus_.col(i) = out;
    scratch_in_ = mean_ - h_ * factor.L.col(i);
    model_->transition(scratch_in_, u, out);
    f_minus_.col(i) = out;
  }
  mean_ = w0 * f_center_ + wi * (f_plus_ + f_minus_).rowwise().sum();

  const Eigen::MatrixXd d1 = f_plus_ - f_minus_;
  const Eigen::MatrixXd d2 = f_plus_ + f_minus_ - 2.0 * f_center_.replicate(1, n_);
  cov_ = symmetrized(w1c * d1 * d1.transpose() + w2c * d2 * d2.transpose() + q_);
}

void CentralDifferenceKalmanFilter::measurement_prepare() {
  const CholeskyFactor factor = factor_or_repair(cov_);
  chol_pred_ = factor.L;
  const double h2 = h_ * h_;
  const double w0 = (h2 - static_cast<double>(n_)) / h2;
  const double wi = 1.0 / (2.0 * h2);
  const double w1c = 1.0 / (4.0 * h2);
  const double w2c = (h2 - 1.0) / (4.0 * h2 * h2);

  Eigen::VectorXd out(m_);
  model_->observe(mean_, y_center_);
  for (Eigen::Index i = 0; i < n_; ++i) {
    scratch_in_ = mean_ + h_ * chol_pred_.col(i);
    model_->observe(scratch_in_, out);
    y_plus_.col(i) = out;
    scratch_in_ = mean_ - h_ * chol_pred_.col(i);
    model_->observe(scratch_in_, out);
    y_minus_.col(i) = out;
  }
  yhat_ = w0 * y_center_ + wi * (y_plus_ + y_minus_).rowwise().sum();

  const Eigen::MatrixXd c1 = y_plus_ - y_minus_;
  const Eigen::MatrixXd c2 = y_plus_ + y_minus_ - 2.0 * y_center_.replicate(1, n_);
  s_ = symmetrized(w1c * c1 * c1.transpose() + w2c * c2 * c2.transpose() + r_);
  pxy_ = chol_pred_ * c1.transpose() / (2.0 * h_);
  sy_chol_ = cholesky(s_).L;
}

void CentralDifferenceKalmanFilter::measurement_apply(const Eigen::VectorXd& y) {
  Eigen::MatrixXd x = sy_chol_.triangularView<Eigen::Lower>().solve(pxy_.transpose());
  sy_chol_.transpose().triangularView<Eigen::Upper>().solveInPlace(x);
  gain_ = x.transpose();
  mean_ += gain_ * wrapped_residual(y);
  cov_ = symmetrized(cov_ - gain_ * s_ * gain_.transpose());
}

// ---------------------------------------------------------------------------
// DD1 / DD2 (divided-difference factor form)

DividedDifferenceFilter::DividedDifferenceFilter(std::shared_ptr<const StateModel> model,
                                                 int order, const CdParams& params)
    : SquareRootGaussianFilter(std::move(model)), order_(order), h_(cd_step(params)) {
  if (order_ != 1 && order_ != 2) {
    throw std::invalid_argument("divided-difference order must be 1 or 2");
  }
  a1_.resize(n_, n_);
  a2_.resize(n_, n_);
  c1_.resize(m_, n_);
  c2_.resize(m_, n_);
  f_center_.resize(n_);
  y_center_.resize(m_);
  f_plus_.resize(n_);
  f_minus_.resize(n_);
  y_plus_.resize(m_);
  y_minus_.resize(m_);
  scratch_in_.resize(n_);
}

void DividedDifferenceFilter::time_update(const Eigen::VectorXd& u) {
  const double h2 = h_ * h_;
  const double second_scale = std::sqrt(h2 - 1.0) / (2.0 * h2);

  model_->transition(mean_, u, f_center_);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(n_);
  for (Eigen::Index i = 0; i < n_; ++i) {
    scratch_in_ = mean_ + h_ * sqrt_.col(i);
    model_->transition(scratch_in_, u, f_plus_);
    scratch_in_ = mean_ - h_ * sqrt_.col(i);
    model_->transition(scratch_in_, u, f_minus_);
    a1_.col(i) = (f_plus_ - f_minus_) / (2.0 * h_);
    if (order_ == 2) {
      a2_.col(i) = second_scale * (f_plus_ + f_minus_ - 2.0 * f_center_);
      sum += f_plus_ + f_minus_;
    }
  }
  if (order_ == 1) {
    mean_ = f_center_;
    compound_.resize(n_, 2 * n_);
    compound_ << a1_, q_chol_;
  } else {
    mean_ = ((h2 - static_cast<double>(n_)) / h2) * f_center_ + sum / (2.0 * h2);
    compound_.resize(n_, 3 * n_);
    compound_ << a1_, a2_, q_chol_;
  }
  sqrt_ = lower_factor_of_blocks(compound_);
}

void DividedDifferenceFilter::measurement_prepare() {
  const double h2 = h_ * h_;
  const double second_scale = std::sqrt(h2 - 1.0) / (2.0 * h2);

  model_->observe(mean_, y_center_);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(m_);
  for (Eigen::Index i = 0; i < n_; ++i) {
    scratch_in_ = mean_ + h_ * sqrt_.col(i);
    model_->observe(scratch_in_, y_plus_);
    scratch_in_ = mean_ - h_ * sqrt_.col(i);
    model_->observe(scratch_in_, y_minus_);
    c1_.col(i) = (y_plus_ - y_minus_) / (2.0 * h_);
    if (order_ == 2) {
      c2_.col(i) = second_scale * (y_plus_ + y_minus_ - 2.0 * y_center_);
      sum += y_plus_ + y_minus_;
    }
  }
  if (order_ == 1) {
    yhat_ = y_center_;
    meas_compound_.resize(m_, n_ + m_);
    meas_compound_ << c1_, r_chol_;
  } else {
    yhat_ = ((h2 - static_cast<double>(n_)) / h2) * y_center_ + sum / (2.0 * h2);
    meas_compound_.resize(m_, 2 * n_ + m_);
    meas_compound_ << c1_, c2_, r_chol_;
  }
  sy_chol_ = lower_factor_of_blocks(meas_compound_);
  pxy_ = sqrt_ * c1_.transpose();
}

void DividedDifferenceFilter::measurement_apply(const Eigen::VectorXd& y) {
  Eigen::MatrixXd x = sy_chol_.triangularView<Eigen::Lower>().solve(pxy_.transpose());
  sy_chol_.transpose().triangularView<Eigen::Upper>().solveInPlace(x);
  gain_ = x.transpose();
  mean_ += gain_ * wrapped_residual(y);

  // Joseph-style factor assembly keeps the posterior factor valid without
  // any downdates.
  if (order_ == 1) {
    post_compound_.resize(n_, n_ + m_);
    post_compound_ << sqrt_ - gain_ * c1_, gain_ * r_chol_;
  } else {
    post_compound_.resize(n_, n_ + m_ + n_);
    post_compound_ << sqrt_ - gain_ * c1_, gain_ * r_chol_, gain_ * c2_;
  }
  sqrt_ = lower_factor_of_blocks(post_compound_);
}

// ---------------------------------------------------------------------------
// SRUKF

SquareRootUnscentedKalmanFilter::SquareRootUnscentedKalmanFilter(
    std::shared_ptr<const StateModel> model, const UtParams& params)
    : SquareRootGaussianFilter(std::move(model)), ut_(params) {
  const UtWeights w = ut_weights(ut_, n_);
  gamma_ = w.gamma;
  wm_ = w.wm;
  wc_ = w.wc;
  sigma_.resize(n_, 2 * n_ + 1);
  propagated_.resize(n_, 2 * n_ + 1);
  meas_sigma_.resize(m_, 2 * n_ + 1);
  scratch_in_.resize(n_);
  scratch_out_.resize(n_);
  scratch_meas_.resize(m_);
}

void SquareRootUnscentedKalmanFilter::init(const Eigen::VectorXd& x0, const Eigen::MatrixXd& p0,
                                           const Eigen::MatrixXd& q, const Eigen::MatrixXd& r) {
  GaussianFilterBase::init(x0, p0, q, r);
}

void SquareRootUnscentedKalmanFilter::draw_sigma(const Eigen::VectorXd& mean,
                                                 const Eigen::MatrixXd& sqrt,
                                                 Eigen::MatrixXd& out) const {
  out.col(0) = mean;
  for (Eigen::Index i = 0; i < n_; ++i) {
    out.col(1 + i) = mean + gamma_ * sqrt.col(i);
    out.col(1 + n_ + i) = mean - gamma_ * sqrt.col(i);
  }
}

void SquareRootUnscentedKalmanFilter::rebuild_factor_or_reset(Eigen::MatrixXd& factor,
                                                              const Eigen::MatrixXd& compound,
                                                              const Eigen::VectorXd& rank1,
                                                              double weight) {
  (void)compound;
  Eigen::MatrixXd dense = factor * factor.transpose() + weight * rank1 * rank1.transpose();
  RepairOutcome repaired = repair_covariance(dense, reset_cov_);
  if (repaired.reset) {
    ++resets_;
  }
  factor = cholesky(repaired.cov).L;
}

void SquareRootUnscentedKalmanFilter::time_update(const Eigen::VectorXd& u) {
  draw_sigma(mean_, sqrt_, sigma_);
  for (Eigen::Index j = 0; j < sigma_.cols(); ++j) {
    scratch_in_ = sigma_.col(j);
    model_->transition(scratch_in_, u, scratch_out_);
    propagated_.col(j) = scratch_out_.head(n_);
  }
  mean_ = propagated_ * wm_;

  const double sw = std::sqrt(wc_(1));
  compound_.resize(n_, 2 * n_ + n_);
  for (Eigen::Index j = 1; j < propagated_.cols(); ++j) {
    compound_.col(j - 1) = sw * (propagated_.col(j) - mean_);
  }
  compound_.rightCols(n_) = q_chol_;
  sqrt_ = lower_factor_of_blocks(compound_);
  const Eigen::VectorXd center = propagated_.col(0) - mean_;
  try {
    chol_rank1_update(sqrt_, center, wc_(0));
  } catch (const NotPositiveDefinite&) {
    rebuild_factor_or_reset(sqrt_, compound_, center, wc_(0));
  }
}

void SquareRootUnscentedKalmanFilter::measurement_prepare() {
  draw_sigma(mean_, sqrt_, sigma_);
  for (Eigen::Index j = 0; j < sigma_.cols(); ++j) {
    scratch_in_ = sigma_.col(j);
    model_->observe(scratch_in_, scratch_meas_);
    meas_sigma_.col(j) = scratch_meas_;
  }
  yhat_ = meas_sigma_ * wm_;

  const double sw = std::sqrt(wc_(1));
  meas_compound_.resize(m_, 2 * n_ + m_);
  for (Eigen::Index j = 1; j < meas_sigma_.cols(); ++j) {
    meas_compound_.col(j - 1) = sw * (meas_sigma_.col(j) - yhat_);
  }
  meas_compound_.rightCols(m_) = r_chol_;
  sy_chol_ = lower_factor_of_blocks(meas_compound_);
  const Eigen::VectorXd center = meas_sigma_.col(0) - yhat_;
  try {
    chol_rank1_update(sy_chol_, center, wc_(0));
  } catch (const NotPositiveDefinite&) {
    const Eigen::MatrixXd dense =
        sy_chol_ * sy_chol_.transpose() + wc_(0) * center * center.transpose();
    sy_chol_ = cholesky(symmetrized(dense)).L;
  }

  sigma_.colwise() -= mean_;
  meas_sigma_.colwise() -= yhat_;
  pxy_ = sigma_ * wc_.asDiagonal() * meas_sigma_.transpose();
}

void SquareRootUnscentedKalmanFilter::measurement_apply(const Eigen::VectorXd& y) {
  Eigen::MatrixXd x = sy_chol_.triangularView<Eigen::Lower>().solve(pxy_.transpose());
  sy_chol_.transpose().triangularView<Eigen::Upper>().solveInPlace(x);
  gain_ = x.transpose();
  mean_ += gain_ * wrapped_residual(y);

  u_cols_ = gain_ * sy_chol_;
  const Eigen::MatrixXd before = sqrt_;
  try {
    for (Eigen::Index c = 0; c < u_cols_.cols(); ++c) {
      chol_rank1_update(sqrt_, u_cols_.col(c), -1.0);
    }
  } catch (const NotPositiveDefinite&) {
    Eigen::MatrixXd dense =
        before * before.transpose() - u_cols_ * u_cols_.transpose();
    RepairOutcome repaired = repair_covariance(dense, reset_cov_);
    if (repaired.reset) {
      ++resets_;
    }
    sqrt_ = cholesky(repaired.cov).L;
  }
}

// ---------------------------------------------------------------------------
// SRCDKF

SquareRootCentralDifferenceKalmanFilter::SquareRootCentralDifferenceKalmanFilter(
    std::shared_ptr<const StateModel> model, const CdParams& params)
    : SquareRootGaussianFilter(std::move(model)), h_(cd_step(params)) {
  a1_.resize(n_, n_);
  a2_.resize(n_, n_);
  c1_.resize(m_, n_);
  c2_.resize(m_, n_);
  f_center_.resize(n_);
  y_center_.resize(m_);
  f_plus_.resize(n_);
  f_minus_.resize(n_);
  y_plus_.resize(m_);
  y_minus_.resize(m_);
  scratch_in_.resize(n_);
}

void SquareRootCentralDifferenceKalmanFilter::time_update(const Eigen::VectorXd& u) {
  const double h2 = h_ * h_;
  const double w1 = 1.0 / (2.0 * h_);                  // sqrt of 1/(4h^2)
  const double w2 = std::sqrt(h2 - 1.0) / (2.0 * h2);  // sqrt of (h^2-1)/(4h^4)

  model_->transition(mean_, u, f_center_);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(n_);
  for (Eigen::Index i = 0; i < n_; ++i) {
    scratch_in_ = mean_ + h_ * sqrt_.col(i);
    model_->transition(scratch_in_, u, f_plus_);
    scratch_in_ = mean_ - h_ * sqrt_.col(i);
    model_->transition(scratch_in_, u, f_minus_);
    a1_.col(i) = w1 * (f_plus_ - f_minus_);
    a2_.col(i) = w2 * (f_plus_ + f_minus_ - 2.0 * f_center_);
    sum += f_plus_ + f_minus_;
  }
  mean_ = ((h2 - static_cast<double>(n_)) / h2) * f_center_ + sum / (2.0 * h2);
  compound_.resize(n_, 3 * n_);
  compound_ << a1_, a2_, q_chol_;
  sqrt_ = lower_factor_of_blocks(compound_);
}

void SquareRootCentralDifferenceKalmanFilter::measurement_prepare() {
  const double h2 = h_ * h_;
  const double w1 = 1.0 / (2.0 * h_);
  const double w2 = std::sqrt(h2 - 1.0) / (2.0 * h2);

  model_->observe(mean_, y_center_);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(m_);
  for (Eigen::Index i = 0; i < n_; ++i) {
    scratch_in_ = mean_ + h_ * sqrt_.col(i);
    model_->observe(scratch_in_, y_plus_);
    scratch_in_ = mean_ - h_ * sqrt_.col(i);
    model_->observe(scratch_in_, y_minus_);
    c1_.col(i) = w1 * (y_plus_ - y_minus_);
    c2_.col(i) = w2 * (y_plus_ + y_minus_ - 2.0 * y_center_);
    sum += y_plus_ + y_minus_;
  }
  yhat_ = ((h2 - static_cast<double>(n_)) / h2) * y_center_ + sum / (2.0 * h2);

  meas_compound_.resize(m_, 2 * n_ + m_);
  meas_compound_ << c1_, c2_, r_chol_;
  sy_chol_ = lower_factor_of_blocks(meas_compound_);
  pxy_ = sqrt_ * c1_.transpose();
}

void SquareRootCentralDifferenceKalmanFilter::measurement_apply(const Eigen::VectorXd& y) {
  Eigen::MatrixXd x = sy_chol_.triangularView<Eigen::Lower>().solve(pxy_.transpose());
  sy_chol_.transpose().triangularView<Eigen::Upper>().solveInPlace(x);
  gain_ = x.transpose();
  mean_ += gain_ * wrapped_residual(y);

  post_compound_.resize(n_, n_ + m_ + n_);
  post_compound_ << sqrt_ - gain_ * c1_, gain_ * r_chol_, gain_ * c2_;
  sqrt_ = lower_factor_of_blocks(post_compound_);
}

}  // namespace omnitrack

#pragma once

#include <memory>
#include <string>

#include "core/filter.hpp"
#include "core/linalg.hpp"
#include "core/model.hpp"

namespace omnitrack {

/// Scaled unscented-transform tuning. kappa defaults to 3 - n; if that makes
/// n + lambda nonpositive it falls back to kappa = 0.
struct UtParams {
  double alpha = 1.0;
  double beta = 2.0;
  double kappa = std::numeric_limits<double>::quiet_NaN();  // NaN -> 3 - n
};

/// Central/divided-difference step length; h^2 = 3 is the Gaussian-optimal
/// choice used throughout.
struct CdParams {
  double step = std::numeric_limits<double>::quiet_NaN();  // NaN -> sqrt(3)
};

/// Shared structure of the Gaussian-assumption filters. A step is
/// time_update -> measurement_prepare -> measurement_apply; the outlier gate
/// slots between prepare and apply and may divert to measurement_skip.
class GaussianFilterBase : public TrackingFilter {
 public:
  explicit GaussianFilterBase(std::shared_ptr<const StateModel> model);

  void init(const Eigen::VectorXd& x0, const Eigen::MatrixXd& p0, const Eigen::MatrixXd& q,
            const Eigen::MatrixXd& r) override;

  void step(const Eigen::VectorXd& u, const Eigen::VectorXd& y) final;

  virtual void time_update(const Eigen::VectorXd& u) = 0;
  virtual void measurement_prepare() = 0;
  virtual void measurement_apply(const Eigen::VectorXd& y) = 0;

  /// Keeps the predicted belief as the posterior (rejected measurement).
  void measurement_skip() {}

  /// Valid after measurement_prepare().
  const Eigen::VectorXd& predicted_measurement() const { return yhat_; }
  double innovation_mahalanobis_sq(const Eigen::VectorXd& y) const;
  double innovation_log_det() const;

  Eigen::VectorXd estimate() const final { return mean_; }
  virtual Eigen::MatrixXd covariance() const = 0;

  Eigen::Vector3d predict_pose_ahead(std::span<const Eigen::VectorXd> inputs) final;

  std::uint64_t reset_events() const final { return resets_; }

  const StateModel& model() const { return *model_; }

 protected:
  virtual void init_belief(const Eigen::MatrixXd& p0) = 0;
  virtual void save_belief() = 0;
  virtual void restore_belief() = 0;

  /// y - yhat with angular components wrapped.
  Eigen::VectorXd wrapped_residual(const Eigen::VectorXd& y) const;

  std::shared_ptr<const StateModel> model_;
  Eigen::Index n_ = 0;
  Eigen::Index m_ = 0;

  Eigen::MatrixXd q_;
  Eigen::MatrixXd r_;
  Eigen::MatrixXd q_chol_;  // lower factors
  Eigen::MatrixXd r_chol_;
  Eigen::MatrixXd reset_cov_;

  Eigen::VectorXd mean_;
  Eigen::VectorXd yhat_;
  Eigen::MatrixXd sy_chol_;  // lower factor of the innovation covariance

  std::uint64_t resets_ = 0;

 private:
  Eigen::VectorXd saved_mean_;
  std::uint64_t saved_resets_ = 0;
};

/// Variants that carry the covariance densely.
class DenseGaussianFilter : public GaussianFilterBase {
 public:
  using GaussianFilterBase::GaussianFilterBase;
  Eigen::MatrixXd covariance() const override { return cov_; }

 protected:
  void init_belief(const Eigen::MatrixXd& p0) override { cov_ = symmetrized(p0); }
  void save_belief() override { saved_cov_ = cov_; }
  void restore_belief() override { cov_ = saved_cov_; }

  /// Symmetrize-and-factor; falls back to the reset covariance and counts
  /// the event when positive definiteness is lost.
  CholeskyFactor factor_or_repair(Eigen::MatrixXd& cov);

  Eigen::MatrixXd cov_;

 private:
  Eigen::MatrixXd saved_cov_;
};

/// Variants that carry a lower-triangular square-root factor.
class SquareRootGaussianFilter : public GaussianFilterBase {
 public:
  using GaussianFilterBase::GaussianFilterBase;
  Eigen::MatrixXd covariance() const override { return sqrt_ * sqrt_.transpose(); }
  const Eigen::MatrixXd& sqrt_factor() const { return sqrt_; }
  const Eigen::VectorXd& mean_ref() const { return mean_; }

  /// Belief swap for filter banks (one shared engine, many particles).
  void load_belief(const Eigen::Ref<const Eigen::VectorXd>& mean, const Eigen::MatrixXd& sqrt) {
    mean_ = mean;
    sqrt_ = sqrt;
  }
  void store_belief(Eigen::Ref<Eigen::VectorXd> mean, Eigen::MatrixXd& sqrt) const {
    mean = mean_;
    sqrt = sqrt_;
  }

 protected:
  void init_belief(const Eigen::MatrixXd& p0) override { sqrt_ = cholesky(symmetrized(p0)).L; }
  void save_belief() override { saved_sqrt_ = sqrt_; }
  void restore_belief() override { sqrt_ = saved_sqrt_; }

  Eigen::MatrixXd sqrt_;

 private:
  Eigen::MatrixXd saved_sqrt_;
};

class ExtendedKalmanFilter final : public DenseGaussianFilter {
 public:
  explicit ExtendedKalmanFilter(std::shared_ptr<const StateModel> model);
  void time_update(const Eigen::VectorXd& u) override;
  void measurement_prepare() override;
  void measurement_apply(const Eigen::VectorXd& y) override;

 private:
  Eigen::MatrixXd f_x_, h_x_, s_, gain_;
  Eigen::VectorXd pred_;
  bool prepare_failed_ = false;
};

class UnscentedKalmanFilter final : public DenseGaussianFilter {
 public:
  UnscentedKalmanFilter(std::shared_ptr<const StateModel> model, const UtParams& params = {});
  void init(const Eigen::VectorXd& x0, const Eigen::MatrixXd& p0, const Eigen::MatrixXd& q,
            const Eigen::MatrixXd& r) override;
  void time_update(const Eigen::VectorXd& u) override;
  void measurement_prepare() override;
  void measurement_apply(const Eigen::VectorXd& y) override;

 private:
  void draw_sigma(const Eigen::VectorXd& mean, Eigen::MatrixXd& cov, Eigen::MatrixXd& out);

  UtParams ut_;
  double gamma_ = 0.0;
  Eigen::VectorXd wm_, wc_;
  Eigen::MatrixXd sigma_, propagated_, meas_sigma_, pxy_, s_, gain_;
  Eigen::VectorXd scratch_in_, scratch_out_, scratch_meas_;
};

class CentralDifferenceKalmanFilter final : public DenseGaussianFilter {
 public:
  CentralDifferenceKalmanFilter(std::shared_ptr<const StateModel> model,
                                const CdParams& params = {});
  void time_update(const Eigen::VectorXd& u) override;
  void measurement_prepare() override;
  void measurement_apply(const Eigen::VectorXd& y) override;

 private:
  double h_;
  Eigen::MatrixXd sigma_plus_, sigma_minus_, f_plus_, f_minus_, y_plus_, y_minus_;
  Eigen::MatrixXd chol_pred_, pxy_, s_, gain_;
  Eigen::VectorXd f_center_, y_center_, scratch_in_, scratch_out_;
};

/// First- and second-order divided-difference filters; both propagate the
/// square-root factor through compact triangularizations.
class DividedDifferenceFilter final : public SquareRootGaussianFilter {
 public:
  DividedDifferenceFilter(std::shared_ptr<const StateModel> model, int order,
                          const CdParams& params = {});
  void time_update(const Eigen::VectorXd& u) override;
  void measurement_prepare() override;
  void measurement_apply(const Eigen::VectorXd& y) override;

 private:
  int order_;
  double h_;
  Eigen::MatrixXd a1_, a2_, c1_, c2_, compound_, meas_compound_, post_compound_, pxy_, gain_;
  Eigen::VectorXd f_center_, y_center_, f_plus_, f_minus_, y_plus_, y_minus_, scratch_in_;
};

class SquareRootUnscentedKalmanFilter final : public SquareRootGaussianFilter {
 public:
  SquareRootUnscentedKalmanFilter(std::shared_ptr<const StateModel> model,
                                  const UtParams& params = {});
  void init(const Eigen::VectorXd& x0, const Eigen::MatrixXd& p0, const Eigen::MatrixXd& q,
            const Eigen::MatrixXd& r) override;
  void time_update(const Eigen::VectorXd& u) override;
  void measurement_prepare() override;
  void measurement_apply(const Eigen::VectorXd& y) override;

 private:
  void draw_sigma(const Eigen::VectorXd& mean, const Eigen::MatrixXd& sqrt,
                  Eigen::MatrixXd& out) const;
  void rebuild_factor_or_reset(Eigen::MatrixXd& factor, const Eigen::MatrixXd& compound,
                               const Eigen::VectorXd& rank1, double weight);

  UtParams ut_;
  double gamma_ = 0.0;
  Eigen::VectorXd wm_, wc_;
  Eigen::MatrixXd sigma_, propagated_, meas_sigma_, compound_, meas_compound_, pxy_, gain_,
      u_cols_;
  Eigen::VectorXd scratch_in_, scratch_out_, scratch_meas_;
};

class SquareRootCentralDifferenceKalmanFilter final : public SquareRootGaussianFilter {
 public:
  SquareRootCentralDifferenceKalmanFilter(std::shared_ptr<const StateModel> model,
                                          const CdParams& params = {});
  void time_update(const Eigen::VectorXd& u) override;
  void measurement_prepare() override;
  void measurement_apply(const Eigen::VectorXd& y) override;

 private:
  double h_;
  Eigen::MatrixXd a1_, a2_, c1_, c2_, compound_, meas_compound_, post_compound_, pxy_, gain_;
  Eigen::VectorXd f_center_, y_center_, f_plus_, f_minus_, y_plus_, y_minus_, scratch_in_;
};

}  // namespace omnitrack

#pragma once

#include <memory>

#include "core/gaussian_filters.hpp"

namespace omnitrack {

/// Outlier gate in front of a Gaussian-assumption filter: a measurement is
/// rejected when it is too improbable under N(yhat, S). Rejected frames are
/// prediction-only, so the covariance keeps growing until measurements
/// become plausible again.
struct GateConfig {
  enum class Mode { kMahalanobis, kLikelihood };

  /// Default is the 0.99 quantile of chi-square with 3 degrees of freedom,
  /// matching the 3-dimensional pose innovation.
  double threshold = 11.345;
  Mode mode = Mode::kMahalanobis;
};

/// Decision from the squared Mahalanobis distance of the innovation.
/// In likelihood mode the Gaussian density (with the standard
/// (2 pi)^(m/2) |S|^(1/2) normalizer) is compared against
/// exp(-threshold / 2) / normalizer; the two modes coincide by monotonicity.
bool gate_accepts(double mahalanobis_sq, double innovation_log_det, Eigen::Index meas_dim,
                  const GateConfig& cfg);

class GatedFilter final : public TrackingFilter {
 public:
  GatedFilter(std::unique_ptr<GaussianFilterBase> inner, const GateConfig& cfg);

  void init(const Eigen::VectorXd& x0, const Eigen::MatrixXd& p0, const Eigen::MatrixXd& q,
            const Eigen::MatrixXd& r) override;
  void step(const Eigen::VectorXd& u, const Eigen::VectorXd& y) override;
  Eigen::VectorXd estimate() const override { return inner_->estimate(); }
  Eigen::Vector3d predict_pose_ahead(std::span<const Eigen::VectorXd> inputs) override {
    return inner_->predict_pose_ahead(inputs);
  }
  std::uint64_t reset_events() const override { return inner_->reset_events(); }
  std::uint64_t rejected_measurements() const override { return rejected_; }

  const GaussianFilterBase& inner() const { return *inner_; }

 private:
  std::unique_ptr<GaussianFilterBase> inner_;
  GateConfig cfg_;
  std::uint64_t rejected_ = 0;
};

}  // namespace omnitrack

#pragma once

#include <cstdint>
#include <span>

#include <Eigen/Dense>

namespace omnitrack {

/// Common contract for every estimator in the benchmark: initialize with a
/// Gaussian prior, consume one (input, measurement) pair per frame, expose
/// the current state estimate, and produce n-step-ahead pose predictions
/// without disturbing the running belief.
class TrackingFilter {
 public:
  virtual ~TrackingFilter() = default;

  virtual void init(const Eigen::VectorXd& x0, const Eigen::MatrixXd& p0,
                    const Eigen::MatrixXd& q, const Eigen::MatrixXd& r) = 0;

  virtual void step(const Eigen::VectorXd& u, const Eigen::VectorXd& y) = 0;

  virtual Eigen::VectorXd estimate() const = 0;

  /// Applies prediction-only updates for the given input schedule (one entry
  /// per frame) and returns the final predicted [x, y, theta]. The belief is
  /// untouched: stepping afterwards gives bit-identical results whether or
  /// not this was called.
  virtual Eigen::Vector3d predict_pose_ahead(std::span<const Eigen::VectorXd> inputs) = 0;

  /// Covariance-reset events observed so far (numerical repair path).
  virtual std::uint64_t reset_events() const { return 0; }

  /// Measurements discarded by an outlier gate, when one is attached.
  virtual std::uint64_t rejected_measurements() const { return 0; }
};

}  // namespace omnitrack

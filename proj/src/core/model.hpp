#pragma once

#include <memory>

#include <Eigen/Dense>

#include "core/robot.hpp"

namespace omnitrack {

/// Deterministic part of a state-space model with additive noise:
///   x_k = f(x_{k-1}, u_{k-1}) + v,   y_k = h(x_k) + w.
/// Implementations write into caller-owned buffers so the filters can run
/// allocation-free in their inner loops.
class StateModel {
 public:
  virtual ~StateModel() = default;

  virtual Eigen::Index state_dim() const = 0;
  virtual Eigen::Index input_dim() const = 0;
  virtual Eigen::Index meas_dim() const = 0;

  virtual void transition(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                          Eigen::VectorXd& out) const = 0;
  virtual void observe(const Eigen::VectorXd& x, Eigen::VectorXd& out) const = 0;

  virtual void transition_jacobian(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                   Eigen::MatrixXd& f_x) const = 0;
  virtual void observation_jacobian(const Eigen::VectorXd& x, Eigen::MatrixXd& h_x) const = 0;

  /// Hook for angular measurement components; default is a no-op.
  virtual void wrap_measurement_residual(Eigen::Ref<Eigen::VectorXd> r) const { (void)r; }
};

/// The omni-directional robot as seen by the filters.
class RobotModel final : public StateModel {
 public:
  RobotModel(const RobotParams& params, double dt)
      : params_(params), drive_(params), dt_(dt) {
    params_.validate();
  }

  Eigen::Index state_dim() const override { return kStateDim; }
  Eigen::Index input_dim() const override { return kInputDim; }
  Eigen::Index meas_dim() const override { return kMeasDim; }

  void transition(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                  Eigen::VectorXd& out) const override {
    out = discrete_transition(x, Eigen::Vector3d(u), dt_, drive_);
  }

  void observe(const Eigen::VectorXd& x, Eigen::VectorXd& out) const override {
    out = x.head<3>();
  }

  void transition_jacobian(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                           Eigen::MatrixXd& f_x) const override {
    Eigen::MatrixXd f_u, f_v;
    transition_jacobians(x, Eigen::Vector3d(u), dt_, drive_, f_x, f_u, f_v);
  }

  void observation_jacobian(const Eigen::VectorXd& x, Eigen::MatrixXd& h_x) const override {
    (void)x;
    Eigen::MatrixXd h_w;
    measurement_jacobians(h_x, h_w);
  }

  void wrap_measurement_residual(Eigen::Ref<Eigen::VectorXd> r) const override {
    r(2) = wrap_angle(r(2));
  }

  const RobotParams& params() const { return params_; }
  const DriveMatrices& drive() const { return drive_; }
  double dt() const { return dt_; }

 private:
  RobotParams params_;
  DriveMatrices drive_;
  double dt_;
};

}  // namespace omnitrack

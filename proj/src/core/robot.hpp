#pragma once

#include <Eigen/Dense>

#include "core/errors.hpp"

namespace omnitrack {

/// State vector layout: [x_w, y_w, theta, vx_body, vy_body, omega].
/// Position and heading live in the world (court) frame, translational
/// velocities in the body frame. Heading is kept unwrapped.
enum StateIndex : int {
  kWorldX = 0,
  kWorldY = 1,
  kHeading = 2,
  kBodyVx = 3,
  kBodyVy = 4,
  kOmega = 5,
};

inline constexpr int kStateDim = 6;
inline constexpr int kInputDim = 3;
inline constexpr int kMeasDim = 3;

/// Physical parameters of the three-wheel omni-directional platform.
/// The drive constants a1 (reflected wheel inertia), a2 (velocity feedback,
/// always negative) and a3 (voltage gain) are derived from these.
struct RobotParams {
  double mass = 2.0;                  // kg
  double body_inertia = 0.02;         // kg m^2
  double wheel_radius = 0.027;        // m
  double body_radius = 0.08;          // m
  double gear_ratio = 3.0;
  double wheel_inertia = 5.0e-6;      // kg m^2, motor armature + wheel
  double torque_constant = 0.009;     // N m / A
  double emf_constant = 0.009;        // V s / rad
  double armature_resistance = 8.0;   // ohm
  double armature_inductance = 1.1e-3;  // H, unused: electrical dynamics neglected
  double viscous_friction = 1.195e-4; // N m s / rad
  double supply_voltage = 12.0;       // V, per-motor bound
  int input_delay_frames = 4;

  double a1() const;
  double a2() const;
  double a3() const;

  /// Throws std::invalid_argument unless all parameters are positive and
  /// the derived constants have the required signs (a1 > 0, a2 < 0, a3 > 0).
  void validate() const;
};

/// Cached blocks of the discrete-time velocity dynamics
///   v_k = (I + A22*T) v_{k-1} + B2*T u_{k-1}.
struct DriveMatrices {
  Eigen::Vector3d a22_diag;
  Eigen::Matrix3d b2;

  explicit DriveMatrices(const RobotParams& params);
};

/// Body-to-world rotation for [vx, vy, omega] triples. Heading is measured
/// between the body y axis and the world x axis, which gives the
/// [[sin, cos, 0], [-cos, sin, 0], [0, 0, 1]] layout.
Eigen::Matrix3d rotation_p0(double theta);

/// Wheel coupling matrix P1 for wheel offset angle psi = pi/6; maps body
/// velocities to (scaled) wheel rim speeds.
Eigen::Matrix3d wheel_coupling_p1(double body_radius);

/// phi_dot = (N / r) * P1 * v_body.
Eigen::Vector3d body_to_wheel(const Eigen::Vector3d& v_body, const RobotParams& params);

/// v_body = (r / N) * P1^-1 * phi_dot.
Eigen::Vector3d wheel_to_body(const Eigen::Vector3d& wheel_rates, const RobotParams& params);

/// v_world = (r / N) * P0(theta) * P1^-1 * phi_dot.
Eigen::Vector3d wheel_to_world(const Eigen::Vector3d& wheel_rates, double theta,
                               const RobotParams& params);

/// Body-frame acceleration [ax, ay, alpha] from the full nonlinear dynamics:
/// solves (I3 + a1 M) a = coriolis + a2 M v + a3 I^-1 P1^T u with
/// M = I^-1 P1^T P1. Throws SingularMatrix if the inertia coupling matrix
/// is numerically singular (cannot happen for valid parameters).
Eigen::Vector3d continuous_accel(const Eigen::VectorXd& state, const Eigen::Vector3d& volts,
                                 const RobotParams& params);

/// One deterministic step of the discrete model (noise is the caller's
/// business): positions advance by P0(theta) v T, velocities by the
/// linearized drive dynamics.
Eigen::VectorXd discrete_transition(const Eigen::VectorXd& state, const Eigen::Vector3d& volts,
                                    double dt, const RobotParams& params);
Eigen::VectorXd discrete_transition(const Eigen::VectorXd& state, const Eigen::Vector3d& volts,
                                    double dt, const DriveMatrices& drive);

/// Jacobians of the one-step map at (state, volts): F_x includes the
/// d(P0(theta) v T)/dtheta coupling column, F_u is the input block, and
/// F_v is identity (additive process noise).
void transition_jacobians(const Eigen::VectorXd& state, const Eigen::Vector3d& volts, double dt,
                          const DriveMatrices& drive, Eigen::MatrixXd& f_x, Eigen::MatrixXd& f_u,
                          Eigen::MatrixXd& f_v);

/// y = [x_w + w1, y_w + w2, theta + w3].
Eigen::Vector3d measure(const Eigen::VectorXd& state, const Eigen::Vector3d& noise);

/// H_x = [I3 | 0], H_w = I3.
void measurement_jacobians(Eigen::MatrixXd& h_x, Eigen::MatrixXd& h_w);

/// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

}  // namespace omnitrack

#include "core/robot.hpp"

#include <cmath>
#include <stdexcept>

namespace omnitrack {

double RobotParams::a1() const {
  const double ratio = gear_ratio / wheel_radius;
  return wheel_inertia * ratio * ratio;
}

double RobotParams::a2() const {
  const double ratio = gear_ratio / wheel_radius;
  return -ratio * ratio *
         (torque_constant * emf_constant / armature_resistance + viscous_friction);
}

double RobotParams::a3() const {
  return torque_constant * gear_ratio / (armature_resistance * wheel_radius);
}

void RobotParams::validate() const {
  const double positives[] = {mass,           body_inertia,    wheel_radius,
                              body_radius,    gear_ratio,      wheel_inertia,
                              torque_constant, emf_constant,   armature_resistance,
                              viscous_friction, supply_voltage};
  for (double v : positives) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("RobotParams: all parameters must be positive and finite");
    }
  }
  if (input_delay_frames < 0) {
    throw std::invalid_argument("RobotParams: input delay must be nonnegative");
  }
  if (!(a1() > 0.0) || !(a2() < 0.0) || !(a3() > 0.0)) {
    throw std::invalid_argument("RobotParams: derived drive constants have wrong signs");
  }
}

DriveMatrices::DriveMatrices(const RobotParams& params) {
  const double a1 = params.a1();
  const double a2 = params.a2();
  const double a3 = params.a3();
  const double m = params.mass;
  const double i0 = params.body_inertia;
  const double l = params.body_radius;

  const double translational = 3.0 * a2 / (2.0 * m + 3.0 * a1);
  const double rotational = 3.0 * a2 / (i0 / (l * l) + 3.0 * a1);
  a22_diag << translational, translational, rotational;

  // B2 is the discretization of the voltage path through the same inertia
  // coupling that produces A22: H^-1 a3 I^-1 P1^T.
  const double beta = a3 / (2.0 * m + 3.0 * a1);
  const double gamma = a3 * l / (i0 + 3.0 * a1 * l * l);
  const double s3 = std::sqrt(3.0);
  b2 << 2.0 * beta, -beta, -beta,
        0.0, s3 * beta, -s3 * beta,
        gamma, gamma, gamma;
}

Eigen::Matrix3d rotation_p0(double theta) {
  const double s = std::sin(theta);
  const double c = std::cos(theta);
  Eigen::Matrix3d p0;
  p0 << s, c, 0.0,
        -c, s, 0.0,
        0.0, 0.0, 1.0;
  return p0;
}

Eigen::Matrix3d wheel_coupling_p1(double body_radius) {
  // psi = pi/6: sin = 1/2, cos = sqrt(3)/2.
  const double half = 0.5;
  const double c = std::sqrt(3.0) / 2.0;
  Eigen::Matrix3d p1;
  p1 << 1.0, 0.0, body_radius,
        -half, c, body_radius,
        -half, -c, body_radius;
  return p1;
}

Eigen::Vector3d body_to_wheel(const Eigen::Vector3d& v_body, const RobotParams& params) {
  return (params.gear_ratio / params.wheel_radius) *
         (wheel_coupling_p1(params.body_radius) * v_body);
}

Eigen::Vector3d wheel_to_body(const Eigen::Vector3d& wheel_rates, const RobotParams& params) {
  return (params.wheel_radius / params.gear_ratio) *
         wheel_coupling_p1(params.body_radius).partialPivLu().solve(wheel_rates);
}

Eigen::Vector3d wheel_to_world(const Eigen::Vector3d& wheel_rates, double theta,
                               const RobotParams& params) {
  return rotation_p0(theta) * wheel_to_body(wheel_rates, params);
}

Eigen::Vector3d continuous_accel(const Eigen::VectorXd& state, const Eigen::Vector3d& volts,
                                 const RobotParams& params) {
  const Eigen::Matrix3d p1 = wheel_coupling_p1(params.body_radius);
  const Eigen::Vector3d inv_inertia(1.0 / params.mass, 1.0 / params.mass,
                                    1.0 / params.body_inertia);
  const Eigen::Matrix3d coupling = inv_inertia.asDiagonal() * (p1.transpose() * p1);
  const Eigen::Matrix3d h = Eigen::Matrix3d::Identity() + params.a1() * coupling;

  const Eigen::Vector3d v = state.segment<3>(kBodyVx);
  Eigen::Vector3d rhs(state(kOmega) * v(1), -state(kOmega) * v(0), 0.0);
  rhs += params.a2() * (coupling * v);
  rhs += params.a3() * (inv_inertia.asDiagonal() * (p1.transpose() * volts));

  Eigen::PartialPivLU<Eigen::Matrix3d> lu(h);
  if (std::abs(lu.determinant()) < 1e-12) {
    throw SingularMatrix("continuous_accel: inertia coupling matrix is singular");
  }
  return lu.solve(rhs);
}

Eigen::VectorXd discrete_transition(const Eigen::VectorXd& state, const Eigen::Vector3d& volts,
                                    double dt, const DriveMatrices& drive) {
  Eigen::VectorXd next(kStateDim);
  const Eigen::Vector3d v = state.segment<3>(kBodyVx);
  next.segment<3>(kWorldX) =
      state.segment<3>(kWorldX) + rotation_p0(state(kHeading)) * v * dt;
  next.segment<3>(kBodyVx) =
      v + (drive.a22_diag.cwiseProduct(v) + drive.b2 * volts) * dt;
  return next;
}

Eigen::VectorXd discrete_transition(const Eigen::VectorXd& state, const Eigen::Vector3d& volts,
                                    double dt, const RobotParams& params) {
  return discrete_transition(state, volts, dt, DriveMatrices(params));
}

void transition_jacobians(const Eigen::VectorXd& state, const Eigen::Vector3d& volts, double dt,
                          const DriveMatrices& drive, Eigen::MatrixXd& f_x, Eigen::MatrixXd& f_u,
                          Eigen::MatrixXd& f_v) {
  (void)volts;  // the map is affine in u
  const double theta = state(kHeading);
  const double s = std::sin(theta);
  const double c = std::cos(theta);
  const double vx = state(kBodyVx);
  const double vy = state(kBodyVy);

  f_x = Eigen::MatrixXd::Identity(kStateDim, kStateDim);
  f_x.block<3, 3>(kWorldX, kBodyVx) = rotation_p0(theta) * dt;
  f_x(kWorldX, kHeading) = (c * vx - s * vy) * dt;
  f_x(kWorldY, kHeading) = (s * vx + c * vy) * dt;
  f_x.block<3, 3>(kBodyVx, kBodyVx) +=
      Eigen::Matrix3d(drive.a22_diag.asDiagonal()) * dt;

  f_u = Eigen::MatrixXd::Zero(kStateDim, kInputDim);
  f_u.block<3, 3>(kBodyVx, 0) = drive.b2 * dt;

  f_v = Eigen::MatrixXd::Identity(kStateDim, kStateDim);
}

Eigen::Vector3d measure(const Eigen::VectorXd& state, const Eigen::Vector3d& noise) {
  return state.head<3>() + noise;
}

void measurement_jacobians(Eigen::MatrixXd& h_x, Eigen::MatrixXd& h_w) {
  h_x = Eigen::MatrixXd::Zero(kMeasDim, kStateDim);
  h_x.leftCols<3>() = Eigen::Matrix3d::Identity();
  h_w = Eigen::MatrixXd::Identity(kMeasDim, kMeasDim);
}

double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * M_PI);
  if (a > M_PI) {
    a -= 2.0 * M_PI;
  } else if (a <= -M_PI) {
    a += 2.0 * M_PI;
  }
  return a;
}

}  // namespace omnitrack

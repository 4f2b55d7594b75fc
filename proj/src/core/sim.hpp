#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "core/rng.hpp"
#include "core/robot.hpp"

namespace omnitrack {

inline constexpr int kTrajectoryCount = 6;
inline constexpr int kFramesPerRun = 601;  // 20 s at 30 Hz, inclusive endpoints

/// Noise model for the simulated measurement pipeline plus the covariances
/// the filters assume for the process.
struct NoiseConfig {
  /// Process disturbance intensities as squared rates: the sigmas describe
  /// the derivative of each state component (velocities for the pose block,
  /// accelerations for the velocity block). The discrete per-step state
  /// noise is step_process_cov(dt) = process_cov * dt^2, which is also the
  /// filters' initial covariance.
  Eigen::MatrixXd process_cov;  // 6x6, diag of squared rate sigmas
  Eigen::MatrixXd meas_cov;     // 3x3 Gaussian component
  double outlier_prob = 0.02;   // Bernoulli per frame
  double court_half_x = 2.45;   // m
  double court_half_y = 1.70;   // m
  double heading_range = M_PI;  // rad, relocation heading span
  bool process_noise_in_truth = false;

  static NoiseConfig defaults();
  void validate() const;

  Eigen::MatrixXd step_process_cov(double dt) const { return process_cov * (dt * dt); }
};

/// Draws a zero-mean Gaussian vector with the given SPD covariance.
Eigen::VectorXd draw_gaussian(RandomStream& rng, const Eigen::MatrixXd& cov);

/// With probability outlier_prob returns the offset that relocates the
/// measured pose to a uniform point of the court (uniform heading too);
/// otherwise nothing.
std::optional<Eigen::Vector3d> draw_relocation(RandomStream& rng, const NoiseConfig& cfg,
                                               const Eigen::VectorXd& true_state);

/// Noise-free reference trajectory: 601 states of the discrete model plus
/// the 600 applied motor voltages that produced them.
struct ReferenceTrajectory {
  int id = 0;
  std::string name;
  RobotParams params;                    // parameters the schedule was built for
  double dt = 1.0 / 30.0;
  std::vector<Eigen::VectorXd> states;   // kFramesPerRun entries
  std::vector<Eigen::Vector3d> inputs;   // kFramesPerRun - 1 entries
  bool inputs_clamped = false;           // true if the supply bound clipped the schedule
};

/// Builds one of the six reference maneuvers (1-based id):
///   1 straight line, constant cruise velocity
///   2 straight line, constant-acceleration triangle wave (accelerate/brake)
///   3 L-shaped path with a sharp 90-degree direction change
///   4 circle at constant speed and turn rate
///   5 ellipse-like oval with a varying turn rate
///   6 zig-zag: straight legs with sudden reversals plus an S-curve arc
/// Throws InvalidTrajectoryId outside 1..6.
ReferenceTrajectory reference_trajectory(int id, const RobotParams& params, double dt);

/// One seeded noisy realization of a reference trajectory.
struct SimRun {
  int trajectory_id = 0;
  std::uint64_t seed = 0;
  std::vector<Eigen::VectorXd> ideal;        // == trajectory states (possibly with process noise)
  std::vector<Eigen::Vector3d> inputs;
  std::vector<Eigen::Vector3d> measurements;  // kFramesPerRun entries
  std::vector<std::uint8_t> outlier_flags;    // per frame; frame 0 is never an outlier
};

/// measurement_k = h(state_k) + gaussian(R) + relocation offset (if fired).
/// Fully reproducible from (trajectory, cfg, seed); stream separation keeps
/// Gaussian, Bernoulli and relocation draws independent.
SimRun simulate_run(const ReferenceTrajectory& trajectory, const NoiseConfig& cfg,
                    std::uint64_t seed);

/// CSV export (frame, ideal state, measured pose, outlier flag, inputs).
void write_sim_run_csv(const SimRun& run, const std::string& path);

}  // namespace omnitrack

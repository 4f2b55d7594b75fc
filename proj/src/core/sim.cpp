#include "core/sim.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <stdexcept>

#include "core/errors.hpp"
#include "core/linalg.hpp"

namespace omnitrack {

namespace {

// Substream tags for the per-run generators.
enum StreamTag : std::uint64_t {
  kMeasGaussStream = 1,
  kBernoulliStream = 2,
  kRelocationStream = 3,
  kProcessStream = 4,
};

// Piecewise-linear profile through (time, value) knots; constant outside.
class Knots {
 public:
  Knots(std::initializer_list<std::pair<double, double>> pts) : pts_(pts) {}

  double operator()(double t) const {
    if (pts_.empty()) return 0.0;
    if (t <= pts_.front().first) return pts_.front().second;
    for (std::size_t i = 1; i < pts_.size(); ++i) {
      if (t <= pts_[i].first) {
        const auto& [t0, v0] = pts_[i - 1];
        const auto& [t1, v1] = pts_[i];
        return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
      }
    }
    return pts_.back().second;
  }

 private:
  std::vector<std::pair<double, double>> pts_;
};

struct Maneuver {
  std::string name;
  Eigen::Vector3d start_pose;
  std::function<Eigen::Vector3d(double)> body_velocity;  // desired [vx, vy, omega](t)
};

// The six maneuver schedules. Cruise speeds and accelerations are sized so
// the exact input inversion stays inside the supply-voltage bound and the
// paths stay inside the court for the default parameters.
Maneuver maneuver(int id) {
  switch (id) {
    case 1: {
      // Straight line at constant cruise velocity (world +x).
      Knots vy{{0.0, 0.0}, {1.0, 0.20}};
      return {"line_cv", {-2.0, 0.0, 0.0},
              [vy](double t) { return Eigen::Vector3d(0.0, vy(t), 0.0); }};
    }
    case 2: {
      // Straight line, constant-acceleration triangle wave: accelerate,
      // brake through zero, repeat in the opposite direction.
      Knots vx{{0.0, 0.0},   {2.4, 0.624}, {7.2, -0.624},
               {12.0, 0.624}, {16.8, -0.624}, {20.0, 0.208}};
      return {"line_accel", {0.0, 1.45, 0.0},
              [vx](double t) { return Eigen::Vector3d(vx(t), 0.0, 0.0); }};
    }
    case 3: {
      // Two straight legs joined by a sharp 90-degree direction change.
      Knots vx{{0.0, 0.0}, {0.6, 0.28}, {9.4, 0.28}, {10.1, 0.0}};
      Knots vy{{9.7, 0.0}, {10.4, 0.28}, {19.4, 0.28}, {19.9, 0.0}};
      return {"l_turn", {-1.3, 1.3, 0.0},
              [vx, vy](double t) { return Eigen::Vector3d(vx(t), vy(t), 0.0); }};
    }
    case 4: {
      // Circle: constant forward speed and turn rate (radius 1 m).
      Knots vy{{0.0, 0.0}, {1.2, 0.50}};
      Knots om{{0.0, 0.0}, {1.2, 0.50}};
      return {"circle", {0.6, -0.5, 0.0},
              [vy, om](double t) { return Eigen::Vector3d(0.0, vy(t), om(t)); }};
    }
    case 5: {
      // Oval: constant forward speed, sinusoidally varying turn rate.
      Knots vy{{0.0, 0.0}, {1.2, 0.45}};
      return {"ellipse", {-0.5, -0.55, 0.0}, [vy](double t) {
                const double om =
                    t <= 1.2 ? 0.625 * t
                             : 0.55 + 0.20 * std::cos(2.0 * M_PI * (t - 1.2) / 9.5);
                return Eigen::Vector3d(0.0, vy(t), om);
              }};
    }
    case 6: {
      // Zig-zag: straight legs with sudden reversals, an S-curve of arcs in
      // the middle, then more reversals.
      Knots vx{{0.0, 0.0},  {0.8, 0.40},  {2.4, 0.40},  {4.0, -0.40},
               {5.6, -0.40}, {7.2, 0.40},  {8.6, 0.40},  {9.4, 0.0},
               {15.0, 0.0},  {15.8, 0.40}, {16.8, 0.40}, {18.4, -0.40},
               {19.0, -0.40}, {19.9, 0.0}};
      Knots vy{{9.4, 0.0}, {10.0, 0.40}, {13.4, 0.40}, {14.6, 0.0}};
      Knots om{{10.0, 0.0},  {10.6, 0.80},  {11.6, 0.80}, {12.8, -0.80},
               {13.8, -0.80}, {14.6, 0.0}};
      return {"zigzag", {-1.9, 1.0, 0.0}, [vx, vy, om](double t) {
                return Eigen::Vector3d(vx(t), vy(t), om(t));
              }};
    }
    default:
      throw InvalidTrajectoryId("trajectory id must be in 1..6, got " + std::to_string(id));
  }
}

}  // namespace

NoiseConfig NoiseConfig::defaults() {
  NoiseConfig cfg;
  Eigen::VectorXd q_sigma(kStateDim);
  q_sigma << 0.067, 0.067, 0.2, 2.0, 2.0, 2.0;
  cfg.process_cov = q_sigma.array().square().matrix().asDiagonal();
  Eigen::Vector3d r_sigma(0.005, 0.005, 0.020);
  cfg.meas_cov = r_sigma.array().square().matrix().asDiagonal();
  return cfg;
}

void NoiseConfig::validate() const {
  if (process_cov.rows() != kStateDim || process_cov.cols() != kStateDim ||
      meas_cov.rows() != kMeasDim || meas_cov.cols() != kMeasDim) {
    throw DimensionMismatch("NoiseConfig: covariance dimensions must be 6x6 and 3x3");
  }
  cholesky(symmetrized(process_cov));
  cholesky(symmetrized(meas_cov));
  if (!(outlier_prob >= 0.0) || !(outlier_prob < 1.0)) {
    throw std::invalid_argument("NoiseConfig: outlier_prob must be in [0, 1)");
  }
  if (!(court_half_x > 0.0) || !(court_half_y > 0.0) || !(heading_range > 0.0)) {
    throw std::invalid_argument("NoiseConfig: court extents must be positive");
  }
}

Eigen::VectorXd draw_gaussian(RandomStream& rng, const Eigen::MatrixXd& cov) {
  return rng.gaussian_with_cov(cov);
}

std::optional<Eigen::Vector3d> draw_relocation(RandomStream& rng, const NoiseConfig& cfg,
                                               const Eigen::VectorXd& true_state) {
  if (!rng.bernoulli(cfg.outlier_prob)) {
    return std::nullopt;
  }
  Eigen::Vector3d target(rng.uniform(-cfg.court_half_x, cfg.court_half_x),
                         rng.uniform(-cfg.court_half_y, cfg.court_half_y),
                         rng.uniform(-cfg.heading_range, cfg.heading_range));
  return Eigen::Vector3d(target - true_state.head<3>());
}

ReferenceTrajectory reference_trajectory(int id, const RobotParams& params, double dt) {
  const Maneuver plan = maneuver(id);
  const DriveMatrices drive(params);
  const Eigen::Matrix3d step_gain = drive.b2 * dt;
  const Eigen::PartialPivLU<Eigen::Matrix3d> gain_lu(step_gain);
  const Eigen::Vector3d hold = Eigen::Vector3d::Ones() + drive.a22_diag * dt;

  ReferenceTrajectory traj;
  traj.id = id;
  traj.name = plan.name;
  traj.params = params;
  traj.dt = dt;
  traj.states.reserve(kFramesPerRun);
  traj.inputs.reserve(kFramesPerRun - 1);

  Eigen::VectorXd state(kStateDim);
  state << plan.start_pose, plan.body_velocity(0.0);
  traj.states.push_back(state);

  const double bound = params.supply_voltage;
  for (int k = 0; k + 1 < kFramesPerRun; ++k) {
    const Eigen::Vector3d v_now = state.segment<3>(kBodyVx);
    const Eigen::Vector3d v_want = plan.body_velocity((k + 1) * dt);
    // Exact one-step inversion of the velocity dynamics, clipped to the
    // supply bound if the schedule ever asks for more than the motors have.
    Eigen::Vector3d u = gain_lu.solve(v_want - hold.cwiseProduct(v_now));
    for (int i = 0; i < 3; ++i) {
      if (std::abs(u(i)) > bound) {
        u(i) = std::copysign(bound, u(i));
        traj.inputs_clamped = true;
      }
    }
    traj.inputs.push_back(u);
    state = discrete_transition(state, u, dt, drive);
    traj.states.push_back(state);
  }
  return traj;
}

SimRun simulate_run(const ReferenceTrajectory& trajectory, const NoiseConfig& cfg,
                    std::uint64_t seed) {
  cfg.validate();
  RandomStream base(seed);
  RandomStream meas_rng = base.substream(kMeasGaussStream);
  RandomStream bern_rng = base.substream(kBernoulliStream);
  RandomStream reloc_rng = base.substream(kRelocationStream);
  RandomStream process_rng = base.substream(kProcessStream);

  SimRun run;
  run.trajectory_id = trajectory.id;
  run.seed = seed;
  run.inputs = trajectory.inputs;
  run.ideal = trajectory.states;

  if (cfg.process_noise_in_truth) {
    // Optional robustness mode: re-roll the truth with injected process noise.
    const CholeskyFactor q_chol =
        cholesky(symmetrized(cfg.step_process_cov(trajectory.dt)));
    const DriveMatrices drive(trajectory.params);
    Eigen::VectorXd state = trajectory.states.front();
    run.ideal[0] = state;
    for (std::size_t k = 0; k + 1 < run.ideal.size(); ++k) {
      state = discrete_transition(state, trajectory.inputs[k], trajectory.dt, drive);
      state += process_rng.gaussian_with_factor(q_chol);
      run.ideal[k + 1] = state;
    }
  }

  const CholeskyFactor r_chol = cholesky(symmetrized(cfg.meas_cov));
  run.measurements.reserve(run.ideal.size());
  run.outlier_flags.assign(run.ideal.size(), 0);
  for (std::size_t k = 0; k < run.ideal.size(); ++k) {
    Eigen::Vector3d noise = meas_rng.gaussian_with_factor(r_chol);
    Eigen::Vector3d y = measure(run.ideal[k], noise);
    if (k > 0) {  // frame 0 bootstraps the filters; keep it relocation-free
      if (bern_rng.bernoulli(cfg.outlier_prob)) {
        Eigen::Vector3d target(reloc_rng.uniform(-cfg.court_half_x, cfg.court_half_x),
                               reloc_rng.uniform(-cfg.court_half_y, cfg.court_half_y),
                               reloc_rng.uniform(-cfg.heading_range, cfg.heading_range));
        y += target - run.ideal[k].head<3>();
        run.outlier_flags[k] = 1;
      }
    }
    run.measurements.push_back(y);
  }
  return run;
}

void write_sim_run_csv(const SimRun& run, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (f == nullptr) {
    throw std::runtime_error("cannot open for writing: " + path);
  }
  std::fputs(
      "frame,x_ref,y_ref,theta_ref,vx_ref,vy_ref,omega_ref,"
      "x_meas,y_meas,theta_meas,outlier,u1,u2,u3\n",
      f);
  for (std::size_t k = 0; k < run.ideal.size(); ++k) {
    const Eigen::VectorXd& s = run.ideal[k];
    const Eigen::Vector3d& y = run.measurements[k];
    const Eigen::Vector3d u =
        k < run.inputs.size() ? run.inputs[k] : Eigen::Vector3d::Zero();
    std::fprintf(f,
                 "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,"
                 "%.17g,%.17g,%.17g\n",
                 k, s(0), s(1), s(2), s(3), s(4), s(5), y(0), y(1), y(2),
                 static_cast<int>(run.outlier_flags[k]), u(0), u(1), u(2));
  }
  std::fclose(f);
}

}  // namespace omnitrack

#include <gtest/gtest.h>

#include <memory>

#include "core/gaussian_filters.hpp"
#include "core/sim.hpp"
#include "support/linear_model.hpp"

using namespace omnitrack;
using omnitrack::testing::KalmanOracle;
using omnitrack::testing::LinearModel;
using omnitrack::testing::LinearSystem;

namespace {

std::vector<std::unique_ptr<GaussianFilterBase>> all_gaussian_filters(
    std::shared_ptr<const StateModel> model) {
  std::vector<std::unique_ptr<GaussianFilterBase>> filters;
  filters.push_back(std::make_unique<ExtendedKalmanFilter>(model));
  filters.push_back(std::make_unique<UnscentedKalmanFilter>(model));
  filters.push_back(std::make_unique<CentralDifferenceKalmanFilter>(model));
  filters.push_back(std::make_unique<DividedDifferenceFilter>(model, 1));
  filters.push_back(std::make_unique<DividedDifferenceFilter>(model, 2));
  filters.push_back(std::make_unique<SquareRootUnscentedKalmanFilter>(model));
  filters.push_back(std::make_unique<SquareRootCentralDifferenceKalmanFilter>(model));
  return filters;
}

const char* kGaussianNames[] = {"ekf", "ukf", "cdkf", "dd1", "dd2", "srukf", "srcdkf"};

/// Drives a linear-Gaussian system with deterministic pseudo-measurements.
struct LinearScenario {
  LinearSystem sys = omnitrack::testing::default_linear_system();
  RandomStream rng{2024};

  Eigen::VectorXd truth;
  Eigen::MatrixXd q_chol, r_chol;

  LinearScenario() {
    truth = sys.x0;
    q_chol = cholesky(sys.q).L;
    r_chol = cholesky(sys.r).L;
  }

  Eigen::VectorXd input(int k) {
    Eigen::VectorXd u(3);
    u << std::sin(0.05 * k), std::cos(0.07 * k), 0.2 * std::sin(0.011 * k);
    return 4.0 * u;
  }

  Eigen::VectorXd advance(int k) {
    Eigen::VectorXd z(truth.size());
    rng.gaussian_fill(z);
    truth = sys.a * truth + sys.b * input(k) + q_chol * z;
    Eigen::VectorXd w(3);
    rng.gaussian_fill(w);
    return sys.h * truth + r_chol * w;
  }
};

}  // namespace

TEST(GaussianFilters, AllMatchKalmanOracleOnLinearSystem) {
  LinearScenario scenario;
  auto model = std::make_shared<LinearModel>(scenario.sys.a, scenario.sys.b, scenario.sys.h);
  KalmanOracle oracle(*model, scenario.sys.q, scenario.sys.r);
  oracle.init(scenario.sys.x0, scenario.sys.p0);

  auto filters = all_gaussian_filters(model);
  for (auto& f : filters) {
    f->init(scenario.sys.x0, scenario.sys.p0, scenario.sys.q, scenario.sys.r);
  }

  for (int k = 0; k < 100; ++k) {
    const Eigen::VectorXd u = scenario.input(k);
    const Eigen::VectorXd y = scenario.advance(k);
    oracle.step(u, y);
    for (std::size_t i = 0; i < filters.size(); ++i) {
      filters[i]->step(u, y);
    }
  }
  for (std::size_t i = 0; i < filters.size(); ++i) {
    const double state_err = (filters[i]->estimate() - oracle.mean()).cwiseAbs().maxCoeff();
    EXPECT_LT(state_err, 1e-8) << kGaussianNames[i];
    const double cov_err = (filters[i]->covariance() - oracle.cov()).cwiseAbs().maxCoeff();
    EXPECT_LT(cov_err, 1e-8) << kGaussianNames[i];
    EXPECT_EQ(filters[i]->reset_events(), 0u) << kGaussianNames[i];
  }
}

TEST(GaussianFilters, ScalarHandComputedKalmanStep) {
  // x_k = x_{k-1} + v, y = x + w with P = Q = R = 1:
  // predicted P = 2, gain = 2/3, posterior P = 2/3.
  auto model = std::make_shared<LinearModel>(Eigen::MatrixXd::Identity(1, 1),
                                             Eigen::MatrixXd::Zero(1, 1),
                                             Eigen::MatrixXd::Identity(1, 1));
  ExtendedKalmanFilter ekf(model);
  const Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
  ekf.init(Eigen::VectorXd::Zero(1), one, one, one);

  const Eigen::VectorXd u = Eigen::VectorXd::Zero(1);
  ekf.time_update(u);
  EXPECT_NEAR(ekf.covariance()(0, 0), 2.0, 1e-14);

  ekf.measurement_prepare();
  Eigen::VectorXd y(1);
  y << 1.0;
  ekf.measurement_apply(y);
  EXPECT_NEAR(ekf.covariance()(0, 0), 2.0 / 3.0, 1e-14);
  EXPECT_NEAR(ekf.estimate()(0), 2.0 / 3.0, 1e-14);  // gain 2/3 times residual 1
}

TEST(GaussianFilters, PredictInflatesCovarianceByProcessNoise) {
  LinearScenario scenario;
  auto model = std::make_shared<LinearModel>(scenario.sys.a, scenario.sys.b, scenario.sys.h);
  ExtendedKalmanFilter ekf(model);
  ekf.init(scenario.sys.x0, scenario.sys.p0, scenario.sys.q, scenario.sys.r);
  const Eigen::MatrixXd before = ekf.covariance();
  ekf.time_update(scenario.input(0));
  const Eigen::MatrixXd grown = ekf.covariance();
  const Eigen::MatrixXd shifted = scenario.sys.a * before * scenario.sys.a.transpose();
  EXPECT_GE(grown.trace(), shifted.trace());
}

TEST(GaussianFilters, UpdateNeverInflatesCovariance) {
  LinearScenario scenario;
  auto model = std::make_shared<LinearModel>(scenario.sys.a, scenario.sys.b, scenario.sys.h);
  ExtendedKalmanFilter ekf(model);
  ekf.init(scenario.sys.x0, scenario.sys.p0, scenario.sys.q, scenario.sys.r);
  for (int k = 0; k < 20; ++k) {
    const Eigen::VectorXd u = scenario.input(k);
    const Eigen::VectorXd y = scenario.advance(k);
    ekf.time_update(u);
    const Eigen::MatrixXd predicted = ekf.covariance();
    ekf.measurement_prepare();
    ekf.measurement_apply(y);
    const Eigen::MatrixXd posterior = ekf.covariance();
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(predicted - posterior);
    EXPECT_GT(eig.eigenvalues().minCoeff(), -1e-10);
  }
}

TEST(GaussianFilters, ZeroInnovationKeepsPrediction) {
  LinearScenario scenario;
  auto model = std::make_shared<LinearModel>(scenario.sys.a, scenario.sys.b, scenario.sys.h);
  ExtendedKalmanFilter ekf(model);
  Eigen::VectorXd x0(6);
  x0 << 0.3, -0.2, 0.5, 0.1, 0.0, -0.05;
  ekf.init(x0, scenario.sys.p0, scenario.sys.q, scenario.sys.r);
  const Eigen::VectorXd u = scenario.input(1);
  ekf.time_update(u);
  ekf.measurement_prepare();
  const Eigen::VectorXd predicted_mean = ekf.estimate();
  ekf.measurement_apply(ekf.predicted_measurement());
  EXPECT_LT((ekf.estimate() - predicted_mean).norm(), 1e-14);
}

TEST(UnscentedTransform, SigmaMomentsMatchBelief) {
  // Identity dynamics isolate the sigma-point reconstruction: after one
  // (noise-free) time update the moments must reproduce (mean, P).
  auto id_model = std::make_shared<LinearModel>(Eigen::MatrixXd::Identity(6, 6),
                                                Eigen::MatrixXd::Zero(6, 3),
                                                Eigen::MatrixXd::Identity(3, 6));
  UnscentedKalmanFilter ukf(id_model);
  Eigen::VectorXd x0(6);
  x0 << 1.0, -2.0, 0.5, 0.1, 0.2, -0.3;
  RandomStream rng(5);
  Eigen::MatrixXd l(6, 6);
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) {
      l(i, j) = rng.gaussian();
    }
  }
  const Eigen::MatrixXd p0 = l * l.transpose() + Eigen::MatrixXd::Identity(6, 6);
  const Eigen::MatrixXd q = 1e-12 * Eigen::MatrixXd::Identity(6, 6);
  const Eigen::MatrixXd r = Eigen::MatrixXd::Identity(3, 3);
  ukf.init(x0, p0, q, r);
  ukf.time_update(Eigen::VectorXd::Zero(3));
  EXPECT_LT((ukf.estimate() - x0).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((ukf.covariance() - p0).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(UnscentedTransform, ExactForAffineMap) {
  LinearScenario scenario;
  auto model = std::make_shared<LinearModel>(scenario.sys.a, scenario.sys.b, scenario.sys.h);
  UnscentedKalmanFilter ukf(model);
  Eigen::VectorXd x0(6);
  x0 << 0.2, 0.4, -0.6, 0.8, -1.0, 1.2;
  const Eigen::MatrixXd p0 = 0.5 * Eigen::MatrixXd::Identity(6, 6);
  ukf.init(x0, p0, scenario.sys.q, scenario.sys.r);
  const Eigen::VectorXd u = scenario.input(3);
  ukf.time_update(u);
  const Eigen::VectorXd exact_mean = scenario.sys.a * x0 + scenario.sys.b * u;
  const Eigen::MatrixXd exact_cov =
      scenario.sys.a * p0 * scenario.sys.a.transpose() + scenario.sys.q;
  EXPECT_LT((ukf.estimate() - exact_mean).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((ukf.covariance() - exact_cov).cwiseAbs().maxCoeff(), 1e-10);
}

namespace {

// Quadratic scalar measurement y = x^2: a second-order filter predicts
// E[y] = x^2 + P exactly, a first-order one only x^2.
class QuadraticMeasurementModel final : public StateModel {
 public:
  Eigen::Index state_dim() const override { return 1; }
  Eigen::Index input_dim() const override { return 1; }
  Eigen::Index meas_dim() const override { return 1; }
  void transition(const Eigen::VectorXd& x, const Eigen::VectorXd&,
                  Eigen::VectorXd& out) const override {
    out = x;
  }
  void observe(const Eigen::VectorXd& x, Eigen::VectorXd& out) const override {
    out.resize(1);
    out(0) = x(0) * x(0);
  }
  void transition_jacobian(const Eigen::VectorXd&, const Eigen::VectorXd&,
                           Eigen::MatrixXd& f_x) const override {
    f_x = Eigen::MatrixXd::Identity(1, 1);
  }
  void observation_jacobian(const Eigen::VectorXd& x, Eigen::MatrixXd& h_x) const override {
    h_x.resize(1, 1);
    h_x(0, 0) = 2.0 * x(0);
  }
};

}  // namespace

TEST(DividedDifference, SecondOrderCapturesQuadraticBias) {
  auto model = std::make_shared<QuadraticMeasurementModel>();
  const Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
  const double mean0 = 1.5;
  const double var0 = 0.49;

  DividedDifferenceFilter dd1(model, 1);
  DividedDifferenceFilter dd2(model, 2);
  Eigen::VectorXd x0(1);
  x0 << mean0;
  // Q tiny so the predicted variance stays var0 through the time update.
  dd1.init(x0, var0 * one, 1e-16 * one, one);
  dd2.init(x0, var0 * one, 1e-16 * one, one);
  const Eigen::VectorXd u = Eigen::VectorXd::Zero(1);
  dd1.time_update(u);
  dd2.time_update(u);
  dd1.measurement_prepare();
  dd2.measurement_prepare();

  EXPECT_NEAR(dd1.predicted_measurement()(0), mean0 * mean0, 1e-9);
  EXPECT_NEAR(dd2.predicted_measurement()(0), mean0 * mean0 + var0, 1e-9);
}

TEST(SquareRootVariants, FactorsMatchDenseSiblingsOnRobotRun) {
  const RobotParams params;
  const double dt = 1.0 / 30.0;
  auto model = std::make_shared<RobotModel>(params, dt);
  const ReferenceTrajectory traj = reference_trajectory(4, params, dt);
  const NoiseConfig noise = NoiseConfig::defaults();
  const SimRun run = simulate_run(traj, noise, 3);

  UnscentedKalmanFilter ukf(model);
  SquareRootUnscentedKalmanFilter srukf(model);
  CentralDifferenceKalmanFilter cdkf(model);
  SquareRootCentralDifferenceKalmanFilter srcdkf(model);

  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(kStateDim);
  x0.head<3>() = run.measurements[0];
  const Eigen::MatrixXd p0 = noise.step_process_cov(dt);
  for (GaussianFilterBase* f :
       std::initializer_list<GaussianFilterBase*>{&ukf, &srukf, &cdkf, &srcdkf}) {
    f->init(x0, p0, p0, noise.meas_cov);
  }

  double max_ukf_diff = 0.0;
  double max_cdkf_diff = 0.0;
  for (std::size_t k = 1; k < run.measurements.size(); ++k) {
    const Eigen::VectorXd u = run.inputs[k - 1];
    const Eigen::VectorXd y = run.measurements[k];
    ukf.step(u, y);
    srukf.step(u, y);
    cdkf.step(u, y);
    srcdkf.step(u, y);
    max_ukf_diff =
        std::max(max_ukf_diff, (ukf.covariance() - srukf.covariance()).cwiseAbs().maxCoeff());
    max_cdkf_diff = std::max(
        max_cdkf_diff, (cdkf.covariance() - srcdkf.covariance()).cwiseAbs().maxCoeff());
  }
  EXPECT_LT(max_ukf_diff, 1e-7);
  EXPECT_LT(max_cdkf_diff, 1e-7);
  EXPECT_EQ(srukf.reset_events(), 0u);
  EXPECT_EQ(srcdkf.reset_events(), 0u);
}

TEST(GaussianFilters, CovarianceStaysSymmetricOnRobotRun) {
  const RobotParams params;
  const double dt = 1.0 / 30.0;
  auto model = std::make_shared<RobotModel>(params, dt);
  const ReferenceTrajectory traj = reference_trajectory(6, params, dt);
  const NoiseConfig noise = NoiseConfig::defaults();
  const SimRun run = simulate_run(traj, noise, 11);

  auto filters = all_gaussian_filters(model);
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(kStateDim);
  x0.head<3>() = run.measurements[0];
  const Eigen::MatrixXd p0 = noise.step_process_cov(dt);
  for (auto& f : filters) {
    f->init(x0, p0, p0, noise.meas_cov);
  }
  for (std::size_t k = 1; k < run.measurements.size(); ++k) {
    for (auto& f : filters) {
      f->step(run.inputs[k - 1], run.measurements[k]);
      const Eigen::MatrixXd p = f->covariance();
      EXPECT_LT((p - p.transpose()).cwiseAbs().maxCoeff(), 1e-10);
    }
  }
}

TEST(GaussianFilters, HeadingInnovationIsWrapped) {
  const RobotParams params;
  const double dt = 1.0 / 30.0;
  auto model = std::make_shared<RobotModel>(params, dt);
  ExtendedKalmanFilter ekf(model);
  const NoiseConfig noise = NoiseConfig::defaults();

  // Unwrapped heading near 2 pi; measurement reported near zero. A wrapped
  // residual nudges the estimate, an unwrapped one would yank it by ~2 pi.
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(kStateDim);
  x0(kHeading) = 2.0 * M_PI - 0.05;
  ekf.init(x0, noise.step_process_cov(dt), noise.step_process_cov(dt), noise.meas_cov);
  Eigen::VectorXd y(3);
  y << 0.0, 0.0, 0.02;
  ekf.step(Eigen::VectorXd::Zero(3), y);
  EXPECT_GT(ekf.estimate()(kHeading), 2.0 * M_PI - 0.06);
  EXPECT_LT(ekf.estimate()(kHeading), 2.0 * M_PI + 0.1);
}

TEST(PredictAhead, MatchesSingleTimeUpdate) {
  const RobotParams params;
  const double dt = 1.0 / 30.0;
  auto model = std::make_shared<RobotModel>(params, dt);
  UnscentedKalmanFilter a(model), b(model);
  const NoiseConfig noise = NoiseConfig::defaults();
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(kStateDim);
  x0(kBodyVx) = 0.4;
  a.init(x0, noise.step_process_cov(dt), noise.step_process_cov(dt), noise.meas_cov);
  b.init(x0, noise.step_process_cov(dt), noise.step_process_cov(dt), noise.meas_cov);

  std::vector<Eigen::VectorXd> inputs{Eigen::VectorXd::Constant(3, 1.5)};
  const Eigen::Vector3d ahead = a.predict_pose_ahead(inputs);
  b.time_update(inputs[0]);
  EXPECT_LT((ahead - b.estimate().head<3>()).norm(), 1e-14);
}

TEST(PredictAhead, StaticRobotStaysPut) {
  const RobotParams params;
  const double dt = 1.0 / 30.0;
  auto model = std::make_shared<RobotModel>(params, dt);
  ExtendedKalmanFilter ekf(model);
  const NoiseConfig noise = NoiseConfig::defaults();
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(kStateDim);
  x0(kWorldX) = 0.7;
  x0(kWorldY) = -0.3;
  x0(kHeading) = 0.25;
  ekf.init(x0, noise.step_process_cov(dt), noise.step_process_cov(dt), noise.meas_cov);
  std::vector<Eigen::VectorXd> inputs(8, Eigen::VectorXd::Zero(3));
  const Eigen::Vector3d pose = ekf.predict_pose_ahead(inputs);
  EXPECT_LT((pose - Eigen::Vector3d(x0.head<3>())).norm(), 1e-12);
}

TEST(PredictAhead, LinearClosedFormRollout) {
  LinearScenario scenario;
  auto model = std::make_shared<LinearModel>(scenario.sys.a, scenario.sys.b, scenario.sys.h);
  ExtendedKalmanFilter ekf(model);
  ekf.init(scenario.sys.x0, scenario.sys.p0, scenario.sys.q, scenario.sys.r);

  const int n_ahead = 5;
  std::vector<Eigen::VectorXd> inputs;
  Eigen::VectorXd mean = scenario.sys.x0;
  Eigen::MatrixXd cov = scenario.sys.p0;
  for (int k = 0; k < n_ahead; ++k) {
    inputs.push_back(scenario.input(k));
    mean = scenario.sys.a * mean + scenario.sys.b * inputs.back();
    cov = scenario.sys.a * cov * scenario.sys.a.transpose() + scenario.sys.q;
  }
  const Eigen::Vector3d pose = ekf.predict_pose_ahead(inputs);
  EXPECT_LT((pose - Eigen::Vector3d(mean.head<3>())).norm(), 1e-12);

  // The same rollout stepped in place reproduces the closed-form covariance.
  ExtendedKalmanFilter clone(model);
  clone.init(scenario.sys.x0, scenario.sys.p0, scenario.sys.q, scenario.sys.r);
  for (int k = 0; k < n_ahead; ++k) {
    clone.time_update(inputs[k]);
  }
  EXPECT_LT((clone.covariance() - cov).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(PredictAhead, IsPureForEveryVariant) {
  const RobotParams params;
  const double dt = 1.0 / 30.0;
  auto model = std::make_shared<RobotModel>(params, dt);
  const ReferenceTrajectory traj = reference_trajectory(2, params, dt);
  const NoiseConfig noise = NoiseConfig::defaults();
  const SimRun run = simulate_run(traj, noise, 5);

  auto with_chain = all_gaussian_filters(model);
  auto without_chain = all_gaussian_filters(model);
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(kStateDim);
  x0.head<3>() = run.measurements[0];
  const Eigen::MatrixXd p0 = noise.step_process_cov(dt);
  for (auto& f : with_chain) {
    f->init(x0, p0, p0, noise.meas_cov);
  }
  for (auto& f : without_chain) {
    f->init(x0, p0, p0, noise.meas_cov);
  }

  std::vector<Eigen::VectorXd> inputs(run.inputs.begin(), run.inputs.begin() + 8);
  for (std::size_t k = 1; k < 120; ++k) {
    for (std::size_t i = 0; i < with_chain.size(); ++i) {
      with_chain[i]->predict_pose_ahead(
          std::span<const Eigen::VectorXd>(inputs.data(), 8));
      with_chain[i]->step(run.inputs[k - 1], run.measurements[k]);
      without_chain[i]->step(run.inputs[k - 1], run.measurements[k]);
    }
  }
  for (std::size_t i = 0; i < with_chain.size(); ++i) {
    EXPECT_EQ(with_chain[i]->estimate(), without_chain[i]->estimate()) << kGaussianNames[i];
    EXPECT_EQ(with_chain[i]->covariance(), without_chain[i]->covariance())
        << kGaussianNames[i];
  }
}

TEST(GaussianFilters, NoResetsAcrossSeedsOnCleanNoise) {
  const RobotParams params;
  const double dt = 1.0 / 30.0;
  auto model = std::make_shared<RobotModel>(params, dt);
  NoiseConfig noise = NoiseConfig::defaults();
  noise.outlier_prob = 0.0;
  const ReferenceTrajectory traj = reference_trajectory(3, params, dt);

  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const SimRun run = simulate_run(traj, noise, seed);
    auto filters = all_gaussian_filters(model);
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(kStateDim);
    x0.head<3>() = run.measurements[0];
    const Eigen::MatrixXd p0 = noise.step_process_cov(dt);
    for (auto& f : filters) {
      f->init(x0, p0, p0, noise.meas_cov);
    }
    for (std::size_t k = 1; k < run.measurements.size(); ++k) {
      for (auto& f : filters) {
        f->step(run.inputs[k - 1], run.measurements[k]);
      }
    }
    for (std::size_t i = 0; i < filters.size(); ++i) {
      EXPECT_EQ(filters[i]->reset_events(), 0u) << kGaussianNames[i] << " seed " << seed;
    }
  }
}

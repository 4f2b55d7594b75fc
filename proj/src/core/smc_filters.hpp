#pragma once

#include <memory>
#include <vector>

#include "core/gate.hpp"
#include "core/gaussian_filters.hpp"
#include "core/rng.hpp"

namespace omnitrack {

/// Systematic resampling: N stratified positions with a single uniform
/// offset and stride 1/N. Expected copy count of index i is N * w(i).
void systematic_resample(const Eigen::VectorXd& weights, double offset01,
                         std::vector<int>& indices);

struct PfOptions {
  int particle_count = 600;
  bool ess_resampling = false;  // default: resample every step
  double ess_fraction = 0.5;
};

/// Generic bootstrap particle filter: transition-prior proposal, Gaussian
/// measurement likelihood, systematic resampling.
class ParticleFilter final : public TrackingFilter {
 public:
  ParticleFilter(std::shared_ptr<const StateModel> model, const PfOptions& opts,
                 RandomStream rng);

  void init(const Eigen::VectorXd& x0, const Eigen::MatrixXd& p0, const Eigen::MatrixXd& q,
            const Eigen::MatrixXd& r) override;
  void step(const Eigen::VectorXd& u, const Eigen::VectorXd& y) override;
  Eigen::VectorXd estimate() const override { return estimate_; }
  Eigen::Vector3d predict_pose_ahead(std::span<const Eigen::VectorXd> inputs) override;

  std::uint64_t weight_collapse_events() const { return collapses_; }
  const Eigen::MatrixXd& particles() const { return particles_; }
  const Eigen::VectorXd& weights() const { return weights_; }

 private:
  std::shared_ptr<const StateModel> model_;
  PfOptions opts_;
  RandomStream rng_;
  Eigen::Index n_, m_;

  Eigen::MatrixXd q_chol_, r_chol_;
  Eigen::MatrixXd particles_, gather_, chain_;
  Eigen::VectorXd log_weights_, weights_, estimate_;
  Eigen::VectorXd noise_, scratch_x_, scratch_y_, resid_, obs_;
  std::vector<int> indices_;
  std::uint64_t collapses_ = 0;
};

struct SppfOptions {
  int particle_count = 600;
  enum class Proposal { kSrukf, kSrcdkf } proposal = Proposal::kSrukf;
  bool gated = false;
  GateConfig gate;
  /// Scale on the proposal sampling noise; tests use 0 for a deterministic
  /// reduction to the underlying square-root filter.
  double sample_scale = 1.0;
};

/// Sigma-point particle filter: each particle carries its own square-root
/// Kalman belief, the posterior of which serves as the importance proposal.
class SigmaPointParticleFilter final : public TrackingFilter {
 public:
  SigmaPointParticleFilter(std::shared_ptr<const StateModel> model, const SppfOptions& opts,
                           RandomStream rng);

  void init(const Eigen::VectorXd& x0, const Eigen::MatrixXd& p0, const Eigen::MatrixXd& q,
            const Eigen::MatrixXd& r) override;
  void step(const Eigen::VectorXd& u, const Eigen::VectorXd& y) override;
  Eigen::VectorXd estimate() const override { return estimate_; }
  Eigen::Vector3d predict_pose_ahead(std::span<const Eigen::VectorXd> inputs) override;

  std::uint64_t reset_events() const override { return engine_->reset_events(); }
  std::uint64_t rejected_measurements() const override { return rejected_; }
  std::uint64_t weight_collapse_events() const { return collapses_; }

 private:
  double measurement_log_likelihood(const Eigen::VectorXd& y, const Eigen::VectorXd& x);

  std::shared_ptr<const StateModel> model_;
  SppfOptions opts_;
  RandomStream rng_;
  Eigen::Index n_, m_;

  std::unique_ptr<SquareRootGaussianFilter> engine_;
  Eigen::MatrixXd q_chol_, r_chol_, reset_cov_;

  Eigen::MatrixXd states_, prev_states_, means_, gather_states_, gather_means_, chain_;
  std::vector<Eigen::MatrixXd> sqrts_, gather_sqrts_;
  Eigen::VectorXd log_weights_, weights_, estimate_;
  Eigen::VectorXd z_, scratch_x_, scratch_y_, resid_, obs_, f_prev_;
  std::vector<int> indices_;
  std::uint64_t rejected_ = 0;
  std::uint64_t collapses_ = 0;
};

struct GmsppfOptions {
  int components = 3;
  int particle_count = 600;
  int em_max_iters = 10;
  double cov_floor = 1e-9;
  double weight_floor = 1e-6;
  SppfOptions::Proposal proposal = SppfOptions::Proposal::kSrcdkf;
  bool gated = false;
  GateConfig gate;
};

/// Gaussian-mixture sigma-point particle filter: a bank of square-root
/// Kalman components, an importance-sampling correction against the prior
/// mixture, and a weighted EM refit back to a fixed-size mixture.
class GaussianMixtureSppf final : public TrackingFilter {
 public:
  GaussianMixtureSppf(std::shared_ptr<const StateModel> model, const GmsppfOptions& opts,
                      RandomStream rng);

  void init(const Eigen::VectorXd& x0, const Eigen::MatrixXd& p0, const Eigen::MatrixXd& q,
            const Eigen::MatrixXd& r) override;
  void step(const Eigen::VectorXd& u, const Eigen::VectorXd& y) override;
  Eigen::VectorXd estimate() const override { return estimate_; }
  Eigen::Vector3d predict_pose_ahead(std::span<const Eigen::VectorXd> inputs) override;

  std::uint64_t reset_events() const override { return engine_->reset_events(); }
  std::uint64_t rejected_measurements() const override { return rejected_; }

  Eigen::VectorXd component_weights() const { return comp_weights_; }
  const Eigen::MatrixXd& component_means() const { return comp_means_; }

 private:
  double mixture_log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& weights,
                             const Eigen::MatrixXd& means,
                             const std::vector<Eigen::MatrixXd>& sqrts);
  double measurement_log_likelihood(const Eigen::VectorXd& y, const Eigen::VectorXd& x);
  void respawn_component(int g, int source);
  void refit_mixture(const Eigen::VectorXd& y);

  std::shared_ptr<const StateModel> model_;
  GmsppfOptions opts_;
  RandomStream rng_;
  Eigen::Index n_, m_;

  std::unique_ptr<SquareRootGaussianFilter> engine_;
  Eigen::MatrixXd q_chol_, r_chol_, reset_cov_;

  Eigen::VectorXd comp_weights_;
  Eigen::MatrixXd comp_means_;
  std::vector<Eigen::MatrixXd> comp_sqrts_;
  Eigen::VectorXd pred_weights_;
  Eigen::MatrixXd pred_means_;
  std::vector<Eigen::MatrixXd> pred_sqrts_;

  Eigen::MatrixXd particles_, chain_;
  Eigen::VectorXd particle_weights_;
  Eigen::MatrixXd resp_;
  Eigen::VectorXd z_, scratch_x_, scratch_y_, resid_, obs_, estimate_;
  std::uint64_t rejected_ = 0;
};

}  // namespace omnitrack

#include "core/smc_filters.hpp"

#include <cmath>
#include <limits>

namespace omnitrack {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Max-subtracted exponentiation of log weights. Returns false (and leaves
/// the weights uniform) when every unnormalized weight exp(log_w) underflows
/// to zero in double precision, i.e. the measurement is inconsistent with
/// the entire particle cloud.
bool normalize_log_weights(const Eigen::VectorXd& log_w, Eigen::VectorXd& w) {
  static const double kUnderflowFloor = std::log(std::numeric_limits<double>::min());
  const double max_lw = log_w.maxCoeff();
  if (!std::isfinite(max_lw) || max_lw < kUnderflowFloor) {
    w.setConstant(1.0 / static_cast<double>(w.size()));
    return false;
  }
  w = (log_w.array() - max_lw).exp();
  const double sum = w.sum();
  if (!(sum > 0.0) || !std::isfinite(sum)) {
    w.setConstant(1.0 / static_cast<double>(w.size()));
    return false;
  }
  w /= sum;
  return true;
}

std::unique_ptr<SquareRootGaussianFilter> make_engine(std::shared_ptr<const StateModel> model,
                                                      SppfOptions::Proposal proposal) {
  if (proposal == SppfOptions::Proposal::kSrukf) {
    return std::make_unique<SquareRootUnscentedKalmanFilter>(std::move(model));
  }
  return std::make_unique<SquareRootCentralDifferenceKalmanFilter>(std::move(model));
}

/// log N(r; 0, L L^T) without the 2*pi constant (it cancels everywhere the
/// SMC weights use this).
double log_density_noconst(const Eigen::MatrixXd& chol_lower, Eigen::VectorXd& resid) {
  chol_lower.triangularView<Eigen::Lower>().solveInPlace(resid);
  return -0.5 * resid.squaredNorm() - chol_lower.diagonal().array().log().sum();
}

}  // namespace

void systematic_resample(const Eigen::VectorXd& weights, double offset01,
                         std::vector<int>& indices) {
  const int n = static_cast<int>(weights.size());
  indices.resize(n);
  double cum = weights(0);
  int j = 0;
  for (int i = 0; i < n; ++i) {
    const double u = (static_cast<double>(i) + offset01) / static_cast<double>(n);
    while (u >= cum && j + 1 < n) {
      ++j;
      cum += weights(j);
    }
    indices[i] = j;
  }
}

// ---------------------------------------------------------------------------
// Particle filter

ParticleFilter::ParticleFilter(std::shared_ptr<const StateModel> model, const PfOptions& opts,
                               RandomStream rng)
    : model_(std::move(model)), opts_(opts), rng_(rng), n_(model_->state_dim()),
      m_(model_->meas_dim()) {
  if (opts_.particle_count < 1) {
    throw std::invalid_argument("particle count must be at least 1");
  }
  const int count = opts_.particle_count;
  particles_.resize(n_, count);
  gather_.resize(n_, count);
  chain_.resize(n_, count);
  log_weights_.resize(count);
  weights_.resize(count);
  estimate_.resize(n_);
  noise_.resize(n_);
  scratch_x_.resize(n_);
  scratch_y_.resize(n_);
  resid_.resize(m_);
  obs_.resize(m_);
}

void ParticleFilter::init(const Eigen::VectorXd& x0, const Eigen::MatrixXd& p0,
                          const Eigen::MatrixXd& q, const Eigen::MatrixXd& r) {
  q_chol_ = cholesky(symmetrized(q)).L;
  r_chol_ = cholesky(symmetrized(r)).L;
  const Eigen::MatrixXd p0_chol = cholesky(symmetrized(p0)).L;
  for (int i = 0; i < opts_.particle_count; ++i) {
    rng_.gaussian_fill(noise_);
    particles_.col(i) = x0 + p0_chol.triangularView<Eigen::Lower>() * noise_;
  }
  log_weights_.setZero();
  weights_.setConstant(1.0 / static_cast<double>(opts_.particle_count));
  estimate_ = particles_ * weights_;
  collapses_ = 0;
}

void ParticleFilter::step(const Eigen::VectorXd& u, const Eigen::VectorXd& y) {
  const int count = opts_.particle_count;

  for (int i = 0; i < count; ++i) {
    scratch_x_ = particles_.col(i);
    model_->transition(scratch_x_, u, scratch_y_);
    rng_.gaussian_fill(noise_);
    particles_.col(i) = scratch_y_ + q_chol_.triangularView<Eigen::Lower>() * noise_;

    scratch_x_ = particles_.col(i);
    model_->observe(scratch_x_, obs_);
    resid_ = y - obs_;
    model_->wrap_measurement_residual(resid_);
    r_chol_.triangularView<Eigen::Lower>().solveInPlace(resid_);
    log_weights_(i) += -0.5 * resid_.squaredNorm();
  }

  if (!normalize_log_weights(log_weights_, weights_)) {
    ++collapses_;
    log_weights_.setZero();
  }

  const double ess = 1.0 / weights_.squaredNorm();
  const bool resample =
      !opts_.ess_resampling || ess < opts_.ess_fraction * static_cast<double>(count);
  if (resample) {
    systematic_resample(weights_, rng_.uniform01(), indices_);
    for (int i = 0; i < count; ++i) {
      gather_.col(i) = particles_.col(indices_[i]);
    }
    particles_.swap(gather_);
    weights_.setConstant(1.0 / static_cast<double>(count));
    log_weights_.setZero();
    estimate_ = particles_.rowwise().mean();
  } else {
    estimate_ = particles_ * weights_;
  }
}

Eigen::Vector3d ParticleFilter::predict_pose_ahead(std::span<const Eigen::VectorXd> inputs) {
  chain_ = particles_;
  for (const Eigen::VectorXd& u : inputs) {
    for (int i = 0; i < opts_.particle_count; ++i) {
      scratch_x_ = chain_.col(i);
      model_->transition(scratch_x_, u, scratch_y_);
      chain_.col(i) = scratch_y_;
    }
  }
  return (chain_.topRows(3) * weights_);
}

// ---------------------------------------------------------------------------
// Sigma-point particle filter

SigmaPointParticleFilter::SigmaPointParticleFilter(std::shared_ptr<const StateModel> model,
                                                   const SppfOptions& opts, RandomStream rng)
    : model_(std::move(model)), opts_(opts), rng_(rng), n_(model_->state_dim()),
      m_(model_->meas_dim()) {
  if (opts_.particle_count < 1) {
    throw std::invalid_argument("particle count must be at least 1");
  }
  engine_ = make_engine(model_, opts_.proposal);
  const int count = opts_.particle_count;
  states_.resize(n_, count);
  prev_states_.resize(n_, count);
  means_.resize(n_, count);
  gather_states_.resize(n_, count);
  gather_means_.resize(n_, count);
  chain_.resize(n_, count);
  sqrts_.assign(count, Eigen::MatrixXd(n_, n_));
  gather_sqrts_.assign(count, Eigen::MatrixXd(n_, n_));
  log_weights_.resize(count);
  weights_.resize(count);
  estimate_.resize(n_);
  z_.resize(n_);
  scratch_x_.resize(n_);
  scratch_y_.resize(n_);
  resid_.resize(m_);
  obs_.resize(m_);
  f_prev_.resize(n_);
}

void SigmaPointParticleFilter::init(const Eigen::VectorXd& x0, const Eigen::MatrixXd& p0,
                                    const Eigen::MatrixXd& q, const Eigen::MatrixXd& r) {
  engine_->init(x0, p0, q, r);
  q_chol_ = cholesky(symmetrized(q)).L;
  r_chol_ = cholesky(symmetrized(r)).L;
  reset_cov_ = symmetrized(p0);

  const Eigen::MatrixXd p0_chol = cholesky(reset_cov_).L;
  for (int i = 0; i < opts_.particle_count; ++i) {
    rng_.gaussian_fill(z_);
    states_.col(i) = x0 + p0_chol.triangularView<Eigen::Lower>() * z_;
    means_.col(i) = states_.col(i);
    sqrts_[i] = p0_chol;
  }
  log_weights_.setZero();
  weights_.setConstant(1.0 / static_cast<double>(opts_.particle_count));
  estimate_ = states_ * weights_;
  rejected_ = 0;
  collapses_ = 0;
}

double SigmaPointParticleFilter::measurement_log_likelihood(const Eigen::VectorXd& y,
                                                            const Eigen::VectorXd& x) {
  model_->observe(x, obs_);
  resid_ = y - obs_;
  model_->wrap_measurement_residual(resid_);
  r_chol_.triangularView<Eigen::Lower>().solveInPlace(resid_);
  return -0.5 * resid_.squaredNorm();
}

void SigmaPointParticleFilter::step(const Eigen::VectorXd& u, const Eigen::VectorXd& y) {
  const int count = opts_.particle_count;
  prev_states_ = states_;

  // Per-particle time update of the Kalman beliefs.
  for (int i = 0; i < count; ++i) {
    engine_->load_belief(means_.col(i), sqrts_[i]);
    engine_->time_update(u);
    engine_->store_belief(means_.col(i), sqrts_[i]);
  }

  // Bank-wide gate decision from the aggregate predicted measurement, so
  // every particle's importance weight stays on the same footing.
  bool accept = true;
  if (opts_.gated) {
    Eigen::VectorXd agg_mean = means_ * weights_;
    Eigen::MatrixXd agg_cov = Eigen::MatrixXd::Zero(n_, n_);
    for (int i = 0; i < count; ++i) {
      agg_cov += weights_(i) * (sqrts_[i] * sqrts_[i].transpose() +
                                (means_.col(i) - agg_mean) * (means_.col(i) - agg_mean).transpose());
    }
    Eigen::MatrixXd h_x;
    model_->observation_jacobian(agg_mean, h_x);
    Eigen::VectorXd yhat(m_);
    model_->observe(agg_mean, yhat);
    const Eigen::MatrixXd s =
        symmetrized(h_x * agg_cov * h_x.transpose()) + r_chol_ * r_chol_.transpose();
    Eigen::VectorXd resid = y - yhat;
    model_->wrap_measurement_residual(resid);
    const CholeskyFactor s_chol = cholesky(symmetrized(s));
    accept = gate_accepts(mahalanobis_sq(resid, s_chol), log_det(s_chol), m_, opts_.gate);
    if (!accept) {
      ++rejected_;
    }
  }

  // Measurement update (or skip), proposal sampling and importance weights.
  for (int i = 0; i < count; ++i) {
    engine_->load_belief(means_.col(i), sqrts_[i]);
    engine_->measurement_prepare();
    if (accept) {
      engine_->measurement_apply(y);
    } else {
      engine_->measurement_skip();
    }
    engine_->store_belief(means_.col(i), sqrts_[i]);

    rng_.gaussian_fill(z_);
    scratch_y_ = sqrts_[i].triangularView<Eigen::Lower>() * z_;
    states_.col(i) = means_.col(i) + opts_.sample_scale * scratch_y_;

    // prior transition density
    scratch_x_ = prev_states_.col(i);
    model_->transition(scratch_x_, u, f_prev_);
    scratch_y_ = states_.col(i) - f_prev_;
    const double log_prior = log_density_noconst(q_chol_, scratch_y_);

    // proposal density
    scratch_y_ = states_.col(i) - means_.col(i);
    const double log_prop = log_density_noconst(sqrts_[i], scratch_y_);

    double lw = log_prior - log_prop;
    if (accept) {
      lw += measurement_log_likelihood(y, states_.col(i));
    }
    log_weights_(i) = lw;
  }

  if (!normalize_log_weights(log_weights_, weights_)) {
    ++collapses_;
  }
  estimate_ = states_ * weights_;

  systematic_resample(weights_, rng_.uniform01(), indices_);
  for (int i = 0; i < count; ++i) {
    const int src = indices_[i];
    gather_states_.col(i) = states_.col(src);
    gather_means_.col(i) = means_.col(src);
    gather_sqrts_[i] = sqrts_[src];
  }
  states_.swap(gather_states_);
  means_.swap(gather_means_);
  sqrts_.swap(gather_sqrts_);
  weights_.setConstant(1.0 / static_cast<double>(count));
  log_weights_.setZero();
}

Eigen::Vector3d SigmaPointParticleFilter::predict_pose_ahead(
    std::span<const Eigen::VectorXd> inputs) {
  chain_ = states_;
  for (const Eigen::VectorXd& u : inputs) {
    for (int i = 0; i < opts_.particle_count; ++i) {
      scratch_x_ = chain_.col(i);
      model_->transition(scratch_x_, u, scratch_y_);
      chain_.col(i) = scratch_y_;
    }
  }
  return (chain_.topRows(3) * weights_);
}

// ---------------------------------------------------------------------------
// Gaussian-mixture sigma-point particle filter

GaussianMixtureSppf::GaussianMixtureSppf(std::shared_ptr<const StateModel> model,
                                         const GmsppfOptions& opts, RandomStream rng)
    : model_(std::move(model)), opts_(opts), rng_(rng), n_(model_->state_dim()),
      m_(model_->meas_dim()) {
  if (opts_.components < 1 || opts_.particle_count < 1) {
    throw std::invalid_argument("mixture size and particle count must be positive");
  }
  if (opts_.components > 16) {
    throw std::invalid_argument("mixture size is capped at 16 components");
  }
  engine_ = make_engine(model_, opts_.proposal);
  const int g = opts_.components;
  const int count = opts_.particle_count;
  comp_weights_.resize(g);
  comp_means_.resize(n_, g);
  comp_sqrts_.assign(g, Eigen::MatrixXd(n_, n_));
  pred_weights_.resize(g);
  pred_means_.resize(n_, g);
  pred_sqrts_.assign(g, Eigen::MatrixXd(n_, n_));
  particles_.resize(n_, count);
  chain_.resize(n_, g);
  particle_weights_.resize(count);
  resp_.resize(count, g);
  z_.resize(n_);
  scratch_x_.resize(n_);
  scratch_y_.resize(n_);
  resid_.resize(m_);
  obs_.resize(m_);
  estimate_.resize(n_);
}

void GaussianMixtureSppf::init(const Eigen::VectorXd& x0, const Eigen::MatrixXd& p0,
                               const Eigen::MatrixXd& q, const Eigen::MatrixXd& r) {
  engine_->init(x0, p0, q, r);
  q_chol_ = cholesky(symmetrized(q)).L;
  r_chol_ = cholesky(symmetrized(r)).L;
  reset_cov_ = symmetrized(p0);
  const Eigen::MatrixXd p0_chol = cholesky(reset_cov_).L;

  comp_weights_.setConstant(1.0 / static_cast<double>(opts_.components));
  for (int g = 0; g < opts_.components; ++g) {
    if (g == 0) {
      comp_means_.col(g) = x0;
    } else {
      rng_.gaussian_fill(z_);
      comp_means_.col(g) = x0 + p0_chol.triangularView<Eigen::Lower>() * z_;
    }
    comp_sqrts_[g] = p0_chol;
  }
  estimate_ = comp_means_ * comp_weights_;
  rejected_ = 0;
}

double GaussianMixtureSppf::mixture_log_density(const Eigen::VectorXd& x,
                                                const Eigen::VectorXd& weights,
                                                const Eigen::MatrixXd& means,
                                                const std::vector<Eigen::MatrixXd>& sqrts) {
  double max_term = kNegInf;
  double terms[16];
  const int g = static_cast<int>(weights.size());
  for (int k = 0; k < g; ++k) {
    if (!(weights(k) > 0.0)) {
      terms[k] = kNegInf;
      continue;
    }
    scratch_y_ = x - means.col(k);
    terms[k] = std::log(weights(k)) + log_density_noconst(sqrts[k], scratch_y_);
    max_term = std::max(max_term, terms[k]);
  }
  if (!std::isfinite(max_term)) {
    return kNegInf;
  }
  double sum = 0.0;
  for (int k = 0; k < g; ++k) {
    sum += std::exp(terms[k] - max_term);
  }
  return max_term + std::log(sum);
}

double GaussianMixtureSppf::measurement_log_likelihood(const Eigen::VectorXd& y,
                                                       const Eigen::VectorXd& x) {
  model_->observe(x, obs_);
  resid_ = y - obs_;
  model_->wrap_measurement_residual(resid_);
  r_chol_.triangularView<Eigen::Lower>().solveInPlace(resid_);
  return -0.5 * resid_.squaredNorm();
}

void GaussianMixtureSppf::respawn_component(int g, int source) {
  comp_means_.col(g) =
      comp_means_.col(source) + comp_sqrts_[source].col(g % n_);
  comp_sqrts_[g] = comp_sqrts_[source];
  comp_weights_(g) = comp_weights_(source) * 0.5;
  comp_weights_(source) *= 0.5;
}

void GaussianMixtureSppf::step(const Eigen::VectorXd& u, const Eigen::VectorXd& y) {
  const int g_count = opts_.components;

  // Component time updates.
  for (int g = 0; g < g_count; ++g) {
    engine_->load_belief(comp_means_.col(g), comp_sqrts_[g]);
    engine_->time_update(u);
    engine_->store_belief(pred_means_.col(g), pred_sqrts_[g]);
  }
  pred_weights_ = comp_weights_;

  // Optional gate on the aggregate predicted measurement.
  if (opts_.gated) {
    Eigen::VectorXd agg_mean = pred_means_ * pred_weights_;
    Eigen::MatrixXd agg_cov = Eigen::MatrixXd::Zero(n_, n_);
    for (int g = 0; g < g_count; ++g) {
      agg_cov += pred_weights_(g) *
                 (pred_sqrts_[g] * pred_sqrts_[g].transpose() +
                  (pred_means_.col(g) - agg_mean) * (pred_means_.col(g) - agg_mean).transpose());
    }
    Eigen::MatrixXd h_x;
    model_->observation_jacobian(agg_mean, h_x);
    Eigen::VectorXd yhat(m_);
    model_->observe(agg_mean, yhat);
    const Eigen::MatrixXd s =
        symmetrized(h_x * agg_cov * h_x.transpose()) + r_chol_ * r_chol_.transpose();
    Eigen::VectorXd resid = y - yhat;
    model_->wrap_measurement_residual(resid);
    const CholeskyFactor s_chol = cholesky(symmetrized(s));
    if (!gate_accepts(mahalanobis_sq(resid, s_chol), log_det(s_chol), m_, opts_.gate)) {
      ++rejected_;
      comp_means_ = pred_means_;
      for (int g = 0; g < g_count; ++g) {
        comp_sqrts_[g] = pred_sqrts_[g];
      }
      estimate_ = comp_means_ * comp_weights_;
      return;
    }
  }

  // Component measurement updates and evidence reweighting.
  Eigen::VectorXd log_evidence(g_count);
  for (int g = 0; g < g_count; ++g) {
    engine_->load_belief(pred_means_.col(g), pred_sqrts_[g]);
    engine_->measurement_prepare();
    const double d2 = engine_->innovation_mahalanobis_sq(y);
    log_evidence(g) = -0.5 * (d2 + engine_->innovation_log_det());
    engine_->measurement_apply(y);
    engine_->store_belief(comp_means_.col(g), comp_sqrts_[g]);
  }
  Eigen::VectorXd log_w = comp_weights_.array().log().matrix() + log_evidence;
  if (!normalize_log_weights(log_w, comp_weights_)) {
    // Every component went numerically degenerate: restart the mixture from
    // the aggregate predicted mean with the initial covariance.
    const Eigen::VectorXd center = pred_means_ * pred_weights_;
    const Eigen::MatrixXd p0_chol = cholesky(reset_cov_).L;
    for (int g = 0; g < g_count; ++g) {
      comp_means_.col(g) = center;
      comp_sqrts_[g] = p0_chol;
    }
    comp_weights_.setConstant(1.0 / static_cast<double>(g_count));
  }

  // Drop vanishing components by respawning them next to the heaviest one.
  int heaviest = 0;
  comp_weights_.maxCoeff(&heaviest);
  for (int g = 0; g < g_count; ++g) {
    if (comp_weights_(g) < opts_.weight_floor) {
      respawn_component(g, heaviest);
    }
  }
  comp_weights_ /= comp_weights_.sum();

  refit_mixture(y);
  estimate_ = comp_means_ * comp_weights_;
}

void GaussianMixtureSppf::refit_mixture(const Eigen::VectorXd& y) {
  const int g_count = opts_.components;
  const int count = opts_.particle_count;

  // Draw particles from the updated mixture and importance-correct them
  // against prior-mixture times likelihood.
  Eigen::VectorXd log_w(count);
  for (int i = 0; i < count; ++i) {
    const double pick = rng_.uniform01();
    int g = 0;
    double cum = comp_weights_(0);
    while (pick > cum && g + 1 < g_count) {
      ++g;
      cum += comp_weights_(g);
    }
    rng_.gaussian_fill(z_);
    particles_.col(i) =
        comp_means_.col(g) + comp_sqrts_[g].triangularView<Eigen::Lower>() * z_;

    const double log_target =
        mixture_log_density(particles_.col(i), pred_weights_, pred_means_, pred_sqrts_) +
        measurement_log_likelihood(y, particles_.col(i));
    const double log_proposal =
        mixture_log_density(particles_.col(i), comp_weights_, comp_means_, comp_sqrts_);
    log_w(i) = log_target - log_proposal;
  }
  normalize_log_weights(log_w, particle_weights_);

  // Weighted EM refit, seeded from the updated mixture.
  double prev_ll = kNegInf;
  for (int iter = 0; iter < opts_.em_max_iters; ++iter) {
    double ll = 0.0;
    for (int i = 0; i < count; ++i) {
      double max_term = kNegInf;
      for (int g = 0; g < g_count; ++g) {
        scratch_y_ = particles_.col(i) - comp_means_.col(g);
        const double term = (comp_weights_(g) > 0.0 ? std::log(comp_weights_(g)) : kNegInf) +
                            log_density_noconst(comp_sqrts_[g], scratch_y_);
        resp_(i, g) = term;
        max_term = std::max(max_term, term);
      }
      if (!std::isfinite(max_term)) {
        resp_.row(i).setConstant(1.0 / static_cast<double>(g_count));
        continue;
      }
      double sum = 0.0;
      for (int g = 0; g < g_count; ++g) {
        resp_(i, g) = std::exp(resp_(i, g) - max_term);
        sum += resp_(i, g);
      }
      resp_.row(i) /= sum;
      ll += particle_weights_(i) * (max_term + std::log(sum));
    }

    int heaviest = 0;
    comp_weights_.maxCoeff(&heaviest);
    for (int g = 0; g < g_count; ++g) {
      const Eigen::VectorXd combined = resp_.col(g).cwiseProduct(particle_weights_);
      const double mass = combined.sum();
      if (mass < opts_.weight_floor) {
        respawn_component(g, heaviest);
        continue;
      }
      comp_weights_(g) = mass;
      comp_means_.col(g) = particles_ * combined / mass;
      Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n_, n_);
      for (int i = 0; i < count; ++i) {
        scratch_y_ = particles_.col(i) - comp_means_.col(g);
        cov += combined(i) * scratch_y_ * scratch_y_.transpose();
      }
      cov /= mass;
      cov += opts_.cov_floor * Eigen::MatrixXd::Identity(n_, n_);
      try {
        comp_sqrts_[g] = cholesky(symmetrized(cov)).L;
      } catch (const NotPositiveDefinite&) {
        respawn_component(g, heaviest);
      }
    }
    comp_weights_ /= comp_weights_.sum();

    if (std::abs(ll - prev_ll) <= 1e-7 * (1.0 + std::abs(ll))) {
      break;
    }
    prev_ll = ll;
  }
}

Eigen::Vector3d GaussianMixtureSppf::predict_pose_ahead(
    std::span<const Eigen::VectorXd> inputs) {
  chain_.leftCols(opts_.components) = comp_means_;
  for (const Eigen::VectorXd& u : inputs) {
    for (int g = 0; g < opts_.components; ++g) {
      scratch_x_ = chain_.col(g);
      model_->transition(scratch_x_, u, scratch_y_);
      chain_.col(g) = scratch_y_;
    }
  }
  return chain_.leftCols(opts_.components).topRows(3) * comp_weights_;
}

}  // namespace omnitrack

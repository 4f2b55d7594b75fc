#include "core/gate.hpp"

#include <cmath>

namespace omnitrack {

bool gate_accepts(double mahalanobis_sq, double innovation_log_det, Eigen::Index meas_dim,
                  const GateConfig& cfg) {
  if (cfg.mode == GateConfig::Mode::kMahalanobis) {
    return mahalanobis_sq <= cfg.threshold;
  }
  static const double kLog2Pi = std::log(2.0 * M_PI);
  const double log_norm =
      -0.5 * (static_cast<double>(meas_dim) * kLog2Pi + innovation_log_det);
  const double log_density = log_norm - 0.5 * mahalanobis_sq;
  const double log_cutoff = log_norm - 0.5 * cfg.threshold;
  return log_density >= log_cutoff;
}

GatedFilter::GatedFilter(std::unique_ptr<GaussianFilterBase> inner, const GateConfig& cfg)
    : inner_(std::move(inner)), cfg_(cfg) {
  if (!(cfg_.threshold > 0.0)) {
    throw std::invalid_argument("gate threshold must be positive");
  }
}

void GatedFilter::init(const Eigen::VectorXd& x0, const Eigen::MatrixXd& p0,
                       const Eigen::MatrixXd& q, const Eigen::MatrixXd& r) {
  rejected_ = 0;
  inner_->init(x0, p0, q, r);
}

void GatedFilter::step(const Eigen::VectorXd& u, const Eigen::VectorXd& y) {
  inner_->time_update(u);
  inner_->measurement_prepare();
  const double d2 = inner_->innovation_mahalanobis_sq(y);
  if (gate_accepts(d2, inner_->innovation_log_det(), inner_->model().meas_dim(), cfg_)) {
    inner_->measurement_apply(y);
  } else {
    inner_->measurement_skip();
    ++rejected_;
  }
}

}  // namespace omnitrack

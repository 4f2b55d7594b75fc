#include "core/rng.hpp"

#include <cmath>

namespace omnitrack {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t splitmix(std::uint64_t& state) {
  std::uint64_t z = (state += kGolden);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a ^ (b * 0xD6E8FEB86659FD93ULL + kGolden);
  std::uint64_t r = splitmix(s);
  return splitmix(s) ^ r;
}

RandomStream::RandomStream(std::uint64_t seed) : state_(seed), seed_(seed) {
  // Burn one round so state zero and state kGolden do not collide visibly.
  splitmix(state_);
}

RandomStream RandomStream::substream(std::uint64_t tag) const {
  return RandomStream(mix64(seed_, tag + 1));
}

std::uint64_t RandomStream::next_u64() { return splitmix(state_); }

double RandomStream::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomStream::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform01();
}

bool RandomStream::bernoulli(double p) { return uniform01() < p; }

double RandomStream::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform01();
  while (u1 <= 0.0) {
    u1 = uniform01();
  }
  const double u2 = uniform01();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * M_PI * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

void RandomStream::gaussian_fill(Eigen::Ref<Eigen::VectorXd> out) {
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    out(i) = gaussian();
  }
}

Eigen::VectorXd RandomStream::gaussian_with_factor(const CholeskyFactor& factor) {
  Eigen::VectorXd z(factor.dim());
  gaussian_fill(z);
  return factor.L.triangularView<Eigen::Lower>() * z;
}

Eigen::VectorXd RandomStream::gaussian_with_cov(const Eigen::MatrixXd& cov) {
  return gaussian_with_factor(cholesky(cov));
}

}  // namespace omnitrack

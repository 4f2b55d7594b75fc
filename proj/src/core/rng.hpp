#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "core/linalg.hpp"

namespace omnitrack {

/// Deterministic 64-bit random stream (splitmix64 core) with cheap
/// substream derivation, so every (run, purpose) pair gets an independent
/// generator regardless of scheduling. Reproducibility contract: the same
/// (seed, call sequence) always yields the same values.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed);

  /// Derives an independent child stream. Children are a function of the
  /// parent's construction seed and the tag only, never of draw history.
  RandomStream substream(std::uint64_t tag) const;

  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53-bit resolution.
  double uniform01();
  double uniform(double lo, double hi);
  bool bernoulli(double p);

  /// Standard normal via Box-Muller (pair cached).
  double gaussian();

  /// Fills `out` with i.i.d. standard normals.
  void gaussian_fill(Eigen::Ref<Eigen::VectorXd> out);

  /// Zero-mean sample with the given covariance factor: L * z.
  Eigen::VectorXd gaussian_with_factor(const CholeskyFactor& factor);

  /// Zero-mean sample with SPD covariance (factorizes internally).
  Eigen::VectorXd gaussian_with_cov(const Eigen::MatrixXd& cov);

 private:
  std::uint64_t state_;
  std::uint64_t seed_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Two-round mixing of (a, b) into one 64-bit value; used to key run
/// streams by (trajectory, seed, filter) tuples.
std::uint64_t mix64(std::uint64_t a, std::uint64_t b);

}  // namespace omnitrack

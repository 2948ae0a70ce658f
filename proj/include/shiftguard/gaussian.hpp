#pragma once

#include "shiftguard/linalg.hpp"
#include "shiftguard/rng.hpp"

namespace shiftguard {

// Multivariate Gaussian with a symmetric positive-semidefinite covariance.
// Immutable value type; construction validates symmetry and PSD-ness.
class Gaussian {
 public:
  Gaussian(Vec mean, Mat cov);

  const Vec& mean() const { return mean_; }
  const Mat& cov() const { return cov_; }
  int dim() const { return static_cast<int>(mean_.size()); }

  // Draws mean + L z with z standard normal and L a PSD square root of cov.
  Vec sample(Rng& rng) const;

 private:
  Vec mean_;
  Mat cov_;
  Mat sqrt_;  // eigenvalue square root, tolerant of singular covariances
};

}  // namespace shiftguard

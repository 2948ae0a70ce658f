#pragma once

#include "shiftguard/gaussian.hpp"
#include "shiftguard/linalg.hpp"
#include "shiftguard/rng.hpp"

namespace shiftguard {

// Solid ellipsoid { x : (x - c)^T Q^{-1} (x - c) <= 1 } with Q symmetric positive definite.
class Ellipsoid {
 public:
  Ellipsoid(Vec center, Mat shape);

  const Vec& center() const { return center_; }
  const Mat& shape() const { return shape_; }
  int dim() const { return static_cast<int>(center_.size()); }

  // (x - c)^T Q^{-1} (x - c); the membership quadratic form.
  double quad_form(const Vec& x) const;

  bool contains(const Vec& x, double tol = 0.0) const;

  // Uniform sample from the solid ellipsoid (sphere direction times radius^(1/n),
  // mapped through a square root of the shape matrix).
  Vec sample(Rng& rng) const;

  // Point on the boundary in the direction of `direction` from the center.
  Vec boundary_point(const Vec& direction) const;

  double logdet_shape() const;

 private:
  Vec center_;
  Mat shape_;
  Mat sqrt_;           // symmetric square root of shape
  Eigen::LLT<Mat> llt_;  // Cholesky of shape, for the membership form
};

// Ellipsoid(mean, rho_n * cov) with rho_n the chi-square quantile at p; the
// region carrying probability mass p of the Gaussian.
// Throws IllConditionedError if the covariance is singular.
Ellipsoid confidence_ellipsoid(const Gaussian& g, double p);

// Adds eps*I with eps = 1e-9 * trace(m)/n before inversion-like uses; keeps
// collapsed surrogate covariances workable.
Mat regularize_spd(const Mat& m);

}  // namespace shiftguard

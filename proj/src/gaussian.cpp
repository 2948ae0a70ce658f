#include "shiftguard/gaussian.hpp"

#include "shiftguard/errors.hpp"

namespace shiftguard {

Gaussian::Gaussian(Vec mean, Mat cov) : mean_(std::move(mean)), cov_(std::move(cov)) {
  if (cov_.rows() != cov_.cols() || cov_.rows() != mean_.size())
    throw DimensionError("Gaussian: covariance shape does not match mean");
  if (sym_rel_asymmetry(cov_) > 1e-12)
    throw DomainError("Gaussian: covariance is not symmetric");
  cov_ = symmetrize(cov_);

  Eigen::SelfAdjointEigenSolver<Mat> es(cov_);
  double max_eig = cov_.size() == 0 ? 0.0 : es.eigenvalues().maxCoeff();
  double min_eig = cov_.size() == 0 ? 0.0 : es.eigenvalues().minCoeff();
  if (min_eig < -1e-12 * std::max(max_eig, 1e-300))
    throw IllConditionedError("Gaussian: covariance has a negative eigenvalue", min_eig);

  Vec clamped = es.eigenvalues().cwiseMax(0.0);
  sqrt_ = es.eigenvectors() * clamped.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

Vec Gaussian::sample(Rng& rng) const {
  Vec z(dim());
  for (int i = 0; i < dim(); ++i) z[i] = rng.normal();
  return mean_ + sqrt_ * z;
}

}  // namespace shiftguard

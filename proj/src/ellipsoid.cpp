#include "shiftguard/ellipsoid.hpp"

#include <cmath>

#include "shiftguard/chi_square.hpp"
#include "shiftguard/errors.hpp"

namespace shiftguard {

Ellipsoid::Ellipsoid(Vec center, Mat shape) : center_(std::move(center)), shape_(std::move(shape)) {
  if (shape_.rows() != shape_.cols() || shape_.rows() != center_.size())
    throw DimensionError("Ellipsoid: shape matrix does not match center");
  if (sym_rel_asymmetry(shape_) > 1e-12)
    throw DomainError("Ellipsoid: shape matrix is not symmetric");
  shape_ = symmetrize(shape_);

  Eigen::SelfAdjointEigenSolver<Mat> es(shape_);
  double min_eig = es.eigenvalues().minCoeff();
  if (min_eig <= 0.0)
    throw IllConditionedError("Ellipsoid: shape matrix is not positive definite", min_eig);
  sqrt_ = es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() *
          es.eigenvectors().transpose();
  llt_.compute(shape_);
}

double Ellipsoid::quad_form(const Vec& x) const {
  if (x.size() != center_.size())
    throw DimensionError("Ellipsoid::quad_form: dimension mismatch");
  Vec d = x - center_;
  return d.dot(llt_.solve(d));
}

bool Ellipsoid::contains(const Vec& x, double tol) const { return quad_form(x) <= 1.0 + tol; }

Vec Ellipsoid::sample(Rng& rng) const {
  int n = dim();
  Vec u(n);
  double norm2 = 0.0;
  do {
    for (int i = 0; i < n; ++i) u[i] = rng.normal();
    norm2 = u.squaredNorm();
  } while (norm2 == 0.0);
  u /= std::sqrt(norm2);
  double r = std::pow(rng.uniform(), 1.0 / n);
  return center_ + sqrt_ * (r * u);
}

Vec Ellipsoid::boundary_point(const Vec& direction) const {
  Vec u = direction;
  double norm = u.norm();
  if (norm == 0.0) throw DomainError("Ellipsoid::boundary_point: zero direction");
  return center_ + sqrt_ * (u / norm);
}

double Ellipsoid::logdet_shape() const {
  Mat l = llt_.matrixL();
  return 2.0 * l.diagonal().array().log().sum();
}

Ellipsoid confidence_ellipsoid(const Gaussian& g, double p) {
  Eigen::SelfAdjointEigenSolver<Mat> es(g.cov());
  double min_eig = es.eigenvalues().minCoeff();
  if (min_eig <= 0.0)
    throw IllConditionedError("confidence_ellipsoid: covariance is singular", min_eig);
  double rho = chi_square_quantile(p, g.dim());
  return Ellipsoid(g.mean(), rho * g.cov());
}

Mat regularize_spd(const Mat& m) {
  int n = static_cast<int>(m.rows());
  double eps = 1e-9 * m.trace() / std::max(1, n);
  if (eps <= 0.0) eps = 1e-12;
  return symmetrize(m) + eps * Mat::Identity(n, n);
}

}  // namespace shiftguard

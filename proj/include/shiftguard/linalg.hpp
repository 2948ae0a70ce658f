#pragma once

#include <Eigen/Core>
#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace shiftguard {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// 0.5*(A + A^T)
inline Mat symmetrize(const Mat& a) { return 0.5 * (a + a.transpose()); }

inline double sym_rel_asymmetry(const Mat& a) {
  double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.transpose()).cwiseAbs().maxCoeff() / scale;
}

}  // namespace shiftguard

#include "shiftguard/deep_sdp.hpp"

#include <cmath>

#include "shiftguard/errors.hpp"

namespace shiftguard {

int BaseVectorLayout::x_offset_of_layer(int layer) const {
  int at = x_offset();
  for (int i = 0; i < layer; ++i) at += hidden_counts[i];
  return at;
}

BaseVectorLayout build_layout(const ReluNetwork& net, int n, int m) {
  if (net.input_dim() != n + m)
    throw DimensionError("build_layout: network input dim must equal n + m");
  BaseVectorLayout layout;
  layout.n = n;
  layout.m = m;
  const auto& dims = net.layer_dims();
  for (std::size_t i = 1; i + 1 < dims.size(); ++i) layout.hidden_counts.push_back(dims[i]);
  layout.total = n + m + net.hidden_neuron_count() + 1;
  return layout;
}

namespace {
Mat selector(const BaseVectorLayout& layout, int offset, int count) {
  Mat e = Mat::Zero(count + 1, layout.total);
  for (int i = 0; i < count; ++i) e(i, offset + i) = 1.0;
  e(count, layout.one_index()) = 1.0;
  return e;
}
}  // namespace

Mat selector_E1(const BaseVectorLayout& layout) { return selector(layout, layout.s_offset(), layout.n); }
Mat selector_E2(const BaseVectorLayout& layout) { return selector(layout, layout.a_offset(), layout.m); }
Mat selector_E3(const BaseVectorLayout& layout) {
  return selector(layout, layout.x_offset(), layout.x_total());
}

Mat preactivation_map(const ReluNetwork& net, const BaseVectorLayout& layout) {
  int total_hidden = net.hidden_neuron_count();
  Mat a = Mat::Zero(total_hidden, layout.total);
  int row = 0;
  for (int l = 0; l < net.num_hidden_layers(); ++l) {
    const Mat& w = net.weight(l);
    int rows = static_cast<int>(w.rows());
    if (l == 0) {
      a.block(row, 0, rows, layout.n + layout.m) = w;  // acts on [s; a]
    } else {
      a.block(row, layout.x_offset_of_layer(l - 1), rows, layout.hidden_counts[l - 1]) = w;
    }
    a.block(row, layout.one_index(), rows, 1) = net.bias(l);
    row += rows;
  }
  return a;
}

Mat postactivation_map(const BaseVectorLayout& layout) {
  Mat a = Mat::Zero(layout.x_total(), layout.total);
  for (int i = 0; i < layout.x_total(); ++i) a(i, layout.x_offset() + i) = 1.0;
  return a;
}

Mat build_M_state(const Vec& mu_s, const Mat& sigma_s, double rho_n,
                  const BaseVectorLayout& layout) {
  if (mu_s.size() != layout.n) throw DimensionError("build_M_state: state dim mismatch");
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(sigma_s));
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw IllConditionedError("build_M_state: singular state covariance",
                              es.eigenvalues().minCoeff());
  Mat inv = Eigen::LLT<Mat>(regularize_spd(sigma_s)).solve(Mat::Identity(layout.n, layout.n));
  Mat q(layout.n + 1, layout.n + 1);
  q.topLeftCorner(layout.n, layout.n) = -inv;
  q.topRightCorner(layout.n, 1) = inv * mu_s;
  q.bottomLeftCorner(1, layout.n) = (inv * mu_s).transpose();
  q(layout.n, layout.n) = -mu_s.dot(inv * mu_s) + rho_n;
  Mat e1 = selector_E1(layout);
  return (1.0 / rho_n) * e1.transpose() * q * e1;
}

Mat build_M_action(const Vec& mu_a, const Mat& omega_a, const BaseVectorLayout& layout) {
  if (mu_a.size() != layout.m) throw DimensionError("build_M_action: action dim mismatch");
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(omega_a));
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw IllConditionedError("build_M_action: singular action shape matrix",
                              es.eigenvalues().minCoeff());
  Mat inv = Eigen::LLT<Mat>(regularize_spd(omega_a)).solve(Mat::Identity(layout.m, layout.m));
  Mat q(layout.m + 1, layout.m + 1);
  q.topLeftCorner(layout.m, layout.m) = -inv;
  q.topRightCorner(layout.m, 1) = inv * mu_a;
  q.bottomLeftCorner(1, layout.m) = (inv * mu_a).transpose();
  q(layout.m, layout.m) = -mu_a.dot(inv * mu_a) + 1.0;
  Mat e2 = selector_E2(layout);
  return e2.transpose() * q * e2;
}

Mat build_M_phi(const ReluNetwork& net, const QCMultipliers& mult,
                const BaseVectorLayout& layout) {
  int hidden = net.hidden_neuron_count();
  if (mult.lambda.size() != hidden || mult.nu.size() != hidden || mult.eta.size() != hidden)
    throw DimensionError("build_M_phi: multiplier length mismatch");

  // Q_phi over [v; z; 1]: sum_j lambda_j (z_j v_j - z_j^2) + nu_j (z_j - v_j) + eta_j z_j
  Mat q = Mat::Zero(2 * hidden + 1, 2 * hidden + 1);
  for (int j = 0; j < hidden; ++j) {
    q(j, hidden + j) += 0.5 * mult.lambda[j];
    q(hidden + j, j) += 0.5 * mult.lambda[j];
    q(hidden + j, hidden + j) -= mult.lambda[j];
    q(j, 2 * hidden) += -0.5 * mult.nu[j];
    q(2 * hidden, j) += -0.5 * mult.nu[j];
    q(hidden + j, 2 * hidden) += 0.5 * (mult.nu[j] + mult.eta[j]);
    q(2 * hidden, hidden + j) += 0.5 * (mult.nu[j] + mult.eta[j]);
  }

  Mat t(2 * hidden + 1, layout.total);
  t.topRows(hidden) = preactivation_map(net, layout);
  t.middleRows(hidden, hidden) = postactivation_map(layout);
  t.bottomRows(1) = Mat::Zero(1, layout.total);
  t(2 * hidden, layout.one_index()) = 1.0;
  return t.transpose() * q * t;
}

Mat output_map(const ReluNetwork& net, const Vec& target, const BaseVectorLayout& layout) {
  if (target.size() != net.output_dim()) throw DimensionError("output_map: target dim mismatch");
  int n_out = net.output_dim();
  Mat f = Mat::Zero(n_out + 1, layout.total);
  const Mat& w_last = net.weight(net.num_layers() - 1);
  if (net.num_hidden_layers() == 0) {
    f.block(0, 0, n_out, layout.n + layout.m) = w_last;  // affine net: output reads [s; a]
  } else {
    int last = net.num_hidden_layers() - 1;
    f.block(0, layout.x_offset_of_layer(last), n_out, layout.hidden_counts[last]) = w_last;
  }
  f.block(0, layout.one_index(), n_out, 1) = net.bias(net.num_layers() - 1) - target;
  f(n_out, layout.one_index()) = 1.0;
  return f;
}

Mat build_M_out(const ReluNetwork& net, const Vec& target, const Mat& omega,
                const BaseVectorLayout& layout) {
  int n_out = net.output_dim();
  if (omega.rows() != n_out || omega.cols() != n_out)
    throw DimensionError("build_M_out: omega dim mismatch");
  Mat f = output_map(net, target, layout);
  Mat mid = Mat::Zero(n_out + 1, n_out + 1);
  mid.topLeftCorner(n_out, n_out) = -omega;
  mid(n_out, n_out) = 1.0;
  return f.transpose() * mid * f;
}

NeuronIntervals preactivation_intervals(const ReluNetwork& net, const Ellipsoid& state_region,
                                        const Ellipsoid& action_region) {
  int hidden = net.hidden_neuron_count();
  NeuronIntervals out{Vec::Zero(hidden), Vec::Zero(hidden)};

  // enclosing box of each input ellipsoid: center_i +- sqrt(shape_ii)
  int n = state_region.dim(), m = action_region.dim();
  Vec lo(n + m), hi(n + m);
  for (int i = 0; i < n; ++i) {
    double r = std::sqrt(state_region.shape()(i, i));
    lo[i] = state_region.center()[i] - r;
    hi[i] = state_region.center()[i] + r;
  }
  for (int i = 0; i < m; ++i) {
    double r = std::sqrt(action_region.shape()(i, i));
    lo[n + i] = action_region.center()[i] - r;
    hi[n + i] = action_region.center()[i] + r;
  }

  int row = 0;
  for (int l = 0; l < net.num_hidden_layers(); ++l) {
    const Mat& w = net.weight(l);
    Vec new_lo(w.rows()), new_hi(w.rows());
    for (int i = 0; i < w.rows(); ++i) {
      double a = net.bias(l)[i], b = net.bias(l)[i];
      for (int j = 0; j < w.cols(); ++j) {
        double c = w(i, j);
        a += c * (c >= 0.0 ? lo[j] : hi[j]);
        b += c * (c >= 0.0 ? hi[j] : lo[j]);
      }
      new_lo[i] = a;
      new_hi[i] = b;
      out.lower[row + i] = a;
      out.upper[row + i] = b;
    }
    // the next layer sees post-activations
    lo = new_lo.cwiseMax(0.0);
    hi = new_hi.cwiseMax(0.0);
    row += static_cast<int>(w.rows());
  }
  return out;
}

BoundResult bound_residual_fixed_action(const ReluNetwork& net, const Ellipsoid& state_region,
                                        const Ellipsoid& action_region, const Vec& target,
                                        const BoundOptions& options) {
  if (net.hidden_activation() != Activation::relu && net.num_hidden_layers() > 0)
    throw DomainError("bound_residual_fixed_action: network must have ReLU hidden layers");
  int n = state_region.dim();
  int m = action_region.dim();
  int n_out = net.output_dim();
  BaseVectorLayout layout = build_layout(net, n, m);
  int hidden = net.hidden_neuron_count();

  // The state region already carries its confidence scaling (shape = rho Sigma),
  // so M_s is built with rho = 1 on the region's own shape matrix.
  Mat m_s = build_M_state(state_region.center(), state_region.shape(), 1.0, layout);
  Mat m_a = build_M_action(action_region.center(), action_region.shape(), layout);

  conic::ConicProgram prog;
  conic::MatVarId omega = prog.add_matrix("Omega", n_out);
  conic::VarId tau1 = prog.add_scalar("tau1", 0.0);
  conic::VarId tau2 = prog.add_scalar("tau2", 0.0);

  std::optional<NeuronIntervals> intervals;
  if (options.interval_tightening)
    intervals = preactivation_intervals(net, state_region, action_region);

  std::vector<conic::VarId> lambda(hidden), nu(hidden), eta(hidden);
  for (int j = 0; j < hidden; ++j) {
    lambda[j] = prog.add_scalar("lambda" + std::to_string(j));
    // provably active neuron: z - v == 0, so nu may take either sign;
    // provably inactive: z == 0, so eta may take either sign
    bool active = intervals && intervals->lower[j] >= 0.0;
    bool inactive = intervals && intervals->upper[j] <= 0.0;
    nu[j] = active ? prog.add_scalar("nu" + std::to_string(j))
                   : prog.add_scalar("nu" + std::to_string(j), 0.0);
    eta[j] = inactive ? prog.add_scalar("eta" + std::to_string(j))
                      : prog.add_scalar("eta" + std::to_string(j), 0.0);
  }

  // LMI: -(tau1 M_s + tau2 M_a + M_phi(lambda,nu,eta) - M_out(Omega)) >= 0
  conic::MatrixExpr lmi(layout.total);
  lmi.add_term(tau1, -m_s);
  lmi.add_term(tau2, -m_a);

  QCMultipliers basis{Vec::Zero(hidden), Vec::Zero(hidden), Vec::Zero(hidden)};
  for (int j = 0; j < hidden; ++j) {
    basis.lambda[j] = 1.0;
    lmi.add_term(lambda[j], -build_M_phi(net, basis, layout));
    basis.lambda[j] = 0.0;
    basis.nu[j] = 1.0;
    lmi.add_term(nu[j], -build_M_phi(net, basis, layout));
    basis.nu[j] = 0.0;
    basis.eta[j] = 1.0;
    lmi.add_term(eta[j], -build_M_phi(net, basis, layout));
    basis.eta[j] = 0.0;
  }

  // +M_out = -F_top^T Omega F_top + e e^T with F_top the residual rows of F
  Mat f = output_map(net, target, layout);
  Mat f_top = f.topRows(n_out);
  lmi.add_congruence(omega, f_top, -1.0);
  Mat corner = Mat::Zero(layout.total, layout.total);
  corner(layout.one_index(), layout.one_index()) = 1.0;
  lmi.add_constant(corner);
  prog.add_psd(std::move(lmi), "residual bound LMI");

  // Omega <= cap * I keeps degenerate (zero-residual) instances bounded.
  conic::MatrixExpr cap(n_out);
  cap.add_constant(options.omega_cap * Mat::Identity(n_out, n_out));
  cap.add_congruence(omega, Mat::Identity(n_out, n_out), -1.0);
  prog.add_psd(std::move(cap), "omega cap");

  prog.add_logdet_objective(omega);

  conic::SolverResult result = conic::solve(prog, options.solver);
  if (result.status == conic::SolveStatus::infeasible ||
      result.status == conic::SolveStatus::unbounded)
    throw CertificationError("residual bound program " + conic::to_string(result.status));
  if (result.status != conic::SolveStatus::optimal)
    throw SolverError("residual bound solver failed: " + result.diagnostics);

  Mat omega_val = symmetrize(result.matrix(omega));
  Mat omega_r = Eigen::LLT<Mat>(omega_val).solve(Mat::Identity(n_out, n_out));

  BoundResult out{Ellipsoid(Vec::Zero(n_out), symmetrize(omega_r)), 0.0,
                  QCMultipliers{Vec::Zero(hidden), Vec::Zero(hidden), Vec::Zero(hidden)},
                  result.scalar(tau1), result.scalar(tau2), result.solve_seconds};
  out.logdet_shape = out.bound.logdet_shape();
  for (int j = 0; j < hidden; ++j) {
    out.multipliers.lambda[j] = result.scalar(lambda[j]);
    out.multipliers.nu[j] = result.scalar(nu[j]);
    out.multipliers.eta[j] = result.scalar(eta[j]);
  }
  return out;
}

}  // namespace shiftguard

#include "shiftguard/conic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>

#include "shiftguard/errors.hpp"

namespace shiftguard::conic {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

// ---------- program construction ----------

void MatrixExpr::add_constant(const Mat& c) {
  if (c.rows() != dim_ || c.cols() != dim_)
    throw DimensionError("MatrixExpr::add_constant: size mismatch");
  constant_ += symmetrize(c);
}

void MatrixExpr::add_term(VarId v, const Mat& coeff) {
  if (!v.valid()) throw Error("MatrixExpr::add_term: invalid variable");
  if (coeff.rows() != dim_ || coeff.cols() != dim_)
    throw DimensionError("MatrixExpr::add_term: size mismatch");
  auto it = terms_.find(v.index);
  if (it == terms_.end())
    terms_.emplace(v.index, symmetrize(coeff));
  else
    it->second += symmetrize(coeff);
}

void MatrixExpr::add_congruence(MatVarId x, const Mat& p, double sign) {
  if (!x.valid()) throw Error("MatrixExpr::add_congruence: invalid matrix variable");
  if (p.rows() != x.dim || p.cols() != dim_)
    throw DimensionError("MatrixExpr::add_congruence: projector shape mismatch");
  for (int i = 0; i < x.dim; ++i) {
    for (int j = i; j < x.dim; ++j) {
      Mat coeff;
      if (i == j)
        coeff = sign * (p.row(i).transpose() * p.row(i));
      else
        coeff = sign * (p.row(i).transpose() * p.row(j) + p.row(j).transpose() * p.row(i));
      add_term(VarId{x.first + mat_entry_offset(x.dim, i, j)}, coeff);
    }
  }
}

Mat MatrixExpr::evaluate(const Vec& values) const {
  Mat out = constant_;
  for (const auto& [k, c] : terms_) out += values[k] * c;
  return out;
}

double LinearConstraint::lhs_value(const Vec& values) const {
  double v = 0.0;
  for (const LinearTerm& t : terms) v += t.coeff * values[t.var];
  return v;
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

Mat SolverResult::matrix(MatVarId m) const {
  Mat out(m.dim, m.dim);
  for (int i = 0; i < m.dim; ++i)
    for (int j = i; j < m.dim; ++j) {
      double v = values[m.first + mat_entry_offset(m.dim, i, j)];
      out(i, j) = v;
      out(j, i) = v;
    }
  return out;
}

VarId ConicProgram::add_scalar(const std::string& name, double lb, double ub) {
  if (lb > ub) throw DomainError("add_scalar: lb > ub for " + name);
  names_.push_back(name);
  lb_.push_back(lb);
  ub_.push_back(ub);
  return VarId{static_cast<int>(names_.size()) - 1};
}

MatVarId ConicProgram::add_matrix(const std::string& name, int dim) {
  if (dim <= 0) throw DomainError("add_matrix: dim must be positive");
  MatVarId id{static_cast<int>(names_.size()), dim};
  for (int i = 0; i < dim; ++i)
    for (int j = i; j < dim; ++j)
      add_scalar(name + "(" + std::to_string(i) + "," + std::to_string(j) + ")");
  return id;
}

VarId ConicProgram::entry(MatVarId m, int i, int j) const {
  return VarId{m.first + mat_entry_offset(m.dim, i, j)};
}

void ConicProgram::add_psd(MatrixExpr expr, const std::string& name) {
  for (const auto& [k, c] : expr.terms())
    if (k < 0 || k >= num_vars()) throw Error("add_psd: expression references unknown variable");
  psd_.emplace_back(std::move(expr), name);
}

void ConicProgram::add_linear(LinearConstraint c) {
  for (const LinearTerm& t : c.terms)
    if (t.var < 0 || t.var >= num_vars())
      throw Error("add_linear: constraint references unknown variable");
  linear_.push_back(std::move(c));
}

void ConicProgram::add_logdet_objective(MatVarId m, double weight) {
  if (weight <= 0.0) throw DomainError("add_logdet_objective: weight must be positive");
  logdet_.emplace_back(m, weight);
}

void ConicProgram::add_linear_objective(VarId v, double coeff) { obj_linear_[v.index] += coeff; }

double ConicProgram::objective_value(const Vec& values) const {
  double obj = 0.0;
  for (const auto& [k, c] : obj_linear_) obj += c * values[k];
  for (const auto& [m, w] : logdet_) {
    Mat x(m.dim, m.dim);
    for (int i = 0; i < m.dim; ++i)
      for (int j = i; j < m.dim; ++j)
        x(i, j) = x(j, i) = values[m.first + mat_entry_offset(m.dim, i, j)];
    Eigen::LLT<Mat> llt(x);
    if (llt.info() != Eigen::Success) return -kInf;
    Mat l = llt.matrixL();
    obj += w * 2.0 * l.diagonal().array().log().sum();
  }
  return obj;
}

// ---------- interior-point solver ----------

namespace {

// One affine symmetric block: C0 + sum_k w_k C_k, required positive definite.
// Both PSD constraints (weight 1 barrier) and logdet objective terms
// (weight t*kappa) reduce to this form.
struct Block {
  int dim = 0;
  Mat constant;
  std::vector<std::pair<int, Mat>> terms;
  bool is_objective = false;  // objective blocks carry t * weight
  double weight = 1.0;
  bool shifted = false;  // receives the phase-1 slack

  Mat evaluate(const Vec& w, double shift) const {
    Mat s = constant;
    for (const auto& [k, c] : terms) s += w[k] * c;
    if (shifted && shift != 0.0) s += shift * Mat::Identity(dim, dim);
    return s;
  }
};

struct Workspace {
  int n = 0;  // number of variables (without the phase-1 shift)
  std::vector<Block> blocks;
  std::vector<LinearConstraint> inequalities;  // a^T w <= rhs
  std::vector<bool> ineq_shifted;
  std::vector<LinearConstraint> equalities;
  std::vector<double> lb, ub;
  std::vector<bool> lb_shifted, ub_shifted;
  Vec obj_linear;       // minimize obj_linear^T w - sum objective-block logdets
  double barrier_nu = 0.0;  // total barrier parameter of the constraints
};

struct Cursor {
  Vec w;
  double shift = 0.0;  // phase-1 slack; 0 in phase 2
};

constexpr double kDomainMargin = 1e-300;

// value of t*f0 + Phi at a point, +inf when outside the domain
double merit(const Workspace& ws, const Cursor& c, double t, bool phase1) {
  double val = 0.0;
  if (phase1) {
    val = t * c.shift;
  } else {
    val = t * ws.obj_linear.dot(c.w);
  }
  for (const Block& b : ws.blocks) {
    Mat s = b.evaluate(c.w, c.shift);
    Eigen::LLT<Mat> llt(s);
    if (llt.info() != Eigen::Success) return kInf;
    Mat l = llt.matrixL();
    double logdet = 2.0 * l.diagonal().array().log().sum();
    if (!std::isfinite(logdet)) return kInf;
    if (b.is_objective && !phase1)
      val -= t * b.weight * logdet;
    else
      val -= logdet;
  }
  for (std::size_t j = 0; j < ws.inequalities.size(); ++j) {
    double slack = ws.inequalities[j].rhs - ws.inequalities[j].lhs_value(c.w) +
                   (ws.ineq_shifted[j] ? c.shift : 0.0);
    if (slack <= kDomainMargin) return kInf;
    val -= std::log(slack);
  }
  for (int k = 0; k < ws.n; ++k) {
    if (std::isfinite(ws.lb[k])) {
      double slack = c.w[k] - ws.lb[k] + (ws.lb_shifted[k] ? c.shift : 0.0);
      if (slack <= kDomainMargin) return kInf;
      val -= std::log(slack);
    }
    if (std::isfinite(ws.ub[k])) {
      double slack = ws.ub[k] - c.w[k] + (ws.ub_shifted[k] ? c.shift : 0.0);
      if (slack <= kDomainMargin) return kInf;
      val -= std::log(slack);
    }
  }
  return val;
}

// Gradient and Hessian of t*f0 + Phi in the (w, [shift]) variables.
// Returns false if the point left the domain (should not happen inside the line search).
bool derivatives(const Workspace& ws, const Cursor& c, double t, bool phase1, Vec& grad,
                 Mat& hess) {
  int dim = ws.n + (phase1 ? 1 : 0);
  grad = Vec::Zero(dim);
  hess = Mat::Zero(dim, dim);
  if (phase1) {
    grad[ws.n] = t;
  } else {
    grad.head(ws.n) = t * ws.obj_linear;
  }

  for (const Block& b : ws.blocks) {
    Mat s = b.evaluate(c.w, c.shift);
    Eigen::LLT<Mat> llt(s);
    if (llt.info() != Eigen::Success) return false;
    double scale = (b.is_objective && !phase1) ? t * b.weight : 1.0;

    // R_k = L^{-1} C_k L^{-T} (symmetric); gradient -scale*tr(R_k),
    // Hessian +scale*<R_k, R_l>.
    std::vector<std::pair<int, Mat>> rs;
    rs.reserve(b.terms.size() + 1);
    auto l = llt.matrixL();
    for (const auto& [k, cm] : b.terms) {
      Mat x1 = l.solve(cm);
      Mat r = l.solve(x1.transpose());
      rs.emplace_back(k, std::move(r));
    }
    if (phase1 && b.shifted) {
      Mat x1 = l.solve(Mat::Identity(b.dim, b.dim));
      Mat r = l.solve(x1.transpose());
      rs.emplace_back(ws.n, std::move(r));
    }
    for (std::size_t i = 0; i < rs.size(); ++i) {
      grad[rs[i].first] -= scale * rs[i].second.trace();
      for (std::size_t j = i; j < rs.size(); ++j) {
        double h = scale * rs[i].second.cwiseProduct(rs[j].second).sum();
        hess(rs[i].first, rs[j].first) += h;
        if (rs[i].first != rs[j].first) hess(rs[j].first, rs[i].first) += h;
      }
    }
  }

  auto rank_one = [&](const std::vector<LinearTerm>& terms, double slack, double dslack_dshift) {
    double inv = 1.0 / slack;
    double inv2 = inv * inv;
    // d(-log slack)/dw_k = -coeff_k' * inv where coeff_k' = d slack/d w_k
    std::vector<std::pair<int, double>> grads_local;
    for (const LinearTerm& lt : terms) grads_local.emplace_back(lt.var, lt.coeff);
    if (phase1 && dslack_dshift != 0.0) grads_local.emplace_back(ws.n, -dslack_dshift);
    // slack = rhs - a^T w (+shift): d slack/dw_k = -coeff_k, d slack/dshift = +1
    for (const auto& [k, a] : grads_local) {
      grad[k] += a * inv;  // -(-a)*inv
      for (const auto& [k2, a2] : grads_local) hess(k, k2) += a * a2 * inv2;
    }
  };

  for (std::size_t j = 0; j < ws.inequalities.size(); ++j) {
    double slack = ws.inequalities[j].rhs - ws.inequalities[j].lhs_value(c.w) +
                   (ws.ineq_shifted[j] ? c.shift : 0.0);
    if (slack <= 0.0) return false;
    rank_one(ws.inequalities[j].terms, slack, ws.ineq_shifted[j] ? 1.0 : 0.0);
  }
  for (int k = 0; k < ws.n; ++k) {
    if (std::isfinite(ws.lb[k])) {
      double slack = c.w[k] - ws.lb[k] + (ws.lb_shifted[k] ? c.shift : 0.0);
      if (slack <= 0.0) return false;
      std::vector<LinearTerm> t1{{k, -1.0}};  // slack = w - lb: d/dw = +1 => coeff in a^T w form is -1
      rank_one(t1, slack, ws.lb_shifted[k] ? 1.0 : 0.0);
    }
    if (std::isfinite(ws.ub[k])) {
      double slack = ws.ub[k] - c.w[k] + (ws.ub_shifted[k] ? c.shift : 0.0);
      if (slack <= 0.0) return false;
      std::vector<LinearTerm> t1{{k, 1.0}};
      rank_one(t1, slack, ws.ub_shifted[k] ? 1.0 : 0.0);
    }
  }
  return true;
}

struct NewtonOutcome {
  bool converged = false;
  bool domain_error = false;
  int iterations = 0;
};

// Damped Newton on t*f0 + Phi at fixed t. Supports linear equality
// constraints via a KKT system (iterates stay on the manifold).
NewtonOutcome newton_minimize(const Workspace& ws, Cursor& c, double t, bool phase1,
                              const SolverSettings& settings, int remaining_iters,
                              const std::function<bool(const Cursor&)>& early_exit) {
  NewtonOutcome out;
  int dim = ws.n + (phase1 ? 1 : 0);
  int neq = static_cast<int>(ws.equalities.size());

  for (int iter = 0; iter < remaining_iters; ++iter) {
    Vec grad;
    Mat hess;
    if (!derivatives(ws, c, t, phase1, grad, hess)) {
      out.domain_error = true;
      return out;
    }

    Vec step;
    double reg = 0.0;
    for (int attempt = 0; attempt < 8; ++attempt) {
      Mat h = hess;
      if (reg > 0.0) h += reg * Mat::Identity(dim, dim);
      if (neq == 0) {
        Eigen::LDLT<Mat> ldlt(h);
        step = -ldlt.solve(grad);
        if (ldlt.info() == Eigen::Success && grad.dot(step) < 0.0) break;
      } else {
        Mat kkt = Mat::Zero(dim + neq, dim + neq);
        kkt.topLeftCorner(dim, dim) = h;
        for (int e = 0; e < neq; ++e) {
          for (const LinearTerm& lt : ws.equalities[e].terms) {
            kkt(dim + e, lt.var) = lt.coeff;
            kkt(lt.var, dim + e) = lt.coeff;
          }
        }
        Vec rhs = Vec::Zero(dim + neq);
        rhs.head(dim) = -grad;
        Eigen::FullPivLU<Mat> lu(kkt);
        Vec sol = lu.solve(rhs);
        step = sol.head(dim);
        if (lu.isInvertible() && grad.dot(step) < 0.0) break;
      }
      reg = reg == 0.0 ? 1e-10 * (1.0 + hess.diagonal().cwiseAbs().maxCoeff()) : reg * 100.0;
      step.setZero();
    }
    if (step.size() == 0 || step.isZero(0.0)) {
      out.converged = grad.norm() < 1e-6;
      return out;
    }

    double decrement2 = -grad.dot(step);
    if (decrement2 * 0.5 <= 1e-11) {
      out.converged = true;
      return out;
    }

    double f0 = merit(ws, c, t, phase1);
    double alpha = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < settings.max_backtracks; ++bt) {
      Cursor trial = c;
      trial.w += alpha * step.head(ws.n);
      if (phase1) trial.shift += alpha * step[ws.n];
      double f1 = merit(ws, trial, t, phase1);
      if (f1 < f0 - 0.01 * alpha * decrement2) {
        c = trial;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    ++out.iterations;
    if (!accepted) {
      // stalled: treat a tiny decrement as converged, otherwise give up
      out.converged = decrement2 * 0.5 <= 1e-6;
      return out;
    }
    if (early_exit && early_exit(c)) {
      out.converged = true;
      return out;
    }
  }
  return out;
}

// scale factors so every variable's largest coefficient has magnitude ~1
std::vector<double> variable_scales(const ConicProgram& p) {
  std::vector<double> scale(p.num_vars(), 0.0);
  for (const auto& [expr, name] : p.psd_constraints())
    for (const auto& [k, c] : expr.terms())
      scale[k] = std::max(scale[k], c.cwiseAbs().maxCoeff());
  for (const auto& lc : p.linear_constraints())
    for (const LinearTerm& t : lc.terms) scale[t.var] = std::max(scale[t.var], std::fabs(t.coeff));
  for (const auto& [m, w] : p.logdet_terms()) {
    for (int i = 0; i < m.dim; ++i)
      for (int j = i; j < m.dim; ++j) {
        int k = m.first + mat_entry_offset(m.dim, i, j);
        scale[k] = std::max(scale[k], 1.0);
      }
  }
  for (double& s : scale) {
    if (s <= 0.0 || !std::isfinite(s)) s = 1.0;
    s = std::clamp(s, 1e-8, 1e8);
  }
  return scale;
}

}  // namespace

SolverResult solve(const ConicProgram& program, const SolverSettings& settings) {
  auto t_start = std::chrono::steady_clock::now();
  SolverResult result;
  int n = program.num_vars();

  // Scaled variables: w_solver = sigma_k * w_user, coefficients divided by sigma.
  std::vector<double> sigma = variable_scales(program);

  Workspace ws;
  ws.n = n;
  ws.lb.resize(n);
  ws.ub.resize(n);
  double box = settings.variable_box;
  for (int k = 0; k < n; ++k) {
    ws.lb[k] = std::max(program.lower_bounds()[k], -box) * sigma[k];
    ws.ub[k] = std::min(program.upper_bounds()[k], box) * sigma[k];
  }
  for (const auto& [expr, name] : program.psd_constraints()) {
    Block b;
    b.dim = expr.dim();
    // normalize the block so its largest entry is ~1 (pure conditioning aid;
    // logdet barriers are invariant to positive block scaling)
    double bscale = expr.constant().cwiseAbs().maxCoeff();
    for (const auto& [k, c] : expr.terms())
      bscale = std::max(bscale, c.cwiseAbs().maxCoeff() / sigma[k]);
    if (bscale <= 0.0 || !std::isfinite(bscale)) bscale = 1.0;
    b.constant = expr.constant() / bscale;
    for (const auto& [k, c] : expr.terms()) b.terms.emplace_back(k, c / (sigma[k] * bscale));
    ws.blocks.push_back(std::move(b));
    ws.barrier_nu += expr.dim();
  }
  for (const auto& [m, weight] : program.logdet_terms()) {
    Block b;
    b.dim = m.dim;
    b.constant = Mat::Zero(m.dim, m.dim);
    b.is_objective = true;
    b.weight = weight;
    for (int i = 0; i < m.dim; ++i)
      for (int j = i; j < m.dim; ++j) {
        int k = m.first + mat_entry_offset(m.dim, i, j);
        Mat basis = Mat::Zero(m.dim, m.dim);
        basis(i, j) = basis(j, i) = 1.0;
        b.terms.emplace_back(k, basis / sigma[k]);
      }
    ws.blocks.push_back(std::move(b));
  }
  for (const LinearConstraint& lc : program.linear_constraints()) {
    LinearConstraint scaled = lc;
    for (LinearTerm& t : scaled.terms) t.coeff /= sigma[t.var];
    if (lc.equality) {
      ws.equalities.push_back(std::move(scaled));
    } else {
      ws.inequalities.push_back(std::move(scaled));
      ws.barrier_nu += 1.0;
    }
  }
  for (int k = 0; k < n; ++k) {
    if (std::isfinite(ws.lb[k])) ws.barrier_nu += 1.0;
    if (std::isfinite(ws.ub[k])) ws.barrier_nu += 1.0;
  }
  ws.obj_linear = Vec::Zero(n);
  for (const auto& [k, c] : program.linear_objective()) ws.obj_linear[k] = -c / sigma[k];

  auto unscale = [&](const Vec& w) {
    Vec out(n);
    for (int k = 0; k < n; ++k) out[k] = w[k] / sigma[k];
    return out;
  };
  auto finish = [&](SolveStatus status, const std::string& diag) {
    result.status = status;
    result.diagnostics = diag;
    result.solve_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return result;
  };

  // --- initial point: midpoints of user bounds, identity for logdet matrices ---
  Cursor cur;
  cur.w = Vec::Zero(n);
  for (int k = 0; k < n; ++k) {
    double user_lb = program.lower_bounds()[k] * sigma[k];
    double user_ub = program.upper_bounds()[k] * sigma[k];
    if (std::isfinite(user_lb) && std::isfinite(user_ub))
      cur.w[k] = 0.5 * (user_lb + user_ub);
    else if (std::isfinite(user_lb))
      cur.w[k] = user_lb + 1.0;
    else if (std::isfinite(user_ub))
      cur.w[k] = user_ub - 1.0;
  }
  for (const auto& [m, weight] : program.logdet_terms())
    for (int i = 0; i < m.dim; ++i) {
      int k = m.first + mat_entry_offset(m.dim, i, i);
      cur.w[k] = std::max(cur.w[k], 1.0 * sigma[k]);
    }
  // satisfy equalities exactly via least squares correction
  if (!ws.equalities.empty()) {
    int neq = static_cast<int>(ws.equalities.size());
    Mat a = Mat::Zero(neq, n);
    Vec rhs(neq);
    for (int e = 0; e < neq; ++e) {
      for (const LinearTerm& t : ws.equalities[e].terms) a(e, t.var) += t.coeff;
      rhs[e] = ws.equalities[e].rhs;
    }
    Vec residual = rhs - a * cur.w;
    cur.w += a.transpose() * (a * a.transpose()).ldlt().solve(residual);
  }

  // --- phase 1: minimize a shift applied to the constraints violated at w0 ---
  const double kMargin = 1e-6;
  double worst = -kInf;
  ws.ineq_shifted.assign(ws.inequalities.size(), false);
  ws.lb_shifted.assign(n, false);
  ws.ub_shifted.assign(n, false);
  for (Block& b : ws.blocks) {
    Mat s = b.evaluate(cur.w, 0.0);
    Eigen::SelfAdjointEigenSolver<Mat> es(s);
    double shortfall = -es.eigenvalues().minCoeff();
    b.shifted = shortfall > -kMargin;
    if (b.shifted) worst = std::max(worst, shortfall);
  }
  for (std::size_t j = 0; j < ws.inequalities.size(); ++j) {
    double shortfall = ws.inequalities[j].lhs_value(cur.w) - ws.inequalities[j].rhs;
    ws.ineq_shifted[j] = shortfall > -kMargin;
    if (ws.ineq_shifted[j]) worst = std::max(worst, shortfall);
  }
  for (int k = 0; k < n; ++k) {
    if (std::isfinite(ws.lb[k])) {
      double shortfall = ws.lb[k] - cur.w[k];
      ws.lb_shifted[k] = shortfall > -kMargin;
      if (ws.lb_shifted[k]) worst = std::max(worst, shortfall);
    }
    if (std::isfinite(ws.ub[k])) {
      double shortfall = cur.w[k] - ws.ub[k];
      ws.ub_shifted[k] = shortfall > -kMargin;
      if (ws.ub_shifted[k]) worst = std::max(worst, shortfall);
    }
  }
  bool nothing_shifted = !std::isfinite(worst);
  cur.shift = nothing_shifted ? -1.0 : worst + 1.0;

  auto strictly_feasible = [&](const Cursor& c) { return c.shift < -1e-8; };

  if (!nothing_shifted) {
    double t = settings.t_initial;
    int used = 0;
    bool feasible = false;
    double nu1 = ws.barrier_nu + static_cast<double>(ws.blocks.size());
    for (int outer = 0; outer < 64; ++outer) {
      NewtonOutcome o =
          newton_minimize(ws, cur, t, true, settings, settings.iteration_cap - used,
                          strictly_feasible);
      used += o.iterations;
      if (strictly_feasible(cur)) {
        feasible = true;
        break;
      }
      if (o.domain_error)
        return finish(SolveStatus::numerical_failure, "phase 1 left the barrier domain");
      if (used >= settings.iteration_cap)
        return finish(SolveStatus::numerical_failure, "phase 1 iteration cap exceeded");
      if (nu1 / t < 1e-9 * std::max(1.0, std::fabs(cur.shift))) break;
      t *= settings.t_growth;
    }
    if (!feasible) {
      if (cur.shift > -1e-8)
        return finish(SolveStatus::infeasible,
                      "phase 1 optimum shift " + std::to_string(cur.shift));
      return finish(SolveStatus::numerical_failure, "phase 1 did not converge");
    }
  }
  cur.shift = 0.0;

  // --- phase 2: path following on the true objective ---
  double t = settings.t_initial;
  int used = 0;
  for (int outer = 0; outer < 96; ++outer) {
    NewtonOutcome o = newton_minimize(ws, cur, t, false, settings,
                                      settings.iteration_cap - used, nullptr);
    used += o.iterations;
    if (o.domain_error)
      return finish(SolveStatus::numerical_failure, "phase 2 left the barrier domain");
    double obj_now = program.objective_value(unscale(cur.w));
    if (!std::isfinite(obj_now) || std::fabs(obj_now) > 1e8)
      return finish(SolveStatus::unbounded, "objective diverged");
    if (used >= settings.iteration_cap)
      return finish(SolveStatus::numerical_failure, "phase 2 iteration cap exceeded");
    double gap = ws.barrier_nu / t;
    if (gap <= settings.gap_tol * std::max(1.0, std::fabs(obj_now))) break;
    t *= settings.t_growth;
  }

  result.values = unscale(cur.w);
  // an objective variable pressed against the internal box is an unbounded ray
  double ray_threshold = 0.1 * box;
  for (const auto& [m, weight] : program.logdet_terms())
    for (int i = 0; i < m.dim; ++i)
      for (int j = i; j <= i; ++j)
        if (std::fabs(result.values[m.first + mat_entry_offset(m.dim, i, i)]) > ray_threshold &&
            !std::isfinite(program.upper_bounds()[m.first + mat_entry_offset(m.dim, i, i)]))
          return finish(SolveStatus::unbounded, "logdet variable on the internal box");
  for (const auto& [k, c] : program.linear_objective()) {
    if (c == 0.0) continue;
    bool capped = (c > 0.0) ? std::isfinite(program.upper_bounds()[k])
                            : std::isfinite(program.lower_bounds()[k]);
    if (!capped && std::fabs(result.values[k]) > ray_threshold)
      return finish(SolveStatus::unbounded, "objective variable on the internal box");
  }
  result.objective = program.objective_value(result.values);
  return finish(SolveStatus::optimal, "t=" + std::to_string(t));
}

VerifyReport verify(const ConicProgram& program, const SolverResult& result, double tol) {
  VerifyReport report;
  auto push = [&](const std::string& name, double violation, double threshold) {
    bool ok = violation <= threshold;
    report.entries.push_back({name, violation, threshold, ok});
    report.worst_violation = std::max(report.worst_violation, violation);
    if (!ok) report.ok = false;
  };

  const Vec& w = result.values;
  for (const auto& [expr, name] : program.psd_constraints()) {
    Mat m = expr.evaluate(w);
    Eigen::SelfAdjointEigenSolver<Mat> es(m);
    double norm = std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1.0);
    push("psd:" + name, -es.eigenvalues().minCoeff(), tol * norm);
  }
  for (const LinearConstraint& lc : program.linear_constraints()) {
    double lhs = lc.lhs_value(w);
    double scale = std::max(1.0, std::fabs(lc.rhs));
    if (lc.equality)
      push("eq:" + lc.name, std::fabs(lhs - lc.rhs), tol * scale);
    else
      push("ineq:" + lc.name, lhs - lc.rhs, tol * scale);
  }
  for (int k = 0; k < program.num_vars(); ++k) {
    double lo = program.lower_bounds()[k];
    double hi = program.upper_bounds()[k];
    if (std::isfinite(lo))
      push("lb:" + program.var_name(k), lo - w[k], tol * std::max(1.0, std::fabs(lo)));
    if (std::isfinite(hi))
      push("ub:" + program.var_name(k), w[k] - hi, tol * std::max(1.0, std::fabs(hi)));
  }
  for (const auto& [m, weight] : program.logdet_terms()) {
    Mat x = result.matrix(m);
    Eigen::SelfAdjointEigenSolver<Mat> es(x);
    push("logdet domain", -es.eigenvalues().minCoeff(), 0.0);
  }
  return report;
}

}  // namespace shiftguard::conic

#include "shiftguard/policy_adapt.hpp"

#include <chrono>
#include <cmath>

#include "shiftguard/chi_square.hpp"
#include "shiftguard/errors.hpp"

namespace shiftguard {

Ellipsoid AdaptSolution::residual_bound() const {
  Mat shape = Eigen::LLT<Mat>(symmetrize(omega)).solve(Mat::Identity(omega.rows(), omega.cols()));
  return Ellipsoid(bound_center, symmetrize(shape));
}

Ellipsoid AdaptSolution::action_region() const {
  Mat u_inv = Eigen::LLT<Mat>(symmetrize(u)).solve(Mat::Identity(u.rows(), u.cols()));
  return Ellipsoid(u_inv * v, symmetrize(tau2 * u_inv));
}

AdaptSolution solve_adaptation(const AdaptProblem& problem, const AdaptOptions& options) {
  const ReluNetwork& net = problem.mean_net;
  if (net.hidden_activation() != Activation::relu && net.num_hidden_layers() > 0)
    throw DomainError("solve_adaptation: mean net must have ReLU hidden layers");
  int n = problem.state_region.dim();
  int n_out = net.output_dim();
  int m = static_cast<int>(problem.action_lower.size());
  if (problem.action_upper.size() != m)
    throw DimensionError("solve_adaptation: actuator bound dims differ");
  for (int k = 0; k < m; ++k)
    if (!(problem.action_lower[k] < problem.action_upper[k]))
      throw DomainError("solve_adaptation: need lower < upper actuator bounds");
  if (problem.delta <= 0.0) throw DomainError("solve_adaptation: delta must be positive");
  if (problem.target.size() != n_out)
    throw DimensionError("solve_adaptation: target dim mismatch");

  BaseVectorLayout layout = build_layout(net, n, m);
  int hidden = net.hidden_neuron_count();

  // Split the target into its locally reachable part and the orthogonal rest.
  // The volume objective cannot distinguish where the action centers the
  // bound along the reachable directions once an unreachable offset is
  // present, and the linearized action constraint then pins the recovered
  // action at zero; certifying against the reachable part restores the
  // residual-centering optimum. The bound is reported with its true center.
  Vec a_hint = problem.action_hint ? *problem.action_hint
                                   : 0.5 * (problem.action_lower + problem.action_upper);
  Vec hint_input(n + m);
  hint_input << problem.state_region.center(), a_hint;
  Vec base = net.forward(hint_input);
  Mat jac_a = net.input_jacobian(hint_input).rightCols(m);
  Vec d = problem.target - base;
  Vec d_reach = Vec::Zero(n_out);
  Eigen::JacobiSVD<Mat> svd(jac_a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  for (int k = 0; k < svd.singularValues().size(); ++k) {
    if (svd.singularValues()[k] > 1e-9 * svd.singularValues().maxCoeff())
      d_reach += svd.matrixU().col(k) * svd.matrixU().col(k).dot(d);
  }
  Vec offset = d - d_reach;      // unreachable component
  Vec target_eff = problem.target - offset;

  Mat m_s = build_M_state(problem.state_region.center(), problem.state_region.shape(), 1.0,
                          layout);

  conic::ConicProgram prog;
  conic::MatVarId omega = prog.add_matrix("Omega", n_out);
  conic::MatVarId u_var = prog.add_matrix("U", m);
  std::vector<conic::VarId> v_var(m);
  for (int k = 0; k < m; ++k) v_var[k] = prog.add_scalar("V" + std::to_string(k));
  conic::VarId tau1 = prog.add_scalar("tau1", 0.0);
  conic::VarId tau2 = prog.add_scalar("tau2", 0.0);

  std::optional<NeuronIntervals> intervals;
  if (options.interval_tightening) {
    // action box as a crude over-approximating ellipsoid for the interval pass
    Vec mid = 0.5 * (problem.action_lower + problem.action_upper);
    Vec half = 0.5 * (problem.action_upper - problem.action_lower);
    Mat shape = (static_cast<double>(m) * half.cwiseProduct(half)).asDiagonal();
    intervals =
        preactivation_intervals(net, problem.state_region, Ellipsoid(mid, shape));
  }

  std::vector<conic::VarId> lambda(hidden), nu(hidden), eta(hidden);
  for (int j = 0; j < hidden; ++j) {
    lambda[j] = prog.add_scalar("lambda" + std::to_string(j));
    bool active = intervals && intervals->lower[j] >= 0.0;
    bool inactive = intervals && intervals->upper[j] <= 0.0;
    nu[j] = active ? prog.add_scalar("nu" + std::to_string(j))
                   : prog.add_scalar("nu" + std::to_string(j), 0.0);
    eta[j] = inactive ? prog.add_scalar("eta" + std::to_string(j))
                      : prog.add_scalar("eta" + std::to_string(j), 0.0);
  }

  // LMI: -tau1 M_s - E2^T [[-U, V],[V^T, tau2]] E2 - M_phi + M_out >= 0
  conic::MatrixExpr lmi(layout.total);
  lmi.add_term(tau1, -m_s);

  // -E2^T [[-U, V],[V^T, tau2]] E2 decomposed over U, V, tau2
  Mat s_a = Mat::Zero(m, layout.total);  // selects the action block
  for (int k = 0; k < m; ++k) s_a(k, layout.a_offset() + k) = 1.0;
  lmi.add_congruence(u_var, s_a, 1.0);
  Vec e_one = Vec::Zero(layout.total);
  e_one[layout.one_index()] = 1.0;
  for (int k = 0; k < m; ++k) {
    Mat coeff = -(s_a.row(k).transpose() * e_one.transpose() +
                  e_one * s_a.row(k));
    lmi.add_term(v_var[k], coeff);
  }
  Mat corner_tau = -(e_one * e_one.transpose());
  lmi.add_term(tau2, corner_tau);

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

  Mat f = output_map(net, target_eff, layout);
  Mat f_top = f.topRows(n_out);
  lmi.add_congruence(omega, f_top, -1.0);
  Mat corner = Mat::Zero(layout.total, layout.total);
  corner(layout.one_index(), layout.one_index()) = 1.0;
  lmi.add_constant(corner);
  prog.add_psd(std::move(lmi), "adaptation LMI");

  // U >= eps_u I for invertibility of the action recovery
  conic::MatrixExpr u_floor(m);
  u_floor.add_congruence(u_var, Mat::Identity(m, m), 1.0);
  u_floor.add_constant(-problem.eps_u * Mat::Identity(m, m));
  prog.add_psd(std::move(u_floor), "U floor");

  // Omega cap keeps degenerate programs bounded (see deep_sdp)
  conic::MatrixExpr cap(n_out);
  cap.add_constant(options.omega_cap * Mat::Identity(n_out, n_out));
  cap.add_congruence(omega, Mat::Identity(n_out, n_out), -1.0);
  prog.add_psd(std::move(cap), "omega cap");

  // epigraph Z >= Omega^{-1} for the trace tie-break: [[Z, I],[I, Omega]] >= 0
  conic::MatVarId z_var = prog.add_matrix("Z", n_out);
  if (options.trace_tie_break > 0.0) {
    conic::MatrixExpr schur(2 * n_out);
    Mat off = Mat::Zero(2 * n_out, 2 * n_out);
    off.topRightCorner(n_out, n_out) = Mat::Identity(n_out, n_out);
    off.bottomLeftCorner(n_out, n_out) = Mat::Identity(n_out, n_out);
    schur.add_constant(off);
    Mat top = Mat::Zero(n_out, 2 * n_out);
    top.leftCols(n_out) = Mat::Identity(n_out, n_out);
    Mat bottom = Mat::Zero(n_out, 2 * n_out);
    bottom.rightCols(n_out) = Mat::Identity(n_out, n_out);
    schur.add_congruence(z_var, top, 1.0);
    schur.add_congruence(omega, bottom, 1.0);
    prog.add_psd(std::move(schur), "trace epigraph");
    for (int k = 0; k < n_out; ++k)
      prog.add_linear_objective(prog.entry(z_var, k, k), -options.trace_tie_break);
  }

  // actuator box: U l <= V <= U u, elementwise
  for (int i = 0; i < m; ++i) {
    conic::LinearConstraint lower;
    conic::LinearConstraint upper;
    for (int k = 0; k < m; ++k) {
      lower.terms.push_back({prog.entry(u_var, i, k).index, problem.action_lower[k]});
      upper.terms.push_back({prog.entry(u_var, i, k).index, -problem.action_upper[k]});
    }
    lower.terms.push_back({v_var[i].index, -1.0});
    lower.rhs = 0.0;
    lower.name = "Ul <= V row " + std::to_string(i);
    upper.terms.push_back({v_var[i].index, 1.0});
    upper.rhs = 0.0;
    upper.name = "V <= Uu row " + std::to_string(i);
    prog.add_linear(std::move(lower));
    prog.add_linear(std::move(upper));
  }

  // trace floor: tr(U) delta <= tau2
  conic::LinearConstraint trace_floor;
  for (int k = 0; k < m; ++k)
    trace_floor.terms.push_back({prog.entry(u_var, k, k).index, problem.delta});
  trace_floor.terms.push_back({tau2.index, -1.0});
  trace_floor.rhs = 0.0;
  trace_floor.name = "trace floor";
  prog.add_linear(std::move(trace_floor));

  prog.add_logdet_objective(omega);

  conic::SolverResult result = conic::solve(prog, options.solver);
  if (result.status == conic::SolveStatus::infeasible ||
      result.status == conic::SolveStatus::unbounded)
    throw CertificationError("adaptation program " + conic::to_string(result.status));
  if (result.status != conic::SolveStatus::optimal)
    throw SolverError("adaptation solver failed: " + result.diagnostics);

  AdaptSolution sol;
  sol.u = symmetrize(result.matrix(u_var));
  sol.v = Vec(m);
  for (int k = 0; k < m; ++k) sol.v[k] = result.scalar(v_var[k]);
  sol.tau1 = result.scalar(tau1);
  sol.tau2 = result.scalar(tau2);
  sol.omega = symmetrize(result.matrix(omega));
  sol.bound_center = offset;
  sol.multipliers = QCMultipliers{Vec::Zero(hidden), Vec::Zero(hidden), Vec::Zero(hidden)};
  for (int j = 0; j < hidden; ++j) {
    sol.multipliers.lambda[j] = result.scalar(lambda[j]);
    sol.multipliers.nu[j] = result.scalar(nu[j]);
    sol.multipliers.eta[j] = result.scalar(eta[j]);
  }
  sol.solve_seconds = result.solve_seconds;
  sol.logdet_bound = -std::log(sol.omega.determinant());

  Vec raw = Eigen::LLT<Mat>(sol.u).solve(sol.v);
  sol.adapted_action = raw;
  for (int k = 0; k < m; ++k)
    sol.adapted_action[k] =
        std::clamp(raw[k], problem.action_lower[k], problem.action_upper[k]);
  sol.clipped = (sol.adapted_action - raw).norm() > 0.0;
  return sol;
}

StepDecision select_action(const Vec& state, const Vec& pi_star_action, const Vec& adapted_action,
                           const SurrogateFn& surrogate, const Vec& target) {
  StepDecision d;
  d.pi_star_action = pi_star_action;
  d.adapted_action = adapted_action;
  d.pi_star_residual = (target - surrogate(state, pi_star_action)).norm();
  d.adapted_residual = (target - surrogate(state, adapted_action)).norm();
  // ties go to the trained policy
  d.chose_adapted = d.adapted_residual < d.pi_star_residual - 1e-12;
  d.chosen = d.chose_adapted ? adapted_action : pi_star_action;
  return d;
}

std::string to_string(EpisodeMode m) {
  switch (m) {
    case EpisodeMode::unadapted: return "unadapted";
    case EpisodeMode::adapted: return "adapted";
    case EpisodeMode::pso: return "pso";
  }
  return "unknown";
}

double mean_tracking_error(const EpisodeLog& log) {
  if (log.empty()) return 0.0;
  double total = 0.0;
  for (const StepRecord& r : log) total += r.residual_norm;
  return total / static_cast<double>(log.size());
}

double max_tracking_error(const EpisodeLog& log) {
  double worst = 0.0;
  for (const StepRecord& r : log) worst = std::max(worst, r.residual_norm);
  return worst;
}

EpisodeLog run_episode(Environment& env, const SurrogatePair& surrogates, const Policy& pi_star,
                       const std::vector<Vec>& tau_opt, int horizon,
                       const EpisodeOptions& options, Rng& rng) {
  if (static_cast<int>(tau_opt.size()) != horizon + 1)
    throw DimensionError("run_episode: tau_opt must have length horizon + 1");
  EpisodeLog log;
  if (horizon == 0) return log;
  log.reserve(horizon);

  SurrogateFn comparison = [&surrogates](const Vec& s, const Vec& a) {
    return surrogates.predict_comparison(s, a);
  };
  SurrogateFn mean_prediction = [&surrogates](const Vec& s, const Vec& a) {
    return surrogates.predict_mean(s, a);
  };

  Vec lo = env.action_lower(), hi = env.action_upper();
  Vec prev_state;
  Vec prev_action;

  for (int t = 0; t < horizon; ++t) {
    StepRecord rec;
    rec.t = t;
    rec.reference = tau_opt[t];
    rec.state = env.observe();
    rec.solver_status = "none";
    const Vec& target = tau_opt[t + 1];
    Vec pi_action = pi_star(rec.state, t);

    Vec action = pi_action;
    rec.pi_star_surrogate_residual = (target - comparison(rec.state, pi_action)).norm();
    rec.chosen_surrogate_residual = rec.pi_star_surrogate_residual;

    bool adapt_step = options.mode != EpisodeMode::unadapted && t >= 1;
    if (adapt_step && options.mode == EpisodeMode::adapted) {
      auto started = std::chrono::steady_clock::now();
      try {
        // state confidence region: centered at the observation; covariance
        // from the covariance surrogate at the previous step's input
        Vec variances;
        if (t == 1) {
          variances = Vec::Constant(env.state_dim(), 1e-6);
        } else {
          variances = surrogates.predict_variances(prev_state, prev_action);
        }
        Mat cov = variances.asDiagonal();
        double rho = chi_square_quantile(options.confidence,
                                         static_cast<int>(surrogates.embed(rec.state).size()));

        Ellipsoid state_region = [&] {
          if (surrogates.embedder) {
            // moment matching through the embedder by first-order propagation
            Mat jac = surrogates.embedder->input_jacobian(rec.state);
            Mat embedded_cov = regularize_spd(jac * cov * jac.transpose());
            return Ellipsoid(surrogates.embed(rec.state), rho * embedded_cov);
          }
          return Ellipsoid(rec.state, rho * regularize_spd(cov));
        }();

        // linearization hint for the reachability split: the best surrogate
        // candidate among the trained action, the previous action, and a
        // coarse scan of the box
        Vec hint = pi_action;
        double hint_res = (target - mean_prediction(rec.state, hint)).norm();
        auto consider = [&](const Vec& cand) {
          double res = (target - mean_prediction(rec.state, cand)).norm();
          if (res < hint_res) {
            hint_res = res;
            hint = cand;
          }
        };
        if (prev_action.size() == lo.size()) consider(prev_action);
        if (lo.size() == 1) {
          for (int g = 0; g <= 8; ++g)
            consider(Vec::Constant(1, lo[0] + (hi[0] - lo[0]) * g / 8.0));
        } else {
          consider(0.5 * (lo + hi));
        }

        AdaptProblem problem{surrogates.mean_net, state_region, target,
                             lo,                  hi,           options.delta,
                             options.eps_u,       hint};
        AdaptOptions adapt_options = options.adapt;
        AdaptSolution sol = solve_adaptation(problem, adapt_options);
        rec.logdet_bound = sol.logdet_bound;
        rec.solver_status = "optimal";
        StepDecision decision =
            select_action(rec.state, pi_action, sol.adapted_action, comparison, target);
        action = decision.chosen;
        rec.pi_star_surrogate_residual = decision.pi_star_residual;
        rec.chosen_surrogate_residual =
            decision.chose_adapted ? decision.adapted_residual : decision.pi_star_residual;
      } catch (const CertificationError&) {
        rec.solver_status = "infeasible";
        action = pi_action;
      } catch (const SolverError&) {
        rec.solver_status = "numerical_failure";
        action = pi_action;
      }
      rec.solve_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
              .count();
    } else if (adapt_step && options.mode == EpisodeMode::pso) {
      auto started = std::chrono::steady_clock::now();
      PsoConfig cfg = options.pso;
      cfg.lower = lo;
      cfg.upper = hi;
      cfg.seed = rng.raw();
      Vec candidate = pso_adapt_step(rec.state, target, mean_prediction, cfg);
      rec.solve_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
              .count();
      rec.solver_status = "pso";
      action = candidate;
      rec.chosen_surrogate_residual = (target - comparison(rec.state, candidate)).norm();
    }

    rec.action = action;
    Vec next = env.step(action, &rng);
    rec.residual_norm = (target - next).norm();
    rec.aux = env.diagnostics();
    log.push_back(rec);

    prev_state = rec.state;
    prev_action = action;
  }
  return log;
}

}  // namespace shiftguard

#pragma once

#include <optional>
#include <string>

#include "shiftguard/deep_sdp.hpp"
#include "shiftguard/ellipsoid.hpp"
#include "shiftguard/environments.hpp"
#include "shiftguard/pso.hpp"
#include "shiftguard/train.hpp"

namespace shiftguard {

// One per-step action-adaptation instance: find the action whose certified
// residual reach-set bound has minimum volume.
struct AdaptProblem {
  ReluNetwork mean_net;     // ReLU surrogate used inside the program
  Ellipsoid state_region;   // confidence region in the net's state-input space
  Vec target;               // reference state to hit
  Vec action_lower;
  Vec action_upper;
  double delta = 1e-6;      // trace floor regulation factor
  double eps_u = 1e-8;      // U >= eps_u I, guarantees action recovery
  // Linearization point for the reachability split of the target (the trained
  // policy's action in the closed loop; the box midpoint when absent).
  std::optional<Vec> action_hint;
};

struct AdaptOptions {
  double omega_cap = 1e8;
  bool interval_tightening = false;
  // Weight of the tr(Omega^{-1}) tie-break term. The pure volume objective is
  // invariant to shearing the bound along the action's image direction when
  // the target has an unreachable component, which leaves the recovered
  // action undetermined; the trace term resolves it toward the
  // residual-centering (least-squares) action.
  double trace_tie_break = 1e-2;
  conic::SolverSettings solver;

  AdaptOptions() {
    // action recovery error tracks the duality gap; 1e-10 keeps it ~1e-4
    solver.gap_tol = 1e-10;
    solver.iteration_cap = 400;
  }
};

struct AdaptSolution {
  Mat u;                    // tau2 * Omega_a^{-1}
  Vec v;                    // tau2 * Omega_a^{-1} mu_a
  double tau1 = 0.0;
  double tau2 = 0.0;
  QCMultipliers multipliers;
  Mat omega;                // inverse shape of the residual bound
  Vec bound_center;         // locally-unreachable target component (zero when
                            // the target is reachable); the bound's center
  Vec adapted_action;       // U^{-1} V, clipped into the actuator box
  bool clipped = false;     // whether clipping changed the recovered action
  double logdet_bound = 0.0;  // logdet of the residual-bound shape matrix
  double solve_seconds = 0.0;

  // Certified region for tau_opt(t+1) - net(s, a) over the two input regions.
  Ellipsoid residual_bound() const;
  Ellipsoid action_region() const;  // E(U^{-1} V, tau2 U^{-1})
};

// Theorem-1 convex program. Throws CertificationError (infeasible/unbounded)
// or SolverError (numerical failure); callers fall back to the trained policy.
AdaptSolution solve_adaptation(const AdaptProblem& problem, const AdaptOptions& options = {});

// Precautionary comparison between the trained policy's action and the
// adapted candidate, through the comparison surrogate.
struct StepDecision {
  Vec pi_star_action;
  Vec adapted_action;
  double pi_star_residual = 0.0;
  double adapted_residual = 0.0;
  Vec chosen;
  bool chose_adapted = false;
};

using SurrogateFn = std::function<Vec(const Vec& state, const Vec& action)>;

StepDecision select_action(const Vec& state, const Vec& pi_star_action, const Vec& adapted_action,
                           const SurrogateFn& surrogate, const Vec& target);

enum class EpisodeMode { unadapted, adapted, pso };
std::string to_string(EpisodeMode m);

struct EpisodeOptions {
  EpisodeMode mode = EpisodeMode::adapted;
  double confidence = 0.95;
  double delta = 1e-6;
  double eps_u = 1e-8;
  AdaptOptions adapt;
  PsoConfig pso;  // per-step budget for the PSO baseline
};

struct StepRecord {
  int t = 0;
  Vec reference;          // tau_opt(t)
  Vec state;              // observed s_t
  Vec action;             // applied action
  double residual_norm = 0.0;  // || tau_opt(t+1) - s_{t+1} ||
  double logdet_bound = std::numeric_limits<double>::quiet_NaN();
  std::string solver_status;  // "none" when no program was solved
  double solve_ms = 0.0;
  // surrogate residuals of the comparison step (equal when no comparison ran)
  double pi_star_surrogate_residual = 0.0;
  double chosen_surrogate_residual = 0.0;
  std::map<std::string, double> aux;  // environment diagnostics (e.g. d_rel)
};

using EpisodeLog = std::vector<StepRecord>;

// Algorithm-1 closed loop on a deployment environment. The first step applies
// the trained policy; later steps build the state confidence region around the
// observation, solve the adaptation (or run the PSO baseline), and apply the
// precautionary comparison. Any solver failure falls back to the trained
// policy for that step.
EpisodeLog run_episode(Environment& env, const SurrogatePair& surrogates, const Policy& pi_star,
                       const std::vector<Vec>& tau_opt, int horizon,
                       const EpisodeOptions& options, Rng& rng);

double mean_tracking_error(const EpisodeLog& log);
double max_tracking_error(const EpisodeLog& log);

}  // namespace shiftguard

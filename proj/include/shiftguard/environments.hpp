#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>

#include "shiftguard/linalg.hpp"
#include "shiftguard/rng.hpp"
#include "shiftguard/train.hpp"

namespace shiftguard {

// Deterministic feedback policy: state and step index to action.
using Policy = std::function<Vec(const Vec& state, int t)>;

// A simulated environment instance with its own internal (possibly richer)
// state. Passing rng = nullptr steps with the process noise at its mean.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual int state_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual Vec action_lower() const = 0;
  virtual Vec action_upper() const = 0;
  virtual double dt() const = 0;

  // Samples the initial-state distribution iota, resets the internal state,
  // and returns the observable state.
  virtual Vec initial_state(Rng& rng) = 0;
  // Broad-coverage reset for dataset collection rollouts.
  virtual Vec exploration_state(Rng& rng) { return initial_state(rng); }
  // Resets to a given observable state (auxiliary internals go to nominal).
  virtual void reset(const Vec& s0) = 0;
  // Copies the full internal state from a same-kind environment; used to give
  // the deployment instance the training instance's physical scenario.
  virtual void reset_from(const Environment& other) = 0;

  virtual Vec observe() const = 0;
  virtual Vec step(const Vec& action, Rng* rng) = 0;
  virtual std::map<std::string, double> diagnostics() const = 0;
  virtual std::unique_ptr<Environment> clone() const = 0;
};

// ---- Dubins car: state (x, y, sin th, cos th), steering action ----

struct DubinsParams {
  double car_length = 2.5;
  double speed = 4.9;
  double dt = 0.01;
  double max_steering = 0.6;
  double noise_std = 0.0;  // additive, applied per state coordinate

  static DubinsParams training() { return {}; }
  static DubinsParams deployment() {
    DubinsParams p;
    p.car_length = 2.1;
    p.speed = 5.1;
    return p;
  }
};

// Forward Euler over dt with post-step renormalization of (sin, cos).
Vec dubins_step(const Vec& state, double steering, const DubinsParams& p, Rng* rng);

// Constant-curvature reference path through the origin with initial heading +x.
struct ReferencePath {
  double curvature = 1.0 / 15.0;  // 0 gives a straight line

  Vec point(double arclen) const;
  double heading(double arclen) const;
  double project(double x, double y) const;  // arclength of the closest point
};

// ---- Linear car: position/velocity/acceleration with printed matrices ----

struct LinearCarParams {
  Mat a;
  Mat b;
  Vec noise_mean;
  Mat noise_cov;
  double dt = 0.1;
  double u_min = -3.0, u_max = 3.0;

  static LinearCarParams training();
  static LinearCarParams deployment();
};

Vec linear_step(const Vec& state, double u, const LinearCarParams& p, Rng* rng);

// ---- Adaptive cruise control (simplified longitudinal model) ----
//
// Observable state (int v_err, v_err, v_ego); the lead car follows a
// sinusoidal acceleration profile; the velocity target switches to the lead's
// speed when the gap drops below d_default + t_gap * v_ego.

struct AccParams {
  double v_set = 30.0;
  double dt = 0.1;
  double d_default = 10.0;
  double t_gap = 1.4;
  double ego_lag = 0.5;  // first-order actuator lag (s)
  double lead_accel_amplitude = 0.6;
  double lead_accel_period = 40.0;
  double u_min = -3.0, u_max = 2.0;
  double accel_noise_std = 0.02;
  double x_ego0 = 10.0, v_ego0 = 20.0, x_lead0 = 60.0, v_lead0 = 25.0;

  static AccParams training() { return {}; }
  static AccParams deployment() {
    AccParams p;
    p.v_set = 34.5;  // the mistakenly configured set speed
    return p;
  }
};

struct AccFullState {
  double int_v_err = 0.0;
  double v_err = 0.0;
  double v_ego = 0.0;
  double a_ego = 0.0;
  double x_ego = 0.0;
  double v_lead = 0.0;
  double x_lead = 0.0;
  double time = 0.0;
};

AccFullState acc_step(const AccFullState& s, double u, const AccParams& p, Rng* rng);

// ---- factories ----

std::unique_ptr<Environment> make_dubins_env(const DubinsParams& p);
std::unique_ptr<Environment> make_linear_env(const LinearCarParams& p);
std::unique_ptr<Environment> make_acc_env(const AccParams& p);

// ---- baseline optimal policies (classical substitutes) ----

// Pure-pursuit steering toward the reference path, using the training model's
// geometry.
Policy make_dubins_pi_star(const DubinsParams& model, const ReferencePath& path,
                           double lookahead = 1.0);

// Discrete-time LQR regulation to a setpoint on the training matrices.
Policy make_linear_pi_star(const LinearCarParams& model, const Vec& setpoint,
                           const Vec& q_diag, double r);
Mat dlqr_gain(const Mat& a, const Mat& b, const Mat& q, const Mat& r);

// PI controller on (int v_err, v_err).
Policy make_acc_pi_star(double kp, double ki, double u_min, double u_max);

// ---- reference trajectories and dataset collection ----

// Closed-loop trajectory on `env` with the noise at its mean; length T+1.
std::vector<Vec> sample_reference(Environment& env, const Policy& pi, const Vec& s0, int horizon);

struct CollectOptions {
  int rollout_length = 40;
  double dither_fraction = 0.5;  // uniform dither half-width as a fraction of the action range
};

// (s, a, s') triples under pi plus uniform action dither, episodic rollouts.
TransitionDataset collect_transitions(Environment& env, const Policy& pi, int count, Rng& rng,
                                      const CollectOptions& options = {});

// Dataset files: header s_0..s_{n-1}, a_0..a_{m-1}, sp_0..sp_{n-1}.
void save_transitions_csv(const TransitionDataset& data, const std::string& path);
TransitionDataset load_transitions_csv(const std::string& path);

}  // namespace shiftguard

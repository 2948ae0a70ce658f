#include "shiftguard/environments.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "shiftguard/csv.hpp"
#include "shiftguard/errors.hpp"

namespace shiftguard {

// ---------- Dubins ----------

Vec dubins_step(const Vec& state, double steering, const DubinsParams& p, Rng* rng) {
  if (state.size() != 4) throw DimensionError("dubins_step: state must be (x, y, sin, cos)");
  double phi = std::clamp(steering, -p.max_steering, p.max_steering);
  double sin_th = state[2], cos_th = state[3];
  double turn = (p.speed / p.car_length) * std::tan(phi);
  Vec next(4);
  next[0] = state[0] + p.dt * p.speed * cos_th;
  next[1] = state[1] + p.dt * p.speed * sin_th;
  next[2] = sin_th + p.dt * turn * cos_th;
  next[3] = cos_th - p.dt * turn * sin_th;
  if (rng && p.noise_std > 0.0)
    for (int i = 0; i < 4; ++i) next[i] += p.noise_std * rng->normal();
  double norm = std::hypot(next[2], next[3]);
  if (norm > 0.0) {
    next[2] /= norm;
    next[3] /= norm;
  }
  return next;
}

Vec ReferencePath::point(double arclen) const {
  Vec p(2);
  if (curvature == 0.0) {
    p << arclen, 0.0;
    return p;
  }
  double r = 1.0 / curvature;
  p << r * std::sin(arclen / r), r * (1.0 - std::cos(arclen / r));
  return p;
}

double ReferencePath::heading(double arclen) const { return curvature * arclen; }

double ReferencePath::project(double x, double y) const {
  if (curvature == 0.0) return x;
  double r = 1.0 / curvature;
  double angle = std::atan2(x, r - y);  // angle from the circle center
  if (angle < 0.0) angle += 2.0 * std::numbers::pi;
  return angle * r;
}

namespace {

class DubinsEnvironment final : public Environment {
 public:
  explicit DubinsEnvironment(const DubinsParams& p) : params_(p) {
    state_ = Vec::Zero(4);
    state_[3] = 1.0;
  }

  int state_dim() const override { return 4; }
  int action_dim() const override { return 1; }
  Vec action_lower() const override { return Vec::Constant(1, -params_.max_steering); }
  Vec action_upper() const override { return Vec::Constant(1, params_.max_steering); }
  double dt() const override { return params_.dt; }

  Vec initial_state(Rng& rng) override {
    state_ = Vec::Zero(4);
    state_[0] = 0.05 * rng.normal();
    state_[1] = 0.05 * rng.normal();
    double heading = 0.03 * rng.normal();
    state_[2] = std::sin(heading);
    state_[3] = std::cos(heading);
    return state_;
  }

  Vec exploration_state(Rng& rng) override {
    state_ = Vec(4);
    state_[0] = rng.uniform(-2.0, 12.0);
    state_[1] = rng.uniform(-4.0, 10.0);
    double heading = rng.uniform(-std::numbers::pi, std::numbers::pi);
    state_[2] = std::sin(heading);
    state_[3] = std::cos(heading);
    return state_;
  }

  void reset(const Vec& s0) override {
    if (s0.size() != 4) throw DimensionError("DubinsEnvironment::reset");
    state_ = s0;
  }

  void reset_from(const Environment& other) override {
    const auto* o = dynamic_cast<const DubinsEnvironment*>(&other);
    if (!o) throw DomainError("reset_from: environment kind mismatch");
    state_ = o->state_;
  }

  Vec observe() const override { return state_; }

  Vec step(const Vec& action, Rng* rng) override {
    state_ = dubins_step(state_, action[0], params_, rng);
    return state_;
  }

  std::map<std::string, double> diagnostics() const override { return {}; }

  std::unique_ptr<Environment> clone() const override {
    return std::make_unique<DubinsEnvironment>(*this);
  }

 private:
  DubinsParams params_;
  Vec state_;
};

}  // namespace

// ---------- Linear car ----------

LinearCarParams LinearCarParams::training() {
  LinearCarParams p;
  p.a = Mat(3, 3);
  p.a << 1.0, 0.1, 0.0047, 0.0, 1.0, 0.0906, 0.0, 0.0, 0.8187;
  p.b = Mat(3, 1);
  p.b << 0.003, 0.0094, 0.1813;
  p.noise_mean = Vec(3);
  p.noise_mean << 0.0, 0.0, 0.2;
  p.noise_cov = std::exp(-8.0) * Mat::Identity(3, 3);
  return p;
}

LinearCarParams LinearCarParams::deployment() {
  LinearCarParams p;
  p.a = Mat(3, 3);
  p.a << 1.0, 0.1, 0.0046, 0.0, 1.0, 0.0885, 0.0, 0.0, 0.7788;
  p.b = Mat(3, 1);
  p.b << 0.004, 0.0115, 0.2212;
  p.noise_mean = Vec::Zero(3);
  p.noise_cov = std::exp(-8.0) * Mat::Identity(3, 3);
  return p;
}

Vec linear_step(const Vec& state, double u, const LinearCarParams& p, Rng* rng) {
  if (state.size() != 3) throw DimensionError("linear_step: state must be 3-dimensional");
  double uc = std::clamp(u, p.u_min, p.u_max);
  Vec next = p.a * state + p.b.col(0) * uc + p.noise_mean;
  if (rng) {
    double std0 = std::sqrt(p.noise_cov(0, 0));
    for (int i = 0; i < 3; ++i) next[i] += std0 * rng->normal();
  }
  return next;
}

namespace {

class LinearEnvironment final : public Environment {
 public:
  explicit LinearEnvironment(const LinearCarParams& p) : params_(p), state_(Vec::Zero(3)) {}

  int state_dim() const override { return 3; }
  int action_dim() const override { return 1; }
  Vec action_lower() const override { return Vec::Constant(1, params_.u_min); }
  Vec action_upper() const override { return Vec::Constant(1, params_.u_max); }
  double dt() const override { return params_.dt; }

  Vec initial_state(Rng& rng) override {
    state_ = Vec::Zero(3);
    for (int i = 0; i < 3; ++i) state_[i] = 0.05 * rng.normal();
    return state_;
  }

  Vec exploration_state(Rng& rng) override {
    state_ = Vec(3);
    state_[0] = rng.uniform(-2.0, 8.0);
    state_[1] = rng.uniform(-4.0, 4.0);
    state_[2] = rng.uniform(-4.0, 4.0);
    return state_;
  }

  void reset(const Vec& s0) override {
    if (s0.size() != 3) throw DimensionError("LinearEnvironment::reset");
    state_ = s0;
  }

  void reset_from(const Environment& other) override {
    const auto* o = dynamic_cast<const LinearEnvironment*>(&other);
    if (!o) throw DomainError("reset_from: environment kind mismatch");
    state_ = o->state_;
  }

  Vec observe() const override { return state_; }

  Vec step(const Vec& action, Rng* rng) override {
    state_ = linear_step(state_, action[0], params_, rng);
    return state_;
  }

  std::map<std::string, double> diagnostics() const override { return {}; }

  std::unique_ptr<Environment> clone() const override {
    return std::make_unique<LinearEnvironment>(*this);
  }

 private:
  LinearCarParams params_;
  Vec state_;
};

}  // namespace

// ---------- ACC ----------

AccFullState acc_step(const AccFullState& s, double u, const AccParams& p, Rng* rng) {
  AccFullState n = s;
  double uc = std::clamp(u, p.u_min, p.u_max);

  double lead_acc =
      p.lead_accel_amplitude * std::sin(2.0 * std::numbers::pi * s.time / p.lead_accel_period);
  n.v_lead = s.v_lead + p.dt * lead_acc;
  n.x_lead = s.x_lead + p.dt * n.v_lead;

  n.a_ego = s.a_ego + p.dt * (uc - s.a_ego) / p.ego_lag;
  if (rng && p.accel_noise_std > 0.0) n.a_ego += p.accel_noise_std * rng->normal();
  n.v_ego = s.v_ego + p.dt * n.a_ego;
  n.x_ego = s.x_ego + p.dt * n.v_ego;

  double d_rel = n.x_lead - n.x_ego;
  double d_safe = p.d_default + p.t_gap * n.v_ego;
  double v_target = d_rel >= d_safe ? p.v_set : std::min(p.v_set, n.v_lead);
  n.v_err = v_target - n.v_ego;
  n.int_v_err = s.int_v_err + p.dt * n.v_err;
  n.time = s.time + p.dt;
  return n;
}

namespace {

class AccEnvironment final : public Environment {
 public:
  explicit AccEnvironment(const AccParams& p) : params_(p) { set_nominal(); }

  int state_dim() const override { return 3; }
  int action_dim() const override { return 1; }
  Vec action_lower() const override { return Vec::Constant(1, params_.u_min); }
  Vec action_upper() const override { return Vec::Constant(1, params_.u_max); }
  double dt() const override { return params_.dt; }

  Vec initial_state(Rng& rng) override {
    set_nominal();
    full_.v_ego = params_.v_ego0 + rng.normal();
    full_.x_lead = params_.x_lead0 + 2.0 * rng.normal();
    full_.v_lead = params_.v_lead0 + 0.5 * rng.normal();
    refresh_error();
    return observe();
  }

  Vec exploration_state(Rng& rng) override {
    set_nominal();
    full_.v_ego = rng.uniform(15.0, 36.0);
    full_.a_ego = rng.uniform(-2.0, 2.0);
    full_.x_ego = 0.0;
    full_.x_lead = rng.uniform(5.0, 120.0);
    full_.v_lead = rng.uniform(20.0, 30.0);
    full_.time = rng.uniform(0.0, params_.lead_accel_period);
    refresh_error();
    full_.int_v_err = rng.uniform(-20.0, 20.0);
    return observe();
  }

  void reset(const Vec& s0) override {
    if (s0.size() != 3) throw DimensionError("AccEnvironment::reset");
    set_nominal();
    full_.int_v_err = s0[0];
    full_.v_err = s0[1];
    full_.v_ego = s0[2];
  }

  void reset_from(const Environment& other) override {
    const auto* o = dynamic_cast<const AccEnvironment*>(&other);
    if (!o) throw DomainError("reset_from: environment kind mismatch");
    full_ = o->full_;  // shared physical scenario; v_err re-derived from own v_set
    refresh_error();
    full_.int_v_err = 0.0;
  }

  Vec observe() const override {
    Vec s(3);
    s << full_.int_v_err, full_.v_err, full_.v_ego;
    return s;
  }

  Vec step(const Vec& action, Rng* rng) override {
    full_ = acc_step(full_, action[0], params_, rng);
    return observe();
  }

  std::map<std::string, double> diagnostics() const override {
    return {{"d_rel", full_.x_lead - full_.x_ego},
            {"v_rel", full_.v_lead - full_.v_ego},
            {"v_ego", full_.v_ego}};
  }

  std::unique_ptr<Environment> clone() const override {
    return std::make_unique<AccEnvironment>(*this);
  }

 private:
  void set_nominal() {
    full_ = AccFullState{};
    full_.x_ego = params_.x_ego0;
    full_.v_ego = params_.v_ego0;
    full_.x_lead = params_.x_lead0;
    full_.v_lead = params_.v_lead0;
    refresh_error();
  }

  void refresh_error() {
    double d_rel = full_.x_lead - full_.x_ego;
    double d_safe = params_.d_default + params_.t_gap * full_.v_ego;
    double v_target = d_rel >= d_safe ? params_.v_set : std::min(params_.v_set, full_.v_lead);
    full_.v_err = v_target - full_.v_ego;
  }

  AccParams params_;
  AccFullState full_;
};

}  // namespace

std::unique_ptr<Environment> make_dubins_env(const DubinsParams& p) {
  return std::make_unique<DubinsEnvironment>(p);
}
std::unique_ptr<Environment> make_linear_env(const LinearCarParams& p) {
  return std::make_unique<LinearEnvironment>(p);
}
std::unique_ptr<Environment> make_acc_env(const AccParams& p) {
  return std::make_unique<AccEnvironment>(p);
}

// ---------- policies ----------

Policy make_dubins_pi_star(const DubinsParams& model, const ReferencePath& path,
                           double lookahead) {
  return [model, path, lookahead](const Vec& state, int) {
    double arclen = path.project(state[0], state[1]);
    Vec goal = path.point(arclen + lookahead);
    double heading = std::atan2(state[2], state[3]);
    double to_goal = std::atan2(goal[1] - state[1], goal[0] - state[0]);
    double alpha = to_goal - heading;
    while (alpha > std::numbers::pi) alpha -= 2.0 * std::numbers::pi;
    while (alpha < -std::numbers::pi) alpha += 2.0 * std::numbers::pi;
    double phi = std::atan(2.0 * model.car_length * std::sin(alpha) / lookahead);
    Vec a(1);
    a[0] = std::clamp(phi, -model.max_steering, model.max_steering);
    return a;
  };
}

Mat dlqr_gain(const Mat& a, const Mat& b, const Mat& q, const Mat& r) {
  Mat p = q;
  for (int iter = 0; iter < 10000; ++iter) {
    Mat k = (r + b.transpose() * p * b).ldlt().solve(b.transpose() * p * a);
    Mat next = q + a.transpose() * p * (a - b * k);
    if ((next - p).cwiseAbs().maxCoeff() < 1e-12) {
      p = next;
      break;
    }
    p = next;
  }
  return (r + b.transpose() * p * b).ldlt().solve(b.transpose() * p * a);
}

Policy make_linear_pi_star(const LinearCarParams& model, const Vec& setpoint, const Vec& q_diag,
                           double r) {
  Mat q = q_diag.asDiagonal();
  Mat rr = Mat::Constant(1, 1, r);
  Mat k = dlqr_gain(model.a, model.b, q, rr);
  double lo = model.u_min, hi = model.u_max;
  return [k, setpoint, lo, hi](const Vec& state, int) {
    Vec u = -k * (state - setpoint);
    Vec a(1);
    a[0] = std::clamp(u[0], lo, hi);
    return a;
  };
}

Policy make_acc_pi_star(double kp, double ki, double u_min, double u_max) {
  return [kp, ki, u_min, u_max](const Vec& state, int) {
    Vec a(1);
    a[0] = std::clamp(ki * state[0] + kp * state[1], u_min, u_max);
    return a;
  };
}

// ---------- reference sampling and data collection ----------

std::vector<Vec> sample_reference(Environment& env, const Policy& pi, const Vec& s0,
                                  int horizon) {
  env.reset(s0);
  std::vector<Vec> traj;
  traj.reserve(horizon + 1);
  traj.push_back(s0);
  for (int t = 0; t < horizon; ++t) {
    Vec a = pi(env.observe(), t);
    traj.push_back(env.step(a, nullptr));
  }
  return traj;
}

TransitionDataset collect_transitions(Environment& env, const Policy& pi, int count, Rng& rng,
                                      const CollectOptions& options) {
  TransitionDataset data;
  data.reserve(count);
  Vec lo = env.action_lower(), hi = env.action_upper();
  int m = env.action_dim();
  while (static_cast<int>(data.size()) < count) {
    Vec s = env.exploration_state(rng);
    for (int t = 0; t < options.rollout_length && static_cast<int>(data.size()) < count; ++t) {
      Vec a = pi(s, t);
      for (int k = 0; k < m; ++k) {
        double half_width = options.dither_fraction * (hi[k] - lo[k]);
        a[k] = std::clamp(a[k] + rng.uniform(-half_width, half_width), lo[k], hi[k]);
      }
      Vec sp = env.step(a, &rng);
      data.push_back({s, a, sp});
      s = sp;
    }
  }
  return data;
}

void save_transitions_csv(const TransitionDataset& data, const std::string& path) {
  if (data.empty()) throw Error("save_transitions_csv: empty dataset");
  int n = static_cast<int>(data.front().s.size());
  int m = static_cast<int>(data.front().a.size());
  CsvTable table;
  for (int i = 0; i < n; ++i) table.header.push_back("s_" + std::to_string(i));
  for (int i = 0; i < m; ++i) table.header.push_back("a_" + std::to_string(i));
  for (int i = 0; i < n; ++i) table.header.push_back("sp_" + std::to_string(i));
  for (const Transition& t : data) {
    std::vector<std::string> row;
    for (int i = 0; i < n; ++i) row.push_back(format_double(t.s[i]));
    for (int i = 0; i < m; ++i) row.push_back(format_double(t.a[i]));
    for (int i = 0; i < n; ++i) row.push_back(format_double(t.sp[i]));
    table.rows.push_back(std::move(row));
  }
  write_csv(table, path);
}

TransitionDataset load_transitions_csv(const std::string& path) {
  CsvTable table = read_csv(path);
  int n = 0, m = 0;
  for (const std::string& h : table.header) {
    if (h.rfind("s_", 0) == 0 && h.rfind("sp_", 0) != 0) ++n;
    if (h.rfind("a_", 0) == 0) ++m;
  }
  if (n == 0 || static_cast<int>(table.header.size()) != 2 * n + m)
    throw ParseError("transitions CSV header mismatch");
  TransitionDataset data;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    Transition t;
    t.s = Vec(n);
    t.a = Vec(m);
    t.sp = Vec(n);
    int at = 0;
    for (int i = 0; i < n; ++i) t.s[i] = table.number(r, at++);
    for (int i = 0; i < m; ++i) t.a[i] = table.number(r, at++);
    for (int i = 0; i < n; ++i) t.sp[i] = table.number(r, at++);
    data.push_back(std::move(t));
  }
  return data;
}

}  // namespace shiftguard

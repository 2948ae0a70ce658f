#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "shiftguard/errors.hpp"
#include "shiftguard/policy_adapt.hpp"

using namespace shiftguard;

namespace {

// affine surrogate s' = A s + B a + c as a zero-hidden-layer network
ReluNetwork affine_net(const Mat& a, const Mat& b, const Vec& c) {
  int n = static_cast<int>(a.rows());
  int m = static_cast<int>(b.cols());
  ReluNetwork net({n + m, n}, Activation::relu);
  net.weight(0).leftCols(n) = a;
  net.weight(0).rightCols(m) = b;
  net.bias(0) = c;
  return net;
}

struct AffineCase {
  Mat a;
  Mat b;
  Vec c;
  ReluNetwork net;
  Vec mu_s;
  Ellipsoid state_region;

  AffineCase()
      : a((Mat(3, 3) << 0.9, 0.05, 0.0, 0.0, 0.95, 0.1, 0.0, 0.0, 0.8).finished()),
        b((Mat(3, 1) << 0.02, 0.1, 0.25).finished()),
        c((Vec(3) << 0.01, -0.02, 0.05).finished()),
        net(affine_net(a, b, c)),
        mu_s((Vec(3) << 0.3, -0.2, 0.4).finished()),
        state_region(mu_s, 0.02 * Mat::Identity(3, 3)) {}

  double least_squares_action(const Vec& target) const {
    Vec rhs = target - a * mu_s - c;
    return b.col(0).dot(rhs) / b.col(0).squaredNorm();
  }
};

}  // namespace

TEST_CASE("affine surrogate recovers the least-squares action") {
  AffineCase f;
  AdaptProblem p{f.net,
                 f.state_region,
                 Vec::Zero(3),
                 Vec::Constant(1, -5.0),
                 Vec::Constant(1, 5.0),
                 1e-6,
                 1e-8};

  // reachable target: optimum is exactly a0
  double a0 = 1.3;
  p.target = f.a * f.mu_s + f.b.col(0) * a0 + f.c;
  AdaptSolution sol = solve_adaptation(p);
  CHECK(std::fabs(sol.adapted_action[0] - a0) < 1e-3);

  // unreachable target: optimum is the pseudo-inverse solution
  Vec off(3);
  off << 0.25, -0.1, 0.0;
  off -= f.b.col(0) * (f.b.col(0).dot(off) / f.b.col(0).squaredNorm());
  p.target += off;
  double ls = f.least_squares_action(p.target);
  AdaptSolution sol2 = solve_adaptation(p);
  CHECK(std::fabs(sol2.adapted_action[0] - ls) < 1e-3);
}

TEST_CASE("active actuator bounds clip at the nearer bound") {
  AffineCase f;
  AdaptProblem p{f.net,
                 f.state_region,
                 Vec::Zero(3),
                 Vec::Constant(1, -1.0),
                 Vec::Constant(1, 1.0),
                 1e-6,
                 1e-8};
  double a_free = 1.8;  // outside [-1, 1]
  p.target = f.a * f.mu_s + f.b.col(0) * a_free + f.c;
  CHECK(f.least_squares_action(p.target) == doctest::Approx(a_free));

  AdaptSolution sol = solve_adaptation(p);
  CHECK(std::fabs(sol.adapted_action[0] - 1.0) < 1e-3);
  // scalar action: the recovered action satisfies the box before clipping
  CHECK_FALSE(sol.clipped);
}

TEST_CASE("reachable target yields a near-zero surrogate residual") {
  AffineCase f;
  double a0 = -0.7;
  Vec target = f.a * f.mu_s + f.b.col(0) * a0 + f.c;
  AdaptProblem p{f.net,    f.state_region,        target, Vec::Constant(1, -5.0),
                 Vec::Constant(1, 5.0), 1e-6,   1e-8};
  AdaptSolution sol = solve_adaptation(p);

  Vec in(4), in0(4);
  in << f.mu_s, sol.adapted_action;
  in0 << f.mu_s, a0;
  double res_adapted = (target - f.net.forward(in)).norm();
  double res_a0 = (target - f.net.forward(in0)).norm();
  CHECK(res_adapted <= res_a0 + 1e-3);
  CHECK(res_adapted < 1e-3);
}

TEST_CASE("theorem-1 soundness: residuals stay in the certified bound") {
  Rng rng(101);
  for (int trial = 0; trial < 8; ++trial) {
    ReluNetwork net = ReluNetwork::random({4, 5, 3}, Activation::relu, rng);
    Vec mu_s(3);
    for (int i = 0; i < 3; ++i) mu_s[i] = rng.normal();
    Ellipsoid state_region(mu_s, 0.1 * Mat::Identity(3, 3));
    Vec in(4);
    in << mu_s, 0.2;
    Vec target = net.forward(in);

    AdaptProblem p{net,
                   state_region,
                   target,
                   Vec::Constant(1, -2.0),
                   Vec::Constant(1, 2.0),
                   1e-6,
                   1e-8};
    AdaptSolution sol = solve_adaptation(p);
    Ellipsoid bound = sol.residual_bound();
    Ellipsoid action_region = sol.action_region();

    for (int i = 0; i < 2000; ++i) {
      Vec s = state_region.sample(rng);
      Vec a = action_region.sample(rng);
      Vec x(4);
      x << s, a;
      CHECK(bound.contains(target - net.forward(x), 1e-6));
    }
  }
}

TEST_CASE("action region presses against the trace floor") {
  AffineCase f;
  double delta = 1e-6;
  Vec target = f.a * f.mu_s + f.b.col(0) * 0.9 + f.c;
  AdaptProblem p{f.net,    f.state_region,        target, Vec::Constant(1, -5.0),
                 Vec::Constant(1, 5.0), delta,  1e-8};
  AdaptSolution sol = solve_adaptation(p);
  double shape_trace = (sol.tau2 * sol.u.inverse()).trace();
  CHECK(shape_trace >= delta - 1e-12);
  CHECK(shape_trace <= 10.0 * delta);
}

TEST_CASE("select_action comparison") {
  Vec target(2);
  target << 1.0, 0.0;
  SurrogateFn surrogate = [](const Vec&, const Vec& a) {
    Vec out(2);
    out << a[0], 0.0;  // residual is |1 - a|
    return out;
  };
  Vec s = Vec::Zero(2);

  // equal candidates: tie goes to the trained policy
  Vec same(1);
  same << 0.3;
  StepDecision tie = select_action(s, same, same, surrogate, target);
  CHECK_FALSE(tie.chose_adapted);
  CHECK(tie.chosen[0] == 0.3);

  // adapted candidate strictly better
  Vec pi_a(1), cand(1);
  pi_a << 0.0;
  cand << 1.0;
  StepDecision better = select_action(s, pi_a, cand, surrogate, target);
  CHECK(better.chose_adapted);
  CHECK(better.chosen[0] == 1.0);

  // chosen residual never exceeds either candidate's
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    Vec x(1), y(1);
    x << rng.normal();
    y << rng.normal();
    StepDecision d = select_action(s, x, y, surrogate, target);
    double chosen_res = d.chose_adapted ? d.adapted_residual : d.pi_star_residual;
    CHECK(chosen_res <= std::min(d.pi_star_residual, d.adapted_residual) + 1e-15);
  }
}

TEST_CASE("run_episode handles horizon zero and falls back on solver failure") {
  LinearCarParams deploy = LinearCarParams::deployment();
  auto env = make_linear_env(deploy);
  Rng rng(7);

  // cheap surrogate: train briefly on a small deployment dataset
  Policy pi = make_linear_pi_star(LinearCarParams::training(),
                                  (Vec(3) << 5.0, 0.0, 0.0).finished(),
                                  (Vec(3) << 10.0, 1.0, 0.1).finished(), 1.0);
  TransitionDataset data = collect_transitions(*env, pi, 1500, rng);
  TrainConfig tc;
  tc.epochs = 60;
  tc.seed = 2;
  SurrogatePair surrogates{train_mean(data, {4, 10, 3}, tc),
                           train_cov(data, train_mean(data, {4, 10, 3}, tc), {4, 8, 3}, tc),
                           std::nullopt, std::nullopt};

  Vec s0 = env->initial_state(rng);
  auto train_env = make_linear_env(LinearCarParams::training());
  std::vector<Vec> tau = sample_reference(*train_env, pi, s0, 10);

  EpisodeOptions opt;
  opt.mode = EpisodeMode::adapted;
  env->reset(s0);
  EpisodeLog empty = run_episode(*env, surrogates, pi, {s0}, 0, opt, rng);
  CHECK(empty.empty());

  // iteration-starved solver: every adaptation step must fall back to pi*
  EpisodeOptions starved = opt;
  starved.adapt.solver.iteration_cap = 1;
  env->reset(s0);
  EpisodeLog log = run_episode(*env, surrogates, pi, tau, 10, starved, rng);
  REQUIRE(log.size() == 10);
  for (const StepRecord& r : log) {
    CHECK(r.action.size() == 1);
    if (r.t >= 1) CHECK(r.solver_status == "numerical_failure");
    CHECK(r.chosen_surrogate_residual <= r.pi_star_surrogate_residual + 1e-12);
  }
}

TEST_CASE("adaptation improves tracking under the linear-car shift") {
  Rng rng(11);
  Policy pi = make_linear_pi_star(LinearCarParams::training(),
                                  (Vec(3) << 5.0, 0.0, 0.0).finished(),
                                  (Vec(3) << 10.0, 1.0, 0.1).finished(), 1.0);

  auto deploy = make_linear_env(LinearCarParams::deployment());
  TransitionDataset data = collect_transitions(*deploy, pi, 4000, rng);
  TrainConfig tc;
  tc.epochs = 200;
  tc.seed = 3;
  ReluNetwork mean_net = train_mean(data, {4, 10, 5, 3}, tc);
  ReluNetwork cov_net = train_cov(data, mean_net, {4, 8, 3}, tc);
  SurrogatePair surrogates{mean_net, cov_net, std::nullopt, std::nullopt};

  double err_adapted = 0.0, err_unadapted = 0.0;
  for (std::uint64_t seed = 0; seed < 2; ++seed) {
    Rng ep_rng(100 + seed);
    auto train_env = make_linear_env(LinearCarParams::training());
    Vec s0 = train_env->initial_state(ep_rng);
    std::vector<Vec> tau = sample_reference(*train_env, pi, s0, 40);

    EpisodeOptions opt;
    opt.mode = EpisodeMode::adapted;
    deploy->reset(s0);
    Rng r1(500 + seed);
    EpisodeLog adapted = run_episode(*deploy, surrogates, pi, tau, 40, opt, r1);
    err_adapted += mean_tracking_error(adapted);

    opt.mode = EpisodeMode::unadapted;
    deploy->reset(s0);
    Rng r2(500 + seed);
    EpisodeLog unadapted = run_episode(*deploy, surrogates, pi, tau, 40, opt, r2);
    err_unadapted += mean_tracking_error(unadapted);

    for (const StepRecord& rec : adapted)
      CHECK(rec.chosen_surrogate_residual <= rec.pi_star_surrogate_residual + 1e-12);
  }
  CHECK(err_adapted < err_unadapted);
}

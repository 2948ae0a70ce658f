#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "shiftguard/conic.hpp"
#include "shiftguard/rng.hpp"

using namespace shiftguard;
using namespace shiftguard::conic;

namespace {

// maximize logdet(X) s.t. X <= cap (elementwise affine PSD constraint cap - X >= 0)
ConicProgram maxdet_below(const Mat& cap, MatVarId* x_out) {
  ConicProgram p;
  MatVarId x = p.add_matrix("X", static_cast<int>(cap.rows()));
  MatrixExpr expr(static_cast<int>(cap.rows()));
  expr.add_constant(cap);
  expr.add_congruence(x, Mat::Identity(cap.rows(), cap.rows()), -1.0);
  p.add_psd(std::move(expr), "X below cap");
  p.add_logdet_objective(x);
  *x_out = x;
  return p;
}

}  // namespace

TEST_CASE("maxdet against the identity cap") {
  MatVarId x;
  ConicProgram p = maxdet_below(Mat::Identity(2, 2), &x);
  SolverResult r = solve(p);
  REQUIRE(r.status == SolveStatus::optimal);
  CHECK(std::fabs(r.objective) < 1e-6);
  Mat xv = r.matrix(x);
  CHECK((xv - Mat::Identity(2, 2)).norm() < 1e-4);
  CHECK(verify(p, r, 1e-6).ok);
}

TEST_CASE("maxdet against a diagonal cap") {
  Mat cap = Vec::Zero(2).asDiagonal();
  cap(0, 0) = 4.0;
  cap(1, 1) = 9.0;
  MatVarId x;
  ConicProgram p = maxdet_below(cap, &x);
  SolverResult r = solve(p);
  REQUIRE(r.status == SolveStatus::optimal);
  CHECK(r.objective == doctest::Approx(std::log(36.0)).epsilon(1e-6));
  CHECK((r.matrix(x) - cap).norm() < 2e-4);
  CHECK(verify(p, r, 1e-6).ok);
}

TEST_CASE("infeasible toy program is detected") {
  ConicProgram p;
  MatVarId x = p.add_matrix("X", 2);
  MatrixExpr above_identity(2);
  above_identity.add_congruence(x, Mat::Identity(2, 2), 1.0);
  above_identity.add_constant(-Mat::Identity(2, 2));
  p.add_psd(std::move(above_identity), "X above I");
  MatrixExpr below_zero(2);
  below_zero.add_congruence(x, Mat::Identity(2, 2), -1.0);
  p.add_psd(std::move(below_zero), "X below 0");
  p.add_logdet_objective(x);
  SolverResult r = solve(p);
  CHECK(r.status == SolveStatus::infeasible);
}

TEST_CASE("linear objective with scalar bounds") {
  ConicProgram p;
  VarId x = p.add_scalar("x", -10.0, 3.0);
  VarId y = p.add_scalar("y", 0.0);
  p.add_linear_objective(x, 1.0);
  p.add_linear_objective(y, -1.0);
  // y >= 2x - 4: raising x past 2 costs twice as much y
  p.add_linear({{{x.index, 2.0}, {y.index, -1.0}}, 4.0, false, "2x - y <= 4"});
  SolverResult r = solve(p);
  REQUIRE(r.status == SolveStatus::optimal);
  CHECK(r.scalar(x) == doctest::Approx(2.0).epsilon(1e-5));
  CHECK(std::fabs(r.scalar(y)) < 1e-4);
  CHECK(verify(p, r, 1e-6).ok);
}

TEST_CASE("linear equality constraints hold at the optimum") {
  ConicProgram p;
  VarId x = p.add_scalar("x", 0.0);
  VarId y = p.add_scalar("y", 0.0);
  p.add_linear({{{x.index, 1.0}, {y.index, 1.0}}, 2.0, true, "x + y = 2"});
  p.add_linear_objective(x, 1.0);
  SolverResult r = solve(p);
  REQUIRE(r.status == SolveStatus::optimal);
  CHECK(r.scalar(x) + r.scalar(y) == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(r.scalar(x) == doctest::Approx(2.0).epsilon(1e-4));
  CHECK(verify(p, r, 1e-6).ok);
}

TEST_CASE("feasibility status is invariant to positive constraint scaling") {
  for (double scale : {1e-3, 1.0, 1e3}) {
    MatVarId x;
    ConicProgram p;
    x = {};
    {
      Mat cap = scale * Mat::Identity(2, 2);
      MatVarId xv = p.add_matrix("X", 2);
      MatrixExpr expr(2);
      expr.add_constant(cap);
      expr.add_congruence(xv, scale * Mat::Identity(2, 2), -1.0);
      p.add_psd(std::move(expr), "scaled");
      p.add_logdet_objective(xv);
      SolverResult r = solve(p);
      CHECK(r.status == SolveStatus::optimal);
    }

    ConicProgram q;
    MatVarId xv = q.add_matrix("X", 2);
    MatrixExpr above(2);
    above.add_congruence(xv, Mat::Identity(2, 2), 1.0);
    above.add_constant(-scale * Mat::Identity(2, 2));
    q.add_psd(std::move(above), "X above sI");
    MatrixExpr below(2);
    below.add_congruence(xv, Mat::Identity(2, 2), -1.0);
    q.add_psd(std::move(below), "X below 0");
    q.add_logdet_objective(xv);
    CHECK(solve(q).status == SolveStatus::infeasible);
  }
}

TEST_CASE("iteration cap produces a numerical failure, not a wrong answer") {
  MatVarId x;
  ConicProgram p = maxdet_below(Mat::Identity(3, 3), &x);
  SolverSettings settings;
  settings.iteration_cap = 1;
  SolverResult r = solve(p, settings);
  CHECK(r.status == SolveStatus::numerical_failure);
}

TEST_CASE("random feasible maxdet programs verify at 1e-6") {
  Rng rng(77);
  for (int trial = 0; trial < 25; ++trial) {
    int dim = 2 + static_cast<int>(rng.index(3));
    Mat a(dim, dim);
    for (int i = 0; i < dim * dim; ++i) a(i / dim, i % dim) = rng.normal();
    Mat cap = a * a.transpose() + (0.5 + rng.uniform()) * Mat::Identity(dim, dim);

    ConicProgram p;
    MatVarId x = p.add_matrix("X", dim);
    MatrixExpr expr(dim);
    expr.add_constant(cap);
    expr.add_congruence(x, Mat::Identity(dim, dim), -1.0);
    p.add_psd(std::move(expr), "cap");
    // a random trace constraint that may or may not be active
    LinearConstraint tr;
    for (int i = 0; i < dim; ++i) tr.terms.push_back({p.entry(x, i, i).index, 1.0});
    tr.rhs = 0.5 * cap.trace() + rng.uniform() * cap.trace();
    tr.name = "trace cap";
    p.add_linear(tr);
    p.add_logdet_objective(x);

    SolverResult r = solve(p);
    REQUIRE(r.status == SolveStatus::optimal);
    VerifyReport rep = verify(p, r, 1e-6);
    CHECK(rep.ok);
  }
}

TEST_CASE("unbounded maxdet is flagged") {
  ConicProgram p;
  MatVarId x = p.add_matrix("X", 2);
  MatrixExpr above(2);
  above.add_congruence(x, Mat::Identity(2, 2), 1.0);
  above.add_constant(-Mat::Identity(2, 2));
  p.add_psd(std::move(above), "X above I");
  p.add_logdet_objective(x);
  SolverResult r = solve(p);
  CHECK(r.status == SolveStatus::unbounded);
}

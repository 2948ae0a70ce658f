#pragma once

#include <limits>
#include <map>
#include <string>
#include <vector>

#include "shiftguard/linalg.hpp"

namespace shiftguard::conic {

struct VarId {
  int index = -1;
  bool valid() const { return index >= 0; }
};

// Symmetric matrix variable; entries are packed scalar variables
// (row-major upper triangle starting at `first`).
struct MatVarId {
  int first = -1;
  int dim = 0;
  bool valid() const { return first >= 0; }
};

inline int mat_entry_offset(int dim, int i, int j) {
  if (i > j) std::swap(i, j);
  return i * dim - i * (i - 1) / 2 + (j - i);
}

// Affine symmetric matrix expression C0 + sum_k w_k C_k.
class MatrixExpr {
 public:
  explicit MatrixExpr(int dim) : dim_(dim), constant_(Mat::Zero(dim, dim)) {}

  int dim() const { return dim_; }
  const Mat& constant() const { return constant_; }
  const std::map<int, Mat>& terms() const { return terms_; }

  void add_constant(const Mat& c);
  void add_term(VarId v, const Mat& coeff);
  // Adds sign * P^T X P with X a matrix variable and P of shape (X.dim x this->dim).
  void add_congruence(MatVarId x, const Mat& p, double sign = 1.0);

  Mat evaluate(const Vec& values) const;

 private:
  int dim_;
  Mat constant_;
  std::map<int, Mat> terms_;
};

struct LinearTerm {
  int var;
  double coeff;
};

// sum coeff_k w_k (<=|==) rhs
struct LinearConstraint {
  std::vector<LinearTerm> terms;
  double rhs = 0.0;
  bool equality = false;
  std::string name;

  double lhs_value(const Vec& values) const;
};

enum class SolveStatus { optimal, infeasible, unbounded, numerical_failure };
std::string to_string(SolveStatus s);

struct SolverSettings {
  double feas_tol = 1e-8;
  double gap_tol = 1e-8;       // relative duality-gap target
  int iteration_cap = 200;     // Newton iterations per phase
  double t_initial = 1.0;
  double t_growth = 20.0;
  int max_backtracks = 60;
  // Free variables are boxed at +-variable_box internally so runaway
  // multiplier directions cannot stall the barrier; objective variables
  // exceeding a tenth of the box are reported as unbounded rays.
  double variable_box = 1e10;
};

struct SolverResult {
  SolveStatus status = SolveStatus::numerical_failure;
  Vec values;          // defined iff status == optimal
  double objective = std::numeric_limits<double>::quiet_NaN();  // maximize convention
  double solve_seconds = 0.0;
  std::string diagnostics;

  double scalar(VarId v) const { return values[v.index]; }
  Mat matrix(MatVarId m) const;
};

// Conic program with PSD constraints and a maximized
// sum-of-weighted-logdet plus linear objective.
class ConicProgram {
 public:
  VarId add_scalar(const std::string& name,
                   double lb = -std::numeric_limits<double>::infinity(),
                   double ub = std::numeric_limits<double>::infinity());
  MatVarId add_matrix(const std::string& name, int dim);
  VarId entry(MatVarId m, int i, int j) const;

  void add_psd(MatrixExpr expr, const std::string& name);
  void add_linear(LinearConstraint c);

  // objective: maximize sum_b weight_b logdet(X_b) + sum_k coeff_k w_k
  void add_logdet_objective(MatVarId m, double weight = 1.0);
  void add_linear_objective(VarId v, double coeff);

  int num_vars() const { return static_cast<int>(lb_.size()); }
  const std::vector<double>& lower_bounds() const { return lb_; }
  const std::vector<double>& upper_bounds() const { return ub_; }
  const std::vector<std::pair<MatrixExpr, std::string>>& psd_constraints() const { return psd_; }
  const std::vector<LinearConstraint>& linear_constraints() const { return linear_; }
  const std::vector<std::pair<MatVarId, double>>& logdet_terms() const { return logdet_; }
  const std::map<int, double>& linear_objective() const { return obj_linear_; }
  const std::string& var_name(int index) const { return names_[index]; }

  double objective_value(const Vec& values) const;

 private:
  std::vector<std::string> names_;
  std::vector<double> lb_, ub_;
  std::vector<std::pair<MatrixExpr, std::string>> psd_;
  std::vector<LinearConstraint> linear_;
  std::vector<std::pair<MatVarId, double>> logdet_;
  std::map<int, double> obj_linear_;
};

SolverResult solve(const ConicProgram& program, const SolverSettings& settings = {});

struct VerifyEntry {
  std::string name;
  double violation;  // positive means violated by this much
  double threshold;
  bool ok;
};

struct VerifyReport {
  std::vector<VerifyEntry> entries;
  double worst_violation = 0.0;
  bool ok = true;
};

// Independent re-check of all constraints by eigenvalue computation.
VerifyReport verify(const ConicProgram& program, const SolverResult& result, double tol);

}  // namespace shiftguard::conic

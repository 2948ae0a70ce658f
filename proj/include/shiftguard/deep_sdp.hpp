#pragma once

#include <optional>

#include "shiftguard/conic.hpp"
#include "shiftguard/ellipsoid.hpp"
#include "shiftguard/linalg.hpp"
#include "shiftguard/relu_net.hpp"

namespace shiftguard {

// Index layout of the base vector z = [s; a; x; 1], where x stacks the
// hidden-layer post-activations of the network.
struct BaseVectorLayout {
  int n = 0;  // state dim
  int m = 0;  // action dim
  std::vector<int> hidden_counts;  // per hidden layer
  int total = 0;                   // n + m + sum(hidden) + 1

  int s_offset() const { return 0; }
  int a_offset() const { return n; }
  int x_offset() const { return n + m; }
  int x_offset_of_layer(int layer) const;
  int x_total() const { return total - n - m - 1; }
  int one_index() const { return total - 1; }
};

BaseVectorLayout build_layout(const ReluNetwork& net, int n, int m);

// QC multipliers for the stacked ReLU constraints: lambda free
// (complementarity), nu >= 0 (z >= v), eta >= 0 (z >= 0).
struct QCMultipliers {
  Vec lambda;
  Vec nu;
  Vec eta;
};

// Selector matrices: E1 z = [s;1], E2 z = [a;1], E3 z = [x;1].
Mat selector_E1(const BaseVectorLayout& layout);
Mat selector_E2(const BaseVectorLayout& layout);
Mat selector_E3(const BaseVectorLayout& layout);

// Affine map v = A_v z expressing all pre-activations from the base vector
// (constants folded into the trailing-one column).
Mat preactivation_map(const ReluNetwork& net, const BaseVectorLayout& layout);
// A_z z = x (selector of the post-activation block).
Mat postactivation_map(const BaseVectorLayout& layout);

// (1/rho_n) E1^T [ -Sigma^{-1}, Sigma^{-1} mu; mu^T Sigma^{-1}, -mu^T Sigma^{-1} mu + rho_n ] E1
Mat build_M_state(const Vec& mu_s, const Mat& sigma_s, double rho_n,
                  const BaseVectorLayout& layout);

// E2^T [ -Omega^{-1}, Omega^{-1} mu; mu^T Omega^{-1}, -mu^T Omega^{-1} mu + 1 ] E2
Mat build_M_action(const Vec& mu_a, const Mat& omega_a, const BaseVectorLayout& layout);

// ReLU quadratic constraint conjugated into base-vector coordinates;
// affine in (lambda, nu, eta).
Mat build_M_phi(const ReluNetwork& net, const QCMultipliers& mult,
                const BaseVectorLayout& layout);

// Output map [C b; 0 1] with b = b_last - target; rows give [r; 1] = F z.
Mat output_map(const ReluNetwork& net, const Vec& target, const BaseVectorLayout& layout);

// F^T [ -Omega, 0; 0, 1 ] F for the given residual-bound shape inverse Omega.
Mat build_M_out(const ReluNetwork& net, const Vec& target, const Mat& omega,
                const BaseVectorLayout& layout);

// Per-neuron pre-activation intervals from box-propagating the input regions;
// used by the optional constraint-tightening flag.
struct NeuronIntervals {
  Vec lower;
  Vec upper;
};
NeuronIntervals preactivation_intervals(const ReluNetwork& net, const Ellipsoid& state_region,
                                        const Ellipsoid& action_region);

struct BoundOptions {
  double omega_cap = 1e8;      // cap on eigenvalues of Omega; keeps degenerate programs bounded
  bool interval_tightening = false;
  conic::SolverSettings solver;
};

struct BoundResult {
  Ellipsoid bound;             // E(0, Omega_R) with Omega_R = Omega^{-1}
  double logdet_shape;         // logdet(Omega_R)
  QCMultipliers multipliers;
  double tau1 = 0.0, tau2 = 0.0;
  double solve_seconds = 0.0;
};

// Ellipsoidal bound on the residual reach set { net(s,a) - target } over the
// two input regions, by the fixed-action semidefinite program.
// Throws CertificationError when the program is infeasible/unbounded and
// SolverError on numerical failure.
BoundResult bound_residual_fixed_action(const ReluNetwork& net, const Ellipsoid& state_region,
                                        const Ellipsoid& action_region, const Vec& target,
                                        const BoundOptions& options = {});

}  // namespace shiftguard

#pragma once

#include <cstdint>
#include <functional>

#include "shiftguard/linalg.hpp"
#include "shiftguard/relu_net.hpp"
#include "shiftguard/rng.hpp"

namespace shiftguard {

struct PsoConfig {
  int swarm_size = 20;
  double inertia = 0.729;
  double cognitive = 1.494;
  double social = 1.494;
  // budget: iteration count, or wall-clock seconds when > 0 (overrides iterations)
  int iterations = 40;
  double wall_clock_seconds = 0.0;
  Vec lower;
  Vec upper;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PsoResult {
  Vec best;
  double value = 0.0;
  long evaluations = 0;  // objective evaluations across iterations (initialization excluded)
  int iterations = 0;
};

using Objective = std::function<double(const Vec&)>;

// Global-best particle swarm with velocity reflection at the box bounds.
// Deterministic per seed; terminates exactly at the budget.
PsoResult pso_minimize(const Objective& objective, const PsoConfig& cfg);

// Per-step baseline: minimizes || target - net(s, a) || over the action box.
// `predict` maps (state, action) to the surrogate's next-state mean.
Vec pso_adapt_step(const Vec& state, const Vec& target,
                   const std::function<Vec(const Vec&, const Vec&)>& predict,
                   const PsoConfig& cfg);

}  // namespace shiftguard

#include "shiftguard/pso.hpp"

#include <chrono>

#include "shiftguard/errors.hpp"

namespace shiftguard {

void PsoConfig::validate() const {
  if (swarm_size < 2) throw DomainError("PsoConfig: swarm_size must be >= 2");
  if (inertia < 0.0 || cognitive < 0.0 || social < 0.0)
    throw DomainError("PsoConfig: weights must be nonnegative");
  if (iterations < 0 || wall_clock_seconds < 0.0)
    throw DomainError("PsoConfig: budget must be nonnegative");
  if (lower.size() != upper.size() || lower.size() == 0)
    throw DomainError("PsoConfig: bounds must be nonempty and consistent");
  for (int i = 0; i < lower.size(); ++i)
    if (!(lower[i] < upper[i])) throw DomainError("PsoConfig: lower must be below upper");
}

PsoResult pso_minimize(const Objective& objective, const PsoConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  int dim = static_cast<int>(cfg.lower.size());
  int swarm = cfg.swarm_size;

  std::vector<Vec> pos(swarm), vel(swarm), best_pos(swarm);
  std::vector<double> best_val(swarm);
  Vec global_best;
  double global_val = std::numeric_limits<double>::infinity();

  for (int i = 0; i < swarm; ++i) {
    pos[i] = Vec(dim);
    vel[i] = Vec(dim);
    for (int d = 0; d < dim; ++d) {
      double span = cfg.upper[d] - cfg.lower[d];
      pos[i][d] = rng.uniform(cfg.lower[d], cfg.upper[d]);
      vel[i][d] = rng.uniform(-span, span) * 0.1;
    }
    best_pos[i] = pos[i];
    best_val[i] = objective(pos[i]);
    if (best_val[i] < global_val) {
      global_val = best_val[i];
      global_best = pos[i];
    }
  }

  PsoResult result;
  auto started = std::chrono::steady_clock::now();
  auto out_of_budget = [&](int iter) {
    if (cfg.wall_clock_seconds > 0.0) {
      double elapsed =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      return elapsed >= cfg.wall_clock_seconds;
    }
    return iter >= cfg.iterations;
  };

  int iter = 0;
  while (!out_of_budget(iter)) {
    for (int i = 0; i < swarm; ++i) {
      for (int d = 0; d < dim; ++d) {
        double r1 = rng.uniform(), r2 = rng.uniform();
        vel[i][d] = cfg.inertia * vel[i][d] + cfg.cognitive * r1 * (best_pos[i][d] - pos[i][d]) +
                    cfg.social * r2 * (global_best[d] - pos[i][d]);
        pos[i][d] += vel[i][d];
        // reflect at the box
        if (pos[i][d] < cfg.lower[d]) {
          pos[i][d] = cfg.lower[d] + (cfg.lower[d] - pos[i][d]);
          vel[i][d] = -vel[i][d];
        }
        if (pos[i][d] > cfg.upper[d]) {
          pos[i][d] = cfg.upper[d] - (pos[i][d] - cfg.upper[d]);
          vel[i][d] = -vel[i][d];
        }
        pos[i][d] = std::clamp(pos[i][d], cfg.lower[d], cfg.upper[d]);
      }
      double val = objective(pos[i]);
      ++result.evaluations;
      if (val < best_val[i]) {
        best_val[i] = val;
        best_pos[i] = pos[i];
      }
      if (val < global_val) {
        global_val = val;
        global_best = pos[i];
      }
    }
    ++iter;
  }

  result.best = global_best;
  result.value = global_val;
  result.iterations = iter;
  return result;
}

Vec pso_adapt_step(const Vec& state, const Vec& target,
                   const std::function<Vec(const Vec&, const Vec&)>& predict,
                   const PsoConfig& cfg) {
  Objective objective = [&](const Vec& a) { return (target - predict(state, a)).norm(); };
  return pso_minimize(objective, cfg).best;
}

}  // namespace shiftguard

#pragma once

#include <cstdint>
#include <vector>

#include "dpd/optimizers.hpp"
#include "dpd/trace.hpp"

namespace dpd {

struct BoxBounds {
  Vec lo, hi;

  static BoxBounds cube(int dim, double half_width);
  void validate() const;
  void clip(Vec& x) const;
};

struct StartResult {
  Vec start;
  Vec final;
  double f_final = 0.0;
  double metric_final = 0.0;  // train_metric of f_final (NMSE for DPD runs)
  StopStatus status = StopStatus::kBudget;
};

/// Independent local descents (L-BFGS with the given history) from uniform
/// random starts in `box`; results sorted by final objective, best first.
std::vector<StartResult> multistart(const Objective& obj, int n_starts,
                                    const BoxBounds& box, std::uint64_t seed,
                                    const OptimizerBudget& inner_budget,
                                    int history = 100);

struct SaParams {
  double t0 = 6.0;     // initial temperature
  int k_cg = 50;       // local descent burst length (0 = pure jump search)
  int k_jump = 100;    // forced jump period
  double d_jump = 1.0; // jump amplitude
};

/// Simulated annealing: CG(PRP+) burst from the current point; on
/// non-improvement jump to record + d_jump * uniform[-1,1]^n; otherwise a
/// cooling test with probability (1/k)^(1/t0) (and every k_jump-th
/// iteration unconditionally) still jumps. Iterates clipped to box; the
/// record never worsens. Trace: f = record value, aux = jump probability.
RunTrace simulated_annealing(const Objective& obj, Vec& x,
                             const OptimizerBudget& budget, SaParams params,
                             const BoxBounds& box, std::uint64_t seed,
                             long record_interval = 1);

struct DeParams {
  int m_pop = 20;
  int k_cg = 50;
  double f = 0.5;        // mutation amplitude
  double cr = 0.1;       // probability of keeping an individual unmutated
  double eps_bio = 1e-6; // stop threshold on mean neighbor distance
};

/// Differential evolution with elitist selection (m_pop best of old
/// population plus descended offspring) and an optional CG(PRP+) burst per
/// offspring. Stops on the time/iteration budget or when the biodiversity
/// measure mean_l ||p_{l+1} - p_l|| drops to eps_bio. Trace: f = record
/// value, aux = biodiversity.
RunTrace differential_evolution(const Objective& obj, Vec& x,
                                const OptimizerBudget& budget, DeParams params,
                                const BoxBounds& box, std::uint64_t seed,
                                long record_interval = 1);

}  // namespace dpd

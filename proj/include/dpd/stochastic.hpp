#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dpd/residual_system.hpp"
#include "dpd/trace.hpp"

namespace dpd {

/// Epoch-shuffled minibatch index source: every epoch is one seeded
/// permutation of [0, m) handed out in sequential slices, so each sample is
/// visited exactly once per epoch.
class BatchSampler {
 public:
  BatchSampler(int m, int batch_size, std::uint64_t seed);

  std::vector<int> next();
  int batch_size() const { return b_; }

 private:
  int m_, b_;
  std::mt19937_64 rng_;
  std::vector<int> perm_;
  std::size_t pos_;
};

enum class StochMethod { kSgd, kAdam, kAdagrad, kAdadelta, kAdamax, kRmsprop };

StochMethod stoch_method_from_name(const std::string& name);
std::string stoch_method_name(StochMethod m);

/// Per-method accumulators. Second-moment style accumulators stay
/// nonnegative by construction.
struct AdaptiveState {
  Vec m1, m2;
  long step = 0;
};

AdaptiveState make_adaptive_state(int dim);

/// One update: returns the parameter increment for gradient g at step size
/// eta and advances the state. Constants: Adam/Adamax beta1 = 0.9,
/// beta2 = 0.999 (Adam), eps = 1e-8; RMSprop decay 0.9; Adadelta rho = 0.95
/// (eta scales the step).
Vec adaptive_step(AdaptiveState& st, const Vec& g, StochMethod method,
                  double eta);

/// Minibatch descent loop; stops on budget, gradient tolerance of the batch
/// gradient never applies (full-gradient checks are off-policy), or
/// divergence (loss above 1e6 x initial).
RunTrace stochastic_run(const ResidualSystem& sys, Vec& x,
                        const OptimizerBudget& budget, StochMethod method,
                        int batch_size, double eta, std::uint64_t seed,
                        const ResidualSystem* val = nullptr,
                        long record_interval = 1);

}  // namespace dpd

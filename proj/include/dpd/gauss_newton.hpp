#pragma once

#include <cstdint>
#include <random>

#include "dpd/residual_system.hpp"
#include "dpd/trace.hpp"

namespace dpd {

/// Full Jacobian transpose of the residual map: n x 2m matrix whose column
/// j is the gradient of residual j.
Mat full_jacobian_t(const ResidualSystem& sys, const Vec& x);

/// One proximal Gauss--Newton step: the argmin of
///   (L/2)||y - x||^2 + (1/(2 f1)) [f1^2 + ||F + J(y - x)||^2],
/// computed from (J^T J / f1 + L I) d = -J^T F / f1. Returns x when f1 == 0.
Vec tsm_step(const ResidualSystem& sys, const Vec& x, double l);

RunTrace tsm_run(const ResidualSystem& sys, Vec& x, const OptimizerBudget& budget,
                 double l, const ResidualSystem* val = nullptr,
                 long record_interval = 1);

/// One non-smooth Gauss--Newton step: the argmin of
///   (L/2)||y - x||^2 + ||F + J(y - x)||.
/// At the optimum d solves (L sigma I + J^T J) d = -J^T F with
/// sigma = ||F + J d||; sigma is found by bisection on (0, ||F||] in 60
/// iterations. A collapsed bracket returns the 1e-12-regularized
/// least-squares step.
Vec nsgn_step(const ResidualSystem& sys, const Vec& x, double l);

RunTrace nsgn_run(const ResidualSystem& sys, Vec& x, const OptimizerBudget& budget,
                  double l, const ResidualSystem* val = nullptr,
                  long record_interval = 1);

/// Stochastic-squares iteration state. fhat1 = ||F|| / sqrt(2m) is the
/// scale-free objective the acceptance test controls.
struct SsmState {
  Vec x;
  double l = 1.0;        // current regularization constant L_k
  int p = 0;             // sampled residual-gradient count per step
  std::mt19937_64 rng;
  int last_i = -1;       // doublings used by the last accepted step
  bool overflow = false; // i-search cap reached
  double fhat1 = 0.0;    // objective at x
};

SsmState ssm_make_state(const ResidualSystem& sys, Vec x0, int p, double l0,
                        std::uint64_t seed);

/// One stochastic-squares step: sample p residual gradients G, then find the
/// smallest i >= 0 whose trial point
///   T_i = x - B_i^{-1} grad_fhat1,  B_i = (1/(p fhat1)) G G^T + 2^i L_k I
/// passes fhat1(T_i) <= psi_i(T_i); accept it and set L_{k+1} = 2^{i-1} L_k.
/// The solve goes through the Sherman--Morrison--Woodbury path when p <= n
/// and through the bidiagonalization path when p > n; p == 0 degenerates to
/// a gradient step of size 1/(2^i L_k). The i search is capped at 60
/// doublings (state.overflow set on failure).
SsmState ssm_step(const ResidualSystem& sys, SsmState state);

RunTrace ssm_run(const ResidualSystem& sys, Vec& x, const OptimizerBudget& budget,
                 int p, double l0, std::uint64_t seed,
                 const ResidualSystem* val = nullptr, long record_interval = 1);

/// Levenberg--Marquardt with damping matrix variant 1 = I,
/// 2 = diag(J^T J), 3 = sqrt(diag(J^T J)); alpha = 0.5, beta = 10,
/// lambda0 = 0.1, lambda clamped to [1e-12, 1e12] (upper clamp stalls).
RunTrace lm_run(const ResidualSystem& sys, Vec& x, const OptimizerBudget& budget,
                int variant, const ResidualSystem* val = nullptr,
                long record_interval = 1);

}  // namespace dpd

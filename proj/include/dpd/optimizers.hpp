#pragma once

#include <functional>

#include "dpd/model.hpp"
#include "dpd/residual_system.hpp"
#include "dpd/trace.hpp"

namespace dpd {

/// Minimal smooth-objective contract the local optimizers run against.
/// value_and_grad is required; value defaults to a value_and_grad call.
/// The metric hooks feed the trace columns: train_metric maps an objective
/// value to the reported train figure (identity by default), val_metric
/// evaluates the held-out figure at a point (reports train when absent).
struct Objective {
  int dim = 0;
  std::function<double(const Vec&, Vec&)> value_and_grad;
  std::function<double(const Vec&)> value;
  std::function<double(double)> train_metric;
  std::function<double(const Vec&)> val_metric;

  double eval(const Vec& x) const;
  double eval(const Vec& x, Vec& grad) const;
  double train_of(double f) const;
  double val_at(const Vec& x, double train) const;
};

/// Loss objective of a model/dataset pair; trace columns carry train NMSE
/// (derived from the loss) and, when `val` is given, validation NMSE.
Objective make_objective(const ResidualSystem& sys,
                         const ResidualSystem* val = nullptr);

struct LinesearchOptions {
  double alpha_init = 1.0;
  int max_evals = 10;
};

/// Steepest descent with the quadratic-interpolation line search.
RunTrace sdm_run(const Objective& obj, Vec& x, const OptimizerBudget& budget,
                 LinesearchOptions ls = {}, long record_interval = 1);

/// Polyak step length from a lower bound f_star on the optimum:
/// v1 (f - f*)/||g||^2, v2 doubles it.
double polyak_step(double f, double grad_norm2, double f_star, int variant);

/// Polyak's method with the listing's backtracking (step divided by 3 until
/// descent, floor 1e-12 stops the run).
RunTrace polyak_run(const Objective& obj, Vec& x, const OptimizerBudget& budget,
                    double f_star, int variant, long record_interval = 1);

/// Barzilai--Borwein step: v1 <s,y>/<y,y>, v2 <s,s>/<s,y>; nonpositive or
/// undefined values fall back to 1e-4.
double bb_step(const Vec& s, const Vec& y, int variant);

/// BB method, non-monotone (no line search after the first step).
RunTrace bb_run(const Objective& obj, Vec& x, const OptimizerBudget& budget,
                int variant, long record_interval = 1);

/// Coordinate-masked descent: only coordinates with |g_i| above
/// d_level * max|g| move; unit step backtracked by factor 3 until descent.
RunTrace raider_run(const Objective& obj, Vec& x, const OptimizerBudget& budget,
                    double d_level, long record_interval = 1);

enum class CgVariant { kHS, kFR, kPRP, kPRPPlus, kCD, kLS, kDY, kNesterov };

CgVariant cg_variant_from_name(const std::string& name);
std::string cg_variant_name(CgVariant v);

/// Nonlinear conjugate gradients. k_rs == 0 picks the default restart
/// period min(20n, 1000); restarts also fire when a beta denominator
/// vanishes or the direction loses descent.
RunTrace cg_run(const Objective& obj, Vec& x, const OptimizerBudget& budget,
                CgVariant variant, long k_rs = 0, LinesearchOptions ls = {},
                long record_interval = 1);

enum class QuasiNewtonRule { kBfgs, kDfp };

/// Dense inverse-Hessian quasi-Newton (n <= 4000); H resets to I every k_rs
/// iterations (0 = never), updates with <s,y> <= eps are skipped.
/// h_out, when given, receives the final inverse-Hessian estimate.
RunTrace bfgs_dfp_run(const Objective& obj, Vec& x, const OptimizerBudget& budget,
                      QuasiNewtonRule rule, long k_rs = 0,
                      LinesearchOptions ls = {}, long record_interval = 1,
                      Mat* h_out = nullptr);

/// Limited-memory BFGS, two-loop recursion with gamma scaling of the
/// seed matrix; pairs with |<s,y>| <= 7e-16 are rejected.
RunTrace lbfgs_run(const Objective& obj, Vec& x, const OptimizerBudget& budget,
                   int history, LinesearchOptions ls = {},
                   long record_interval = 1);

}  // namespace dpd

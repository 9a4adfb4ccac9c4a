#pragma once

#include <functional>

namespace dpd {

struct LinesearchResult {
  double alpha = 0.0;    // 0 means no descent step was found
  double f_alpha = 0.0;  // phi(alpha); phi(0) when alpha == 0
  int evals = 0;
};

/// Approximate one-dimensional minimizer of phi along a descent direction.
///
/// Starting from alpha_init the step is halved until phi(alpha) < phi(0),
/// then doubled while the value keeps decreasing so the minimum is
/// bracketed; a final parabola through the bracket refines the step, with
/// bisection as the safeguard when the fit is degenerate or leaves the
/// bracket. Every phi call counts against max_evals; on budget exhaustion
/// the best point seen so far is returned. alpha == 0 signals failure
/// (no step with phi(alpha) < phi(0) found).
LinesearchResult quad_interp_linesearch(const std::function<double(double)>& phi,
                                        double phi0, double alpha_init = 1.0,
                                        int max_evals = 10);

}  // namespace dpd

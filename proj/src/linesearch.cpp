#include "dpd/linesearch.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace dpd {

LinesearchResult quad_interp_linesearch(const std::function<double(double)>& phi,
                                        double phi0, double alpha_init,
                                        int max_evals) {
  if (!(alpha_init > 0.0)) throw std::invalid_argument("linesearch: alpha_init <= 0");
  if (max_evals < 1) throw std::invalid_argument("linesearch: max_evals < 1");

  LinesearchResult best{0.0, phi0, 0};
  auto eval = [&](double a) {
    double v = phi(a);
    ++best.evals;
    if (std::isfinite(v) && v < best.f_alpha) {
      best.alpha = a;
      best.f_alpha = v;
    }
    return v;
  };

  // Shrink until the step descends.
  double a1 = alpha_init;
  double f1 = eval(a1);
  while (!(std::isfinite(f1) && f1 < phi0)) {
    if (best.evals >= max_evals) return best;
    a1 *= 0.5;
    f1 = eval(a1);
  }

  // Grow until the value turns back up, bracketing the minimum.
  double a0 = 0.0, f0 = phi0;
  double a2 = 2.0 * a1;
  double f2 = std::numeric_limits<double>::infinity();
  bool bracketed = false;
  while (best.evals < max_evals) {
    f2 = eval(a2);
    if (!std::isfinite(f2) || f2 >= f1) {
      bracketed = true;
      break;
    }
    a0 = a1;
    f0 = f1;
    a1 = a2;
    f1 = f2;
    a2 *= 2.0;
  }
  if (!bracketed || best.evals >= max_evals) return best;

  // Parabola through (a0,f0), (a1,f1), (a2,f2); fall back to bisection of
  // the larger half when the fit is degenerate or escapes the bracket.
  const double d01 = (f1 - f0) / (a1 - a0);
  const double d12 = (f2 - f1) / (a2 - a1);
  const double curv = (d12 - d01) / (a2 - a0);
  double a_try;
  if (curv > 0.0) {
    a_try = 0.5 * (a0 + a1 - d01 / curv);
  } else {
    a_try = std::numeric_limits<double>::quiet_NaN();
  }
  if (!(a_try > a0 && a_try < a2) || !std::isfinite(a_try)) {
    a_try = (a1 - a0 > a2 - a1) ? 0.5 * (a0 + a1) : 0.5 * (a1 + a2);
  }
  eval(a_try);
  return best;
}

}  // namespace dpd

#include "dpd/optimizers.hpp"

#include <cmath>
#include <deque>
#include <stdexcept>

#include "dpd/linesearch.hpp"

namespace dpd {

namespace {
constexpr double kEpsFlt = 7e-16;
constexpr double kAlphaMin = 1e-12;
constexpr double kBacktrack = 3.0;
}  // namespace

double Objective::eval(const Vec& x) const {
  if (value) return value(x);
  Vec g(x.size());
  return value_and_grad(x, g);
}

double Objective::eval(const Vec& x, Vec& grad) const {
  return value_and_grad(x, grad);
}

double Objective::train_of(double f) const {
  return train_metric ? train_metric(f) : f;
}

double Objective::val_at(const Vec& x, double train) const {
  return val_metric ? val_metric(x) : train;
}

Objective make_objective(const ResidualSystem& sys, const ResidualSystem* val) {
  Objective obj;
  obj.dim = sys.param_dim();
  obj.value = [&sys](const Vec& x) { return sys.loss(x); };
  obj.value_and_grad = [&sys](const Vec& x, Vec& g) {
    return sys.loss_and_grad(x, g);
  };
  obj.train_metric = [&sys](double f) { return sys.nmse_from_loss(f); };
  if (val) obj.val_metric = [val](const Vec& x) { return val->nmse(x); };
  return obj;
}

namespace {

/// Shared loop plumbing: trace rows (metrics computed off the clock) and
/// the budget/tolerance stop tests.
struct Driver {
  const Objective& obj;
  Reporter rep;
  RunTrace tr;
  long interval;

  Driver(const Objective& o, const OptimizerBudget& b, long record_interval,
         std::string method)
      : obj(o), rep(b, 1), interval(record_interval) {
    if (interval < 1) throw std::invalid_argument("record_interval < 1");
    tr.method = std::move(method);
  }

  void record(long iter, const Vec& x, double f, double aux, bool force = false) {
    if (!force && iter % interval != 0) return;
    rep.clock().pause();
    const double train = obj.train_of(f);
    const double val = obj.val_at(x, train);
    rep.clock().resume();
    rep.record(tr, iter, f, train, val, aux, true);
  }

  /// Budget and tolerance tests, checked at the top of each iteration.
  bool done(long iter, double f, double grad_norm) {
    if (grad_norm <= rep.budget().grad_tol) {
      tr.status = StopStatus::kConverged;
      return true;
    }
    if (rep.target_reached(f)) {
      tr.status = StopStatus::kConverged;
      return true;
    }
    if (rep.iterations_exhausted(iter) || rep.time_exhausted()) {
      tr.status = StopStatus::kBudget;
      return true;
    }
    return false;
  }

  RunTrace finish(long iter, const Vec& x, double f, double aux) {
    if (tr.rows.empty() || tr.rows.back().iter != iter) {
      record(iter, x, f, aux, true);
    }
    return std::move(tr);
  }
};

LinesearchResult search_along(const Objective& obj, const Vec& x, const Vec& d,
                              double f0, const LinesearchOptions& ls) {
  auto phi = [&](double a) { return obj.eval(x + a * d); };
  return quad_interp_linesearch(phi, f0, ls.alpha_init, ls.max_evals);
}

}  // namespace

RunTrace sdm_run(const Objective& obj, Vec& x, const OptimizerBudget& budget,
                 LinesearchOptions ls, long record_interval) {
  Driver dr(obj, budget, record_interval, "sdm");
  Vec g(x.size());
  double f = obj.eval(x, g);
  dr.record(0, x, f, 0.0, true);
  long iter = 0;
  int stalls = 0;
  while (!dr.done(iter, f, g.norm())) {
    const Vec d = -g;
    const LinesearchResult r = search_along(obj, x, d, f, ls);
    ++iter;
    if (r.alpha == 0.0) {
      if (++stalls >= 2) {
        dr.tr.status = StopStatus::kStalled;
        break;
      }
      continue;
    }
    stalls = 0;
    x += r.alpha * d;
    f = obj.eval(x, g);
    dr.record(iter, x, f, r.alpha);
  }
  return dr.finish(iter, x, f, 0.0);
}

double polyak_step(double f, double grad_norm2, double f_star, int variant) {
  if (variant != 1 && variant != 2) throw std::invalid_argument("polyak: variant");
  if (!(grad_norm2 > 0.0)) throw std::invalid_argument("polyak: zero gradient");
  if (f < f_star) throw std::invalid_argument("polyak: f below lower bound");
  const double a = (f - f_star) / grad_norm2;
  return variant == 1 ? a : 2.0 * a;
}

RunTrace polyak_run(const Objective& obj, Vec& x, const OptimizerBudget& budget,
                    double f_star, int variant, long record_interval) {
  Driver dr(obj, budget, record_interval, variant == 1 ? "polyak_v1" : "polyak_v2");
  Vec g(x.size());
  double f = obj.eval(x, g);
  dr.record(0, x, f, 0.0, true);
  long iter = 0;
  while (!dr.done(iter, f, g.norm())) {
    const double gn2 = g.squaredNorm();
    if (f <= f_star || gn2 == 0.0) {
      dr.tr.status = StopStatus::kConverged;
      break;
    }
    double alpha = polyak_step(f, gn2, f_star, variant);
    ++iter;
    // Backtrack until descent; the floor ends the run.
    bool accepted = false;
    while (alpha >= kAlphaMin) {
      const double f_try = obj.eval(x - alpha * g);
      if (std::isfinite(f_try) && f_try < f) {
        x -= alpha * g;
        f = obj.eval(x, g);
        dr.record(iter, x, f, alpha);
        accepted = true;
        break;
      }
      alpha /= kBacktrack;
    }
    if (!accepted) {
      dr.tr.status = StopStatus::kStalled;
      break;
    }
  }
  return dr.finish(iter, x, f, 0.0);
}

double bb_step(const Vec& s, const Vec& y, int variant) {
  if (variant != 1 && variant != 2) throw std::invalid_argument("bb: variant");
  const double sy = s.dot(y);
  double a;
  if (variant == 1) {
    const double yy = y.squaredNorm();
    a = (yy > 0.0) ? sy / yy : 0.0;
  } else {
    a = (sy != 0.0) ? s.squaredNorm() / sy : 0.0;
  }
  if (!(a > 0.0) || !std::isfinite(a)) a = 1e-4;
  return a;
}

RunTrace bb_run(const Objective& obj, Vec& x, const OptimizerBudget& budget,
                int variant, long record_interval) {
  Driver dr(obj, budget, record_interval, variant == 1 ? "bb_v1" : "bb_v2");
  Vec g(x.size());
  double f = obj.eval(x, g);
  const double f0 = f;
  dr.record(0, x, f, 0.0, true);
  long iter = 0;
  Vec x_prev = x, g_prev = g;
  // First step: line search along steepest descent to seed (s, y).
  {
    if (dr.done(iter, f, g.norm())) return dr.finish(iter, x, f, 0.0);
    const LinesearchResult r = search_along(obj, x, -g, f, {});
    ++iter;
    if (r.alpha == 0.0) {
      dr.tr.status = StopStatus::kStalled;
      return dr.finish(iter, x, f, 0.0);
    }
    x -= r.alpha * g;
    f = obj.eval(x, g);
    dr.record(iter, x, f, r.alpha);
  }
  while (!dr.done(iter, f, g.norm())) {
    const Vec s = x - x_prev;
    const Vec y = g - g_prev;
    const double alpha = bb_step(s, y, variant);
    x_prev = x;
    g_prev = g;
    x -= alpha * g;
    f = obj.eval(x, g);
    ++iter;
    if (!std::isfinite(f) || f > 1e6 * std::max(f0, 1.0)) {
      dr.tr.status = StopStatus::kDiverged;
      break;
    }
    dr.record(iter, x, f, alpha);
  }
  return dr.finish(iter, x, f, 0.0);
}

RunTrace raider_run(const Objective& obj, Vec& x, const OptimizerBudget& budget,
                    double d_level, long record_interval) {
  if (d_level < 1e-6 || d_level > 1.0) {
    throw std::invalid_argument("raider: d_level out of [1e-6, 1]");
  }
  Driver dr(obj, budget, record_interval, "raider");
  Vec g(x.size());
  double f = obj.eval(x, g);
  dr.record(0, x, f, 0.0, true);
  long iter = 0;
  while (!dr.done(iter, f, g.norm())) {
    const double gmax = g.cwiseAbs().maxCoeff();
    Vec d = Vec::Zero(x.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      if (std::abs(g[i]) >= d_level * gmax) d[i] = -g[i];
    }
    ++iter;
    double alpha = 1.0;
    bool accepted = false;
    while (alpha >= kAlphaMin) {
      const double f_try = obj.eval(x + alpha * d);
      if (std::isfinite(f_try) && f_try < f) {
        x += alpha * d;
        f = obj.eval(x, g);
        dr.record(iter, x, f, alpha);
        accepted = true;
        break;
      }
      alpha /= kBacktrack;
    }
    if (!accepted) {
      dr.tr.status = StopStatus::kStalled;
      break;
    }
  }
  return dr.finish(iter, x, f, 0.0);
}

CgVariant cg_variant_from_name(const std::string& name) {
  if (name == "hs") return CgVariant::kHS;
  if (name == "fr") return CgVariant::kFR;
  if (name == "prp") return CgVariant::kPRP;
  if (name == "prp+") return CgVariant::kPRPPlus;
  if (name == "cd") return CgVariant::kCD;
  if (name == "ls") return CgVariant::kLS;
  if (name == "dy") return CgVariant::kDY;
  if (name == "nesterov") return CgVariant::kNesterov;
  throw std::invalid_argument("unknown cg variant: " + name);
}

std::string cg_variant_name(CgVariant v) {
  switch (v) {
    case CgVariant::kHS: return "hs";
    case CgVariant::kFR: return "fr";
    case CgVariant::kPRP: return "prp";
    case CgVariant::kPRPPlus: return "prp+";
    case CgVariant::kCD: return "cd";
    case CgVariant::kLS: return "ls";
    case CgVariant::kDY: return "dy";
    case CgVariant::kNesterov: return "nesterov";
  }
  return "?";
}

namespace {

/// beta for the next direction d+ = -g+ + beta d; zero on a vanishing
/// denominator (caller restarts).
double cg_beta(CgVariant v, const Vec& g, const Vec& g_next, const Vec& d) {
  const Vec y = g_next - g;
  double num = 0.0, den = 0.0;
  switch (v) {
    case CgVariant::kHS:
      num = g_next.dot(y);
      den = d.dot(y);
      break;
    case CgVariant::kFR:
      num = g_next.squaredNorm();
      den = g.squaredNorm();
      break;
    case CgVariant::kPRP:
    case CgVariant::kPRPPlus:
      num = g_next.dot(y);
      den = g.squaredNorm();
      break;
    case CgVariant::kCD:
      num = g_next.squaredNorm();
      den = -d.dot(g);
      break;
    case CgVariant::kLS:
      num = g_next.dot(y);
      den = -d.dot(g);
      break;
    case CgVariant::kDY:
      num = g_next.squaredNorm();
      den = d.dot(y);
      break;
    case CgVariant::kNesterov:
      return 0.0;
  }
  if (std::abs(den) <= kEpsFlt) return 0.0;
  double beta = num / den;
  if (v == CgVariant::kPRPPlus) beta = std::max(0.0, beta);
  return beta;
}

RunTrace cg_nesterov_run(const Objective& obj, Vec& x,
                         const OptimizerBudget& budget, LinesearchOptions ls,
                         long record_interval) {
  Driver dr(obj, budget, record_interval, "cg_nesterov");
  Vec g(x.size());
  double f = obj.eval(x, g);
  dr.record(0, x, f, 0.0, true);
  long iter = 0;
  Vec y_prev = x, y_prev2 = x;  // y^{k-1}, y^{k-2}
  int stalls = 0;
  while (!dr.done(iter, f, g.norm())) {
    ++iter;
    // Ravine step along y^{k-2} - x^k, then a gradient step from y^k.
    Vec y = x;
    double fy = f;
    const Vec dir1 = y_prev2 - x;
    if (dir1.norm() > 0.0) {
      const LinesearchResult r1 = search_along(obj, x, dir1, f, ls);
      if (r1.alpha > 0.0) {
        y = x + r1.alpha * dir1;
        fy = r1.f_alpha;
      }
    }
    Vec gy(x.size());
    fy = obj.eval(y, gy);
    const LinesearchResult r2 = search_along(obj, y, -gy, fy, ls);
    if (r2.alpha == 0.0 && fy >= f) {
      if (++stalls >= 2) {
        dr.tr.status = StopStatus::kStalled;
        break;
      }
    } else {
      stalls = 0;
    }
    x = y - r2.alpha * gy;
    f = obj.eval(x, g);
    y_prev2 = y_prev;
    y_prev = y;
    dr.record(iter, x, f, r2.alpha);
  }
  return dr.finish(iter, x, f, 0.0);
}

}  // namespace

RunTrace cg_run(const Objective& obj, Vec& x, const OptimizerBudget& budget,
                CgVariant variant, long k_rs, LinesearchOptions ls,
                long record_interval) {
  if (variant == CgVariant::kNesterov) {
    return cg_nesterov_run(obj, x, budget, ls, record_interval);
  }
  if (k_rs < 0) throw std::invalid_argument("cg: k_rs < 0");
  if (k_rs == 0) k_rs = std::min<long>(20 * std::max(1, obj.dim), 1000);

  Driver dr(obj, budget, record_interval, "cg_" + cg_variant_name(variant));
  Vec g(x.size());
  double f = obj.eval(x, g);
  dr.record(0, x, f, 0.0, true);
  Vec d = -g;
  long iter = 0;
  int stalls = 0;
  while (!dr.done(iter, f, g.norm())) {
    const LinesearchResult r = search_along(obj, x, d, f, ls);
    ++iter;
    if (r.alpha == 0.0) {
      if (++stalls >= 2) {
        dr.tr.status = StopStatus::kStalled;
        break;
      }
      d = -g;  // restart before retrying
      continue;
    }
    stalls = 0;
    x += r.alpha * d;
    Vec g_next(x.size());
    f = obj.eval(x, g_next);
    if (iter % k_rs == 0) {
      d = -g_next;
    } else {
      const double beta = cg_beta(variant, g, g_next, d);
      d = -g_next + beta * d;
      if (d.dot(g_next) >= 0.0) d = -g_next;
    }
    g = g_next;
    dr.record(iter, x, f, r.alpha);
  }
  return dr.finish(iter, x, f, 0.0);
}

RunTrace bfgs_dfp_run(const Objective& obj, Vec& x, const OptimizerBudget& budget,
                      QuasiNewtonRule rule, long k_rs, LinesearchOptions ls,
                      long record_interval, Mat* h_out) {
  const Eigen::Index n = x.size();
  if (n > 4000) throw std::invalid_argument("bfgs: n > 4000, use lbfgs");
  Driver dr(obj, budget, record_interval,
            rule == QuasiNewtonRule::kBfgs ? "bfgs" : "dfp");
  Mat h = Mat::Identity(n, n);
  Vec g(n);
  double f = obj.eval(x, g);
  dr.record(0, x, f, 0.0, true);
  long iter = 0;
  int stalls = 0;
  while (!dr.done(iter, f, g.norm())) {
    Vec d = -(h * g);
    if (d.dot(g) >= 0.0) {
      h = Mat::Identity(n, n);
      d = -g;
    }
    const LinesearchResult r = search_along(obj, x, d, f, ls);
    ++iter;
    if (r.alpha == 0.0) {
      if (++stalls >= 2) {
        dr.tr.status = StopStatus::kStalled;
        break;
      }
      h = Mat::Identity(n, n);
      continue;
    }
    stalls = 0;
    const Vec s = r.alpha * d;
    x += s;
    Vec g_next(n);
    f = obj.eval(x, g_next);
    const Vec y = g_next - g;
    g = g_next;
    const double sy = s.dot(y);
    if (k_rs > 0 && iter % k_rs == 0) {
      h = Mat::Identity(n, n);
    } else if (sy > kEpsFlt) {
      if (rule == QuasiNewtonRule::kBfgs) {
        const double rho = 1.0 / sy;
        const Vec hy = h * y;
        // (I - rho s y^T) H (I - rho y s^T) + rho s s^T
        h -= rho * (s * hy.transpose() + hy * s.transpose());
        h += rho * (rho * y.dot(hy) + 1.0) * (s * s.transpose());
      } else {
        const Vec hy = h * y;
        const double yhy = y.dot(hy);
        if (yhy > kEpsFlt) h -= (hy * hy.transpose()) / yhy;
        h += (s * s.transpose()) / sy;
      }
      h = 0.5 * (h + h.transpose()).eval();
    }
    dr.record(iter, x, f, r.alpha);
  }
  if (h_out) *h_out = h;
  return dr.finish(iter, x, f, 0.0);
}

RunTrace lbfgs_run(const Objective& obj, Vec& x, const OptimizerBudget& budget,
                   int history, LinesearchOptions ls, long record_interval) {
  if (history < 1) throw std::invalid_argument("lbfgs: history < 1");
  Driver dr(obj, budget, record_interval, "lbfgs");
  Vec g(x.size());
  double f = obj.eval(x, g);
  dr.record(0, x, f, 0.0, true);
  std::deque<std::pair<Vec, Vec>> pairs;  // (s, y), newest at back
  long iter = 0;
  int stalls = 0;
  while (!dr.done(iter, f, g.norm())) {
    // Two-loop recursion with gamma scaling of the seed matrix.
    Vec q = g;
    std::vector<double> alpha_hist(pairs.size());
    for (std::size_t j = pairs.size(); j-- > 0;) {
      const auto& [s, y] = pairs[j];
      const double rho = 1.0 / s.dot(y);
      alpha_hist[j] = rho * s.dot(q);
      q -= alpha_hist[j] * y;
    }
    if (!pairs.empty()) {
      const auto& [s, y] = pairs.back();
      q *= s.dot(y) / y.squaredNorm();
    }
    for (std::size_t j = 0; j < pairs.size(); ++j) {
      const auto& [s, y] = pairs[j];
      const double rho = 1.0 / s.dot(y);
      const double beta = rho * y.dot(q);
      q += (alpha_hist[j] - beta) * s;
    }
    Vec d = -q;
    if (d.dot(g) >= 0.0) d = -g;
    const LinesearchResult r = search_along(obj, x, d, f, ls);
    ++iter;
    if (r.alpha == 0.0) {
      if (++stalls >= 2) {
        dr.tr.status = StopStatus::kStalled;
        break;
      }
      pairs.clear();
      continue;
    }
    stalls = 0;
    const Vec s = r.alpha * d;
    x += s;
    Vec g_next(x.size());
    f = obj.eval(x, g_next);
    const Vec y = g_next - g;
    g = g_next;
    if (std::abs(s.dot(y)) > kEpsFlt && s.dot(y) > 0.0) {
      pairs.emplace_back(s, y);
      if (static_cast<int>(pairs.size()) > history) pairs.pop_front();
    }
    dr.record(iter, x, f, r.alpha);
  }
  return dr.finish(iter, x, f, 0.0);
}

}  // namespace dpd

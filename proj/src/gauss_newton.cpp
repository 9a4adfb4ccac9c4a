#include "dpd/gauss_newton.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "dpd/linalg.hpp"

namespace dpd {

namespace {
constexpr double kLambdaMin = 1e-12;
constexpr double kLambdaMax = 1e12;
constexpr int kDoublingCap = 60;

/// Trace bookkeeping shared by the Gauss--Newton drivers; the f column
/// carries the per-sample loss f2/m, aux the damping constant.
struct GnDriver {
  const ResidualSystem& sys;
  const ResidualSystem* val;
  Reporter rep;
  RunTrace tr;
  long interval;

  GnDriver(const ResidualSystem& s, const ResidualSystem* v,
           const OptimizerBudget& b, long record_interval, std::string method)
      : sys(s), val(v), rep(b, 1), interval(record_interval) {
    if (interval < 1) throw std::invalid_argument("record_interval < 1");
    tr.method = std::move(method);
  }

  void record(long iter, const Vec& x, double loss, double aux,
              bool force = false) {
    if (!force && iter % interval != 0) return;
    rep.clock().pause();
    const double train = sys.nmse_from_loss(loss);
    const double v = val ? val->nmse(x) : train;
    rep.clock().resume();
    rep.record(tr, iter, loss, train, v, aux, true);
  }

  bool done(long iter, double loss, double grad_norm) {
    if (grad_norm <= rep.budget().grad_tol) {
      tr.status = StopStatus::kConverged;
      return true;
    }
    if (rep.target_reached(loss)) {
      tr.status = StopStatus::kConverged;
      return true;
    }
    if (rep.iterations_exhausted(iter) || rep.time_exhausted()) {
      tr.status = StopStatus::kBudget;
      return true;
    }
    return false;
  }

  RunTrace finish(long iter, const Vec& x, double loss, double aux) {
    if (tr.rows.empty() || tr.rows.back().iter != iter) {
      record(iter, x, loss, aux, true);
    }
    return std::move(tr);
  }
};

std::vector<int> all_indices(int count) {
  std::vector<int> idx(count);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

}  // namespace

Mat full_jacobian_t(const ResidualSystem& sys, const Vec& x) {
  return sys.jacobian_cols(x, all_indices(sys.residual_count()));
}

Vec tsm_step(const ResidualSystem& sys, const Vec& x, double l) {
  if (!(l > 0.0)) throw std::invalid_argument("tsm_step: l <= 0");
  const Vec f = sys.residuals(x);
  const double f1 = f.norm();
  if (f1 == 0.0) return x;
  const Mat g = full_jacobian_t(sys, x);
  Mat a = (g * g.transpose()) / f1;
  a.diagonal().array() += l;
  auto d = cholesky_solve(a, -(g * f) / f1);
  if (!d) throw std::runtime_error("tsm_step: normal matrix not PD");
  return x + *d;
}

RunTrace tsm_run(const ResidualSystem& sys, Vec& x, const OptimizerBudget& budget,
                 double l, const ResidualSystem* val, long record_interval) {
  GnDriver dr(sys, val, budget, record_interval, "tsm");
  const int m = sys.sample_count();
  Vec f = sys.residuals(x);
  double loss = f.squaredNorm() / m;
  long iter = 0;
  dr.record(0, x, loss, l, true);
  while (true) {
    const Mat g = full_jacobian_t(sys, x);
    const double grad_norm = (2.0 * (g * f)).norm();
    if (dr.done(iter, loss, grad_norm) || f.norm() == 0.0) break;
    const double f1 = f.norm();
    Mat a = (g * g.transpose()) / f1;
    a.diagonal().array() += l;
    auto d = cholesky_solve(a, -(g * f) / f1);
    if (!d) {
      dr.tr.status = StopStatus::kStalled;
      break;
    }
    x += *d;
    f = sys.residuals(x);
    loss = f.squaredNorm() / m;
    ++iter;
    dr.record(iter, x, loss, l);
  }
  return dr.finish(iter, x, loss, l);
}

namespace {

/// nsgn subproblem core shared by step and run; x is updated in place.
Vec nsgn_direction(const Mat& g, const Vec& f, double l) {
  const double fn = f.norm();
  const int n = static_cast<int>(g.rows());
  if (fn == 0.0) return Vec::Zero(n);
  Eigen::SelfAdjointEigenSolver<Mat> eig(g * g.transpose());
  const Vec lam = eig.eigenvalues().cwiseMax(0.0);
  const Vec c = eig.eigenvectors().transpose() * (g * f);
  const double f2 = f.squaredNorm();

  // ||F + J d(sigma)||, with d(sigma) = -(L sigma I + J^T J)^{-1} J^T F.
  auto resid_norm = [&](double sigma) {
    double r2 = f2;
    for (int i = 0; i < n; ++i) {
      const double den = lam[i] + l * sigma;
      r2 += -2.0 * c[i] * c[i] / den + lam[i] * c[i] * c[i] / (den * den);
    }
    return std::sqrt(std::max(0.0, r2));
  };

  double lo = 0.0, hi = fn;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == 0.0) break;
    if (resid_norm(mid) > mid) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  double sigma = 0.5 * (lo + hi);
  if (sigma < 1e-12 * fn) sigma = 1e-12 / l;  // collapsed: regularized LS step
  Vec d(n);
  for (int i = 0; i < n; ++i) d[i] = -c[i] / (lam[i] + l * sigma);
  return eig.eigenvectors() * d;
}

}  // namespace

Vec nsgn_step(const ResidualSystem& sys, const Vec& x, double l) {
  if (!(l > 0.0)) throw std::invalid_argument("nsgn_step: l <= 0");
  const Vec f = sys.residuals(x);
  if (f.norm() == 0.0) return x;
  const Mat g = full_jacobian_t(sys, x);
  return x + nsgn_direction(g, f, l);
}

RunTrace nsgn_run(const ResidualSystem& sys, Vec& x, const OptimizerBudget& budget,
                  double l, const ResidualSystem* val, long record_interval) {
  if (!(l > 0.0)) throw std::invalid_argument("nsgn_run: l <= 0");
  GnDriver dr(sys, val, budget, record_interval, "nsgn");
  const int m = sys.sample_count();
  Vec f = sys.residuals(x);
  double loss = f.squaredNorm() / m;
  long iter = 0;
  dr.record(0, x, loss, l, true);
  while (true) {
    const Mat g = full_jacobian_t(sys, x);
    const double grad_norm = (2.0 * (g * f)).norm();
    if (dr.done(iter, loss, grad_norm) || f.norm() == 0.0) break;
    const Vec d = nsgn_direction(g, f, l);
    if (d.norm() == 0.0) {
      dr.tr.status = StopStatus::kStalled;
      break;
    }
    x += d;
    f = sys.residuals(x);
    loss = f.squaredNorm() / m;
    ++iter;
    dr.record(iter, x, loss, l);
  }
  return dr.finish(iter, x, loss, l);
}

SsmState ssm_make_state(const ResidualSystem& sys, Vec x0, int p, double l0,
                        std::uint64_t seed) {
  if (p < 0 || p > sys.residual_count()) {
    throw std::invalid_argument("ssm: p out of [0, 2m]");
  }
  if (!(l0 > 0.0)) throw std::invalid_argument("ssm: l0 <= 0");
  SsmState st;
  st.x = std::move(x0);
  st.l = l0;
  st.p = p;
  st.rng.seed(seed);
  st.fhat1 = std::sqrt(sys.loss(st.x) / 2.0);  // f2/m_res = loss/2
  return st;
}

SsmState ssm_step(const ResidualSystem& sys, SsmState state) {
  const int n = sys.param_dim();
  const int p = state.p;
  Vec g_loss(n);
  const double loss = sys.loss_and_grad(state.x, g_loss);
  const double fhat1 = std::sqrt(loss / 2.0);
  state.fhat1 = fhat1;
  if (fhat1 == 0.0) {
    state.last_i = 0;
    return state;
  }
  // grad fhat1 = grad f2 / (2 m_res fhat1), with grad f2 = m * grad loss.
  const Vec grad = g_loss / (4.0 * fhat1);

  std::vector<int> pool = [&] {
    std::vector<int> all(sys.residual_count());
    std::iota(all.begin(), all.end(), 0);
    return all;
  }();
  std::vector<int> picked;
  picked.reserve(p);
  std::sample(pool.begin(), pool.end(), std::back_inserter(picked),
              static_cast<std::size_t>(p), state.rng);
  Mat g;
  BidiagFactorization bf;
  const bool big_batch = p > n;
  if (p > 0) {
    g = sys.jacobian_cols(state.x, picked);
    if (big_batch) bf = bidiagonalize(g);
  }

  const double c = (p > 0) ? 1.0 / (p * fhat1) : 0.0;
  for (int i = 0; i <= kDoublingCap; ++i) {
    const double s = std::ldexp(state.l, i);  // 2^i L_k
    Vec d;
    if (p == 0) {
      d = -grad / s;
    } else if (big_batch) {
      d = -bidiag_solve(bf, c, s, grad);
    } else {
      d = -smw_solve(g, c / s, s, grad);
    }
    const Vec trial = state.x + d;
    const double fhat1_trial = std::sqrt(sys.loss(trial) / 2.0);
    double psi = fhat1 + grad.dot(d) + 0.5 * s * d.squaredNorm();
    if (p > 0) psi += 0.5 * c * (g.transpose() * d).squaredNorm();
    if (fhat1_trial <= psi + 1e-14 * std::max(1.0, std::abs(psi))) {
      state.x = trial;
      state.fhat1 = fhat1_trial;
      state.last_i = i;
      state.l = std::max(kLambdaMin, std::ldexp(state.l, i - 1));
      return state;
    }
  }
  state.overflow = true;
  return state;
}

RunTrace ssm_run(const ResidualSystem& sys, Vec& x, const OptimizerBudget& budget,
                 int p, double l0, std::uint64_t seed, const ResidualSystem* val,
                 long record_interval) {
  GnDriver dr(sys, val, budget, record_interval, "ssm");
  SsmState st = ssm_make_state(sys, x, p, l0, seed);
  const int mres = sys.residual_count();
  const int m = sys.sample_count();
  double loss = st.fhat1 * st.fhat1 * mres / m;
  long iter = 0;
  dr.record(0, st.x, loss, st.l, true);
  Vec g_loss(sys.param_dim());
  while (true) {
    sys.loss_and_grad(st.x, g_loss);
    if (dr.done(iter, loss, g_loss.norm()) || st.fhat1 == 0.0) break;
    st = ssm_step(sys, std::move(st));
    if (st.overflow) {
      dr.tr.status = StopStatus::kLOverflow;
      break;
    }
    loss = st.fhat1 * st.fhat1 * mres / m;
    ++iter;
    dr.record(iter, st.x, loss, st.l);
  }
  x = st.x;
  return dr.finish(iter, x, loss, st.l);
}

RunTrace lm_run(const ResidualSystem& sys, Vec& x, const OptimizerBudget& budget,
                int variant, const ResidualSystem* val, long record_interval) {
  if (variant < 1 || variant > 3) throw std::invalid_argument("lm: variant");
  if (sys.param_dim() > 4000) throw std::invalid_argument("lm: n > 4000");
  GnDriver dr(sys, val, budget, record_interval, "lm_v" + std::to_string(variant));
  const int m = sys.sample_count();
  constexpr double kAlpha = 0.5, kBeta = 10.0;
  double lambda = 0.1;

  Vec f = sys.residuals(x);
  double f2 = f.squaredNorm();
  long iter = 0;
  dr.record(0, x, f2 / m, lambda, true);
  while (true) {
    const Mat g = full_jacobian_t(sys, x);
    const Vec b = g * f;
    if (dr.done(iter, f2 / m, (2.0 * b).norm())) break;
    const Mat a = g * g.transpose();
    Vec damp;
    if (variant == 1) {
      damp = Vec::Ones(a.rows());
    } else if (variant == 2) {
      damp = a.diagonal().cwiseMax(kLambdaMin);
    } else {
      damp = a.diagonal().cwiseMax(kLambdaMin).cwiseSqrt();
    }
    // Raise lambda until the damped system is PD and the step decreases f2.
    bool accepted = false;
    while (lambda <= kLambdaMax) {
      Mat sys_mat = a;
      sys_mat.diagonal() += lambda * damp;
      auto d = cholesky_solve(sys_mat, -b);
      if (d) {
        const Vec trial = x + *d;
        const Vec f_trial = sys.residuals(trial);
        const double f2_trial = f_trial.squaredNorm();
        if (std::isfinite(f2_trial) && f2_trial < f2) {
          x = trial;
          f = f_trial;
          f2 = f2_trial;
          lambda = std::max(kLambdaMin, lambda * kAlpha);
          accepted = true;
          break;
        }
      }
      lambda *= kBeta;
    }
    if (!accepted) {
      dr.tr.status = StopStatus::kStalled;
      break;
    }
    ++iter;
    dr.record(iter, x, f2 / m, lambda);
  }
  return dr.finish(iter, x, f2 / m, lambda);
}

}  // namespace dpd

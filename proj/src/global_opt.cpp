#include "dpd/global_opt.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace dpd {

BoxBounds BoxBounds::cube(int dim, double half_width) {
  if (dim < 1 || !(half_width > 0.0)) throw std::invalid_argument("BoxBounds::cube");
  BoxBounds b;
  b.lo = Vec::Constant(dim, -half_width);
  b.hi = Vec::Constant(dim, half_width);
  return b;
}

void BoxBounds::validate() const {
  if (lo.size() != hi.size() || lo.size() == 0 || (lo.array() > hi.array()).any()) {
    throw std::invalid_argument("BoxBounds: lo > hi or empty");
  }
}

void BoxBounds::clip(Vec& x) const {
  x = x.cwiseMax(lo).cwiseMin(hi);
}

namespace {

Vec uniform_in_box(const BoxBounds& box, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec x(box.lo.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    x[i] = box.lo[i] + u(rng) * (box.hi[i] - box.lo[i]);
  }
  return x;
}

/// Inner CG(PRP+) burst honoring the remaining wall budget of the outer run.
double cg_burst(const Objective& obj, Vec& x, int iters, double seconds_left) {
  if (iters > 0 && seconds_left > 0.0) {
    OptimizerBudget b;
    b.max_iterations = iters;
    b.max_seconds = seconds_left;
    b.grad_tol = 1e-14;
    cg_run(obj, x, b, CgVariant::kPRPPlus, 0, {}, iters);
  }
  return obj.eval(x);
}

}  // namespace

std::vector<StartResult> multistart(const Objective& obj, int n_starts,
                                    const BoxBounds& box, std::uint64_t seed,
                                    const OptimizerBudget& inner_budget,
                                    int history) {
  if (n_starts < 1) throw std::invalid_argument("multistart: n_starts < 1");
  box.validate();
  std::mt19937_64 rng(seed);
  std::vector<StartResult> results;
  results.reserve(n_starts);
  for (int i = 0; i < n_starts; ++i) {
    StartResult r;
    r.start = uniform_in_box(box, rng);
    r.final = r.start;
    RunTrace tr = lbfgs_run(obj, r.final, inner_budget, history, {},
                            std::max<long>(1, inner_budget.max_iterations));
    r.f_final = tr.back().f;
    r.metric_final = tr.back().train_nmse_db;
    r.status = tr.status;
    results.push_back(std::move(r));
  }
  std::stable_sort(results.begin(), results.end(),
                   [](const StartResult& a, const StartResult& b) {
                     return a.f_final < b.f_final;
                   });
  return results;
}

RunTrace simulated_annealing(const Objective& obj, Vec& x,
                             const OptimizerBudget& budget, SaParams params,
                             const BoxBounds& box, std::uint64_t seed,
                             long record_interval) {
  box.validate();
  if (params.k_cg < 0 || params.k_jump < 1 || !(params.t0 >= 1.0) ||
      params.d_jump < 0.0) {
    throw std::invalid_argument("simulated_annealing: bad params");
  }
  Reporter rep(budget, 1);
  RunTrace tr;
  tr.method = "sa";
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_real_distribution<double> u11(-1.0, 1.0);

  box.clip(x);
  Vec best = x;
  double f_best = obj.eval(best);

  auto record = [&](long iter, double prob, bool force) {
    if (!force && iter % record_interval != 0) return;
    rep.clock().pause();
    const double train = obj.train_of(f_best);
    const double val = obj.val_at(best, train);
    rep.clock().resume();
    rep.record(tr, iter, f_best, train, val, prob, true);
  };

  auto jump = [&]() {
    Vec r(x.size());
    for (Eigen::Index i = 0; i < r.size(); ++i) r[i] = u11(rng);
    x = best + params.d_jump * r;
    box.clip(x);
  };

  record(0, 1.0, true);
  long k = 0;
  tr.status = StopStatus::kBudget;
  while (!rep.iterations_exhausted(k) && !rep.time_exhausted() &&
         !rep.target_reached(f_best)) {
    const double f_cur = obj.eval(x);
    if (f_cur < f_best) {
      best = x;
      f_best = f_cur;
    }
    Vec descended = x;
    const double f_desc = cg_burst(obj, descended, params.k_cg,
                                   budget.max_seconds - rep.clock().seconds());
    const double prob = std::pow(1.0 / static_cast<double>(std::max<long>(k, 1)),
                                 1.0 / params.t0);
    if (f_desc < f_cur) {
      box.clip(descended);
      if (f_desc < f_best) {
        best = descended;
        f_best = f_desc;
      }
      x = descended;
      // Cooling test still applies to the accepted point.
      if ((k % params.k_jump == 0) || (u01(rng) <= prob)) jump();
    } else {
      jump();
    }
    ++k;
    record(k, prob, false);
  }
  if (rep.target_reached(f_best)) tr.status = StopStatus::kConverged;
  record(k, 0.0, true);
  x = best;
  return tr;
}

RunTrace differential_evolution(const Objective& obj, Vec& x,
                                const OptimizerBudget& budget, DeParams params,
                                const BoxBounds& box, std::uint64_t seed,
                                long record_interval) {
  box.validate();
  if (params.m_pop < 4) throw std::invalid_argument("differential_evolution: m_pop < 4");
  if (params.k_cg < 0 || params.cr < 0.0 || params.cr > 1.0 ||
      !(params.eps_bio >= 0.0)) {
    throw std::invalid_argument("differential_evolution: bad params");
  }
  Reporter rep(budget, 1);
  RunTrace tr;
  tr.method = "de";
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  const int mp = params.m_pop;
  auto seconds_left = [&] { return budget.max_seconds - rep.clock().seconds(); };

  std::vector<Vec> pop;
  std::vector<double> fpop(mp);
  pop.reserve(mp);
  Vec x0 = x;
  box.clip(x0);
  pop.push_back(x0);
  for (int i = 1; i < mp; ++i) pop.push_back(uniform_in_box(box, rng));
  // Selection of the starting population: one descent per individual.
  for (int i = 0; i < mp; ++i) {
    fpop[i] = cg_burst(obj, pop[i], params.k_cg, seconds_left());
    box.clip(pop[i]);
    fpop[i] = obj.eval(pop[i]);
  }
  int best_i = static_cast<int>(
      std::min_element(fpop.begin(), fpop.end()) - fpop.begin());
  Vec best = pop[best_i];
  double f_best = fpop[best_i];

  auto biodiversity = [&] {
    double acc = 0.0;
    for (int l = 0; l + 1 < mp; ++l) acc += (pop[l + 1] - pop[l]).norm();
    return acc / (mp - 1);
  };

  auto record = [&](long iter, double bio, bool force) {
    if (!force && iter % record_interval != 0) return;
    rep.clock().pause();
    const double train = obj.train_of(f_best);
    const double val = obj.val_at(best, train);
    rep.clock().resume();
    rep.record(tr, iter, f_best, train, val, bio, true);
  };

  long gen = 0;
  record(0, biodiversity(), true);
  tr.status = StopStatus::kBudget;
  std::uniform_int_distribution<int> pick(0, mp - 1);
  while (!rep.iterations_exhausted(gen) && !rep.time_exhausted() &&
         !rep.target_reached(f_best)) {
    const double bio = biodiversity();
    if (bio <= params.eps_bio) {
      tr.status = StopStatus::kConverged;
      break;
    }
    std::vector<Vec> offspring(mp);
    std::vector<double> foff(mp);
    for (int l = 0; l < mp; ++l) {
      if (u01(rng) < params.cr) {
        offspring[l] = pop[l];
      } else {
        int j1, j2, j3;
        do { j1 = pick(rng); } while (j1 == l);
        do { j2 = pick(rng); } while (j2 == l || j2 == j1);
        do { j3 = pick(rng); } while (j3 == l || j3 == j1 || j3 == j2);
        offspring[l] = pop[j1] + params.f * (pop[j2] - pop[j3]);
        box.clip(offspring[l]);
      }
      foff[l] = cg_burst(obj, offspring[l], params.k_cg, seconds_left());
      box.clip(offspring[l]);
      foff[l] = obj.eval(offspring[l]);
      if (foff[l] < f_best) {
        best = offspring[l];
        f_best = foff[l];
      }
    }
    // Elitist selection: keep the m_pop best of parents and offspring.
    std::vector<std::pair<double, const Vec*>> ranked;
    ranked.reserve(2 * mp);
    for (int i = 0; i < mp; ++i) ranked.emplace_back(fpop[i], &pop[i]);
    for (int i = 0; i < mp; ++i) ranked.emplace_back(foff[i], &offspring[i]);
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<Vec> next(mp);
    for (int i = 0; i < mp; ++i) {
      next[i] = *ranked[i].second;
      fpop[i] = ranked[i].first;
    }
    pop = std::move(next);
    ++gen;
    record(gen, bio, false);
  }
  if (rep.target_reached(f_best)) tr.status = StopStatus::kConverged;
  record(gen, biodiversity(), true);
  x = best;
  return tr;
}

}  // namespace dpd

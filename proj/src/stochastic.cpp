#include "dpd/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dpd {

BatchSampler::BatchSampler(int m, int batch_size, std::uint64_t seed)
    : m_(m), b_(std::min(batch_size, m)), rng_(seed), perm_(m), pos_(0) {
  if (m < 1 || batch_size < 1) throw std::invalid_argument("BatchSampler: sizes");
  std::iota(perm_.begin(), perm_.end(), 0);
  std::shuffle(perm_.begin(), perm_.end(), rng_);
}

std::vector<int> BatchSampler::next() {
  if (pos_ >= perm_.size()) {
    std::shuffle(perm_.begin(), perm_.end(), rng_);
    pos_ = 0;
  }
  const std::size_t take = std::min<std::size_t>(b_, perm_.size() - pos_);
  std::vector<int> batch(perm_.begin() + pos_, perm_.begin() + pos_ + take);
  pos_ += take;
  return batch;
}

StochMethod stoch_method_from_name(const std::string& name) {
  if (name == "sgd") return StochMethod::kSgd;
  if (name == "adam") return StochMethod::kAdam;
  if (name == "adagrad") return StochMethod::kAdagrad;
  if (name == "adadelta") return StochMethod::kAdadelta;
  if (name == "adamax") return StochMethod::kAdamax;
  if (name == "rmsprop") return StochMethod::kRmsprop;
  throw std::invalid_argument("unknown stochastic method: " + name);
}

std::string stoch_method_name(StochMethod m) {
  switch (m) {
    case StochMethod::kSgd: return "sgd";
    case StochMethod::kAdam: return "adam";
    case StochMethod::kAdagrad: return "adagrad";
    case StochMethod::kAdadelta: return "adadelta";
    case StochMethod::kAdamax: return "adamax";
    case StochMethod::kRmsprop: return "rmsprop";
  }
  return "?";
}

AdaptiveState make_adaptive_state(int dim) {
  AdaptiveState st;
  st.m1 = Vec::Zero(dim);
  st.m2 = Vec::Zero(dim);
  return st;
}

Vec adaptive_step(AdaptiveState& st, const Vec& g, StochMethod method,
                  double eta) {
  if (g.size() != st.m1.size()) throw std::invalid_argument("adaptive_step: shape");
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  constexpr double kRmsDecay = 0.9, kAdadeltaRho = 0.95;
  ++st.step;
  switch (method) {
    case StochMethod::kSgd:
      return -eta * g;
    case StochMethod::kAdam: {
      st.m1 = kBeta1 * st.m1 + (1.0 - kBeta1) * g;
      st.m2 = kBeta2 * st.m2.array() + (1.0 - kBeta2) * g.array().square();
      const double c1 = 1.0 - std::pow(kBeta1, st.step);
      const double c2 = 1.0 - std::pow(kBeta2, st.step);
      return (-eta * (st.m1 / c1).array() /
              ((st.m2 / c2).array().sqrt() + kEps))
          .matrix();
    }
    case StochMethod::kAdagrad:
      st.m2.array() += g.array().square();
      return (-eta * g.array() / (st.m2.array().sqrt() + kEps)).matrix();
    case StochMethod::kAdadelta: {
      // m2 accumulates gradients, m1 accumulates updates.
      st.m2 = kAdadeltaRho * st.m2.array() +
              (1.0 - kAdadeltaRho) * g.array().square();
      const Vec delta = (-(st.m1.array() + kEps).sqrt() /
                         (st.m2.array() + kEps).sqrt() * g.array())
                            .matrix() *
                        eta;
      st.m1 = kAdadeltaRho * st.m1.array() +
              (1.0 - kAdadeltaRho) * (delta.array() / eta).square();
      return delta;
    }
    case StochMethod::kAdamax: {
      st.m1 = kBeta1 * st.m1 + (1.0 - kBeta1) * g;
      st.m2 = (kBeta2 * st.m2.array()).max(g.array().abs());
      const double c1 = 1.0 - std::pow(kBeta1, st.step);
      return (-eta / c1 * st.m1.array() / (st.m2.array() + kEps)).matrix();
    }
    case StochMethod::kRmsprop:
      st.m2 = kRmsDecay * st.m2.array() + (1.0 - kRmsDecay) * g.array().square();
      return (-eta * g.array() / (st.m2.array().sqrt() + kEps)).matrix();
  }
  throw std::logic_error("adaptive_step: unreachable");
}

RunTrace stochastic_run(const ResidualSystem& sys, Vec& x,
                        const OptimizerBudget& budget, StochMethod method,
                        int batch_size, double eta, std::uint64_t seed,
                        const ResidualSystem* val, long record_interval) {
  if (record_interval < 1) throw std::invalid_argument("record_interval < 1");
  Reporter rep(budget, 1);
  RunTrace tr;
  tr.method = stoch_method_name(method);
  BatchSampler sampler(sys.sample_count(), batch_size, seed);
  AdaptiveState st = make_adaptive_state(sys.param_dim());

  auto record = [&](long iter, double loss, bool force) {
    if (!force && iter % record_interval != 0) return;
    rep.clock().pause();
    const double train = sys.nmse_from_loss(loss);
    const double v = val ? val->nmse(x) : train;
    rep.clock().resume();
    rep.record(tr, iter, loss, train, v, eta, true);
  };

  double loss = sys.loss(x);
  const double loss0 = std::max(loss, 1e-30);
  long iter = 0;
  record(0, loss, true);
  tr.status = StopStatus::kBudget;
  while (!rep.iterations_exhausted(iter) && !rep.time_exhausted() &&
         !rep.target_reached(loss)) {
    const Vec g = sys.minibatch_grad(x, sampler.next());
    x += adaptive_step(st, g, method, eta);
    ++iter;
    // Full loss only at recorded rows (paused clock); divergence is checked
    // on the same cadence.
    if (iter % record_interval == 0 || rep.iterations_exhausted(iter)) {
      rep.clock().pause();
      loss = sys.loss(x);
      rep.clock().resume();
      if (!std::isfinite(loss) || loss > 1e6 * loss0) {
        tr.status = StopStatus::kDiverged;
        record(iter, loss, true);
        return tr;
      }
      record(iter, loss, true);
    }
  }
  if (rep.target_reached(loss)) tr.status = StopStatus::kConverged;
  if (tr.rows.empty() || tr.rows.back().iter != iter) {
    rep.clock().pause();
    loss = sys.loss(x);
    rep.clock().resume();
    record(iter, loss, true);
  }
  return tr;
}

}  // namespace dpd

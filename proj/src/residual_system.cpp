#include "dpd/residual_system.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dpd {

ResidualSystem::ResidualSystem(ModelConfig cfg, Dataset data)
    : cfg_(std::move(cfg)), data_(std::move(data)) {
  cfg_.validate();
  if (data_.input.size() != data_.target.size() || data_.input.empty()) {
    throw std::invalid_argument("ResidualSystem: bad dataset");
  }
  check_finite(data_.input, "ResidualSystem input");
  check_finite(data_.target, "ResidualSystem target");
  m_ = static_cast<int>(data_.input.size());
  n_ = cfg_.real_param_count();
  input_power_ = signal_power(data_.input);
  if (!(input_power_ > 0.0)) {
    throw std::invalid_argument("ResidualSystem: zero input power");
  }
}

ComplexSignal ResidualSystem::predict(const Vec& theta) const {
  return forward(theta, data_.input, cfg_);
}

namespace {

bool all_finite(const ComplexSignal& y) {
  for (const Complex& v : y) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  }
  return true;
}

}  // namespace

double ResidualSystem::loss(const Vec& theta) const {
  const ComplexSignal y = predict(theta);
  // Overflowing trial points report an infinite loss so line searches and
  // damping loops can back off instead of crashing the run.
  if (!all_finite(y)) return std::numeric_limits<double>::infinity();
  double acc = 0.0;
  for (int k = 0; k < m_; ++k) acc += std::norm(y[k] - data_.target[k]);
  return acc / m_;
}

double ResidualSystem::loss_and_grad(const Vec& theta, Vec& grad) const {
  const WhParams p = unpack_params(theta, cfg_);
  const ForwardTrace tr = forward_trace(p, data_.input, cfg_);
  const ComplexSignal& y = *tr.output;
  if (!all_finite(y)) {
    grad.setZero(n_);
    return std::numeric_limits<double>::infinity();
  }

  double acc = 0.0;
  ComplexSignal cot(m_);
  for (int k = 0; k < m_; ++k) {
    const Complex r = y[k] - data_.target[k];
    acc += std::norm(r);
    cot[k] = (2.0 / m_) * r;
  }
  grad.setZero(n_);
  backward_trace(p, tr, cfg_, cot, 0, m_, grad);
  return acc / m_;
}

Vec ResidualSystem::residuals(const Vec& theta) const {
  const ComplexSignal y = predict(theta);
  Vec r(2 * m_);
  for (int k = 0; k < m_; ++k) {
    const Complex v = y[k] - data_.target[k];
    r[2 * k] = v.real();
    r[2 * k + 1] = v.imag();
  }
  return r;
}

Mat ResidualSystem::jacobian_cols(const Vec& theta,
                                  const std::vector<int>& indices) const {
  std::vector<int> sorted = indices;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw std::invalid_argument("jacobian_cols: duplicate residual index");
  }
  if (!sorted.empty() && (sorted.front() < 0 || sorted.back() >= 2 * m_)) {
    throw std::invalid_argument("jacobian_cols: residual index out of range");
  }

  const WhParams p = unpack_params(theta, cfg_);
  const ForwardTrace tr = forward_trace(p, data_.input, cfg_);
  check_finite(*tr.output, "ResidualSystem forward");

  Mat g(n_, static_cast<int>(indices.size()));
  ComplexSignal cot(m_, Complex(0, 0));
  Vec col(n_);
  for (std::size_t j = 0; j < indices.size(); ++j) {
    const int idx = indices[j];
    const int k = idx / 2;
    cot[k] = (idx % 2 == 0) ? Complex(1, 0) : Complex(0, 1);
    col.setZero();
    backward_trace(p, tr, cfg_, cot, k, k + 1, col);
    g.col(static_cast<Eigen::Index>(j)) = col;
    cot[k] = Complex(0, 0);
  }
  return g;
}

Vec ResidualSystem::minibatch_grad(const Vec& theta,
                                   const std::vector<int>& sample_indices) const {
  if (sample_indices.empty()) {
    throw std::invalid_argument("minibatch_grad: empty batch");
  }
  const WhParams p = unpack_params(theta, cfg_);
  const ForwardTrace tr = forward_trace(p, data_.input, cfg_);
  const ComplexSignal& y = *tr.output;
  if (!all_finite(y)) {
    return Vec::Constant(n_, std::numeric_limits<double>::quiet_NaN());
  }

  ComplexSignal cot(m_, Complex(0, 0));
  const double scale = 2.0 / static_cast<double>(sample_indices.size());
  for (int k : sample_indices) {
    if (k < 0 || k >= m_) {
      throw std::invalid_argument("minibatch_grad: sample index out of range");
    }
    cot[k] = scale * (y[k] - data_.target[k]);
  }
  Vec grad = Vec::Zero(n_);
  backward_trace(p, tr, cfg_, cot, 0, m_, grad);
  return grad;
}

double ResidualSystem::nmse_from_loss(double loss_value) const {
  const double num = loss_value * m_;
  if (num <= 0.0) return kNmseFloorDb;
  return std::max(kNmseFloorDb, 10.0 * std::log10(num / input_power_));
}

double ResidualSystem::nmse(const Vec& theta) const {
  return nmse_from_loss(loss(theta));
}

}  // namespace dpd

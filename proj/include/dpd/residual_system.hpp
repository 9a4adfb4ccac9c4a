#pragma once

#include <vector>

#include "dpd/model.hpp"
#include "dpd/signal.hpp"

namespace dpd {

/// Nonlinear least-squares view of a model + dataset pair.
///
/// The map F(theta) stacks the real and imaginary parts of the per-sample
/// discrepancies M_theta(input)_k - target_k, giving m_res = 2m real
/// residuals (index 2k = Re, 2k+1 = Im). Derived objectives:
///   f2 = ||F||^2, f1 = sqrt(f2), fhat1 = f1/sqrt(m_res),
///   loss = f2 / m  (the per-sample empirical risk).
///
/// Instances are immutable; every evaluation allocates private scratch, so
/// concurrent calls on one instance are safe.
class ResidualSystem {
 public:
  ResidualSystem(ModelConfig cfg, Dataset data);

  const ModelConfig& config() const { return cfg_; }
  const Dataset& data() const { return data_; }
  int param_dim() const { return n_; }
  int sample_count() const { return m_; }
  int residual_count() const { return 2 * m_; }
  double input_power() const { return input_power_; }

  ComplexSignal predict(const Vec& theta) const;

  /// Empirical-risk loss f2/m. A non-finite forward pass reports +inf so
  /// optimizers treat the trial point as rejectable rather than fatal.
  double loss(const Vec& theta) const;

  /// Loss and its exact gradient via one reverse sweep.
  double loss_and_grad(const Vec& theta, Vec& grad) const;

  /// The 2m real residuals.
  Vec residuals(const Vec& theta) const;

  /// Gradients of the selected residuals, one reverse sweep per index.
  /// Returns an n x |indices| matrix whose column j is the gradient of
  /// residual indices[j]. Rejects duplicate or out-of-range indices.
  Mat jacobian_cols(const Vec& theta, const std::vector<int>& indices) const;

  /// Gradient of the partial loss (1/|batch|) * sum_{k in batch} |r_k|^2
  /// over complex-sample indices.
  Vec minibatch_grad(const Vec& theta, const std::vector<int>& sample_indices) const;

  /// Train NMSE of the model output against the target, denominated in the
  /// dataset input power (computable from the loss without a new forward).
  double nmse_from_loss(double loss_value) const;
  double nmse(const Vec& theta) const;

 private:
  ModelConfig cfg_;
  Dataset data_;
  int m_;
  int n_;
  double input_power_;
};

}  // namespace dpd

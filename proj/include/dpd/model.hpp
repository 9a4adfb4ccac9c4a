#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dpd/signal.hpp"

namespace dpd {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = std::vector<Complex>;

/// Hyperparameters of the cascade Wiener--Hammerstein graph.
///
/// Each layer holds `blocks[layer]` parallel blocks; a block applies a
/// polynomial complex gain, a lut convolution (width lut_width), forms the
/// cancellation signal d through the cs convolution (width cs_width), and
/// feeds d*|d|^l through `branches` output convolutions (width branch_width).
struct ModelConfig {
  int layers = 2;
  std::vector<int> blocks = {1, 1};  // R per layer; size 1 broadcasts
  int cs_width = 3;                  // N
  int lut_width = 3;                 // M
  int branch_width = 3;              // K
  int branches = 2;                  // number of branch orders l = 0..branches-1
  int order = 2;                     // P, gain-basis order
  bool residual = false;
  int shift = 0;                     // conv shift applied to lut/branch convs

  int blocks_at(int layer) const;
  void validate() const;

  /// Complex parameter count: sum over layers of
  /// R * (cs_width + lut_width + branch_width*branches + order).
  int complex_param_count() const;
  /// Real parameter dimension (two reals per complex weight).
  int real_param_count() const { return 2 * complex_param_count(); }
};

/// One block's complex weights.
struct BlockParams {
  CVec h_lut;                  // lut convolution, length lut_width
  CVec h_cs;                   // cancellation convolution, length cs_width
  std::vector<CVec> h_branch;  // branches kernels, each length branch_width
  CVec gain;                   // polynomial gain coefficients, length order
};

/// Full weight set; shape mirrors ModelConfig exactly.
struct WhParams {
  std::vector<std::vector<BlockParams>> layers;  // [layer][block]

  static WhParams zeros(const ModelConfig& cfg);
};

/// Flat real view of the weights. Ordering is frozen so parameter files are
/// portable: layer-major, block-major, then within a block h_lut, h_cs,
/// h_branch[0..], gain, each complex weight as (real, imag).
Vec pack_params(const WhParams& p, const ModelConfig& cfg);
WhParams unpack_params(const Vec& v, const ModelConfig& cfg);

/// Same-length convolution with zero padding:
///   y_k = sum_j H_j * x_{k + c - j + shift},  c = (|H|-1)/2.
/// The unit kernel at the center tap with shift 0 is the identity.
ComplexSignal conv(const ComplexSignal& x, const CVec& kernel, int shift);

/// Elementwise complex gain: sum_p C_p |x_k|^{p-1} x_k.
ComplexSignal gain_function(const ComplexSignal& x, const CVec& coeffs);

/// Single-block forward pass:
///   u = conv(gain(x), h_lut, shift); d = conv(u - x, h_cs, 0);
///   out = u + sum_l conv(d |d|^l, h_branch[l], shift).
ComplexSignal block_forward(const ComplexSignal& x, const BlockParams& b,
                            const ModelConfig& cfg);

/// Per-block intermediates kept for the reverse sweep.
struct BlockTrace {
  ComplexSignal g, u, e, d;  // gain output, lut conv, u - x, cs conv
  std::vector<double> ad;    // |d|
};

struct LayerTrace {
  ComplexSignal input;
  std::vector<double> t_in;  // |input|
  std::vector<BlockTrace> blocks;
  ComplexSignal output;
};

struct ForwardTrace {
  std::vector<LayerTrace> layers;
  const ComplexSignal* output = nullptr;  // last layer output
};

/// Full forward pass, recording every intermediate signal.
/// Layer 1 output is the block sum; layers 2..L add their input on top of
/// the block sum when cfg.residual is set (the skip-connection variant).
ForwardTrace forward_trace(const WhParams& p, const ComplexSignal& x,
                           const ModelConfig& cfg);

ComplexSignal forward(const Vec& theta, const ComplexSignal& x,
                      const ModelConfig& cfg);

/// Reverse sweep through a recorded forward pass.
///
/// `cot` is the output cotangent in the convention
/// cot_k = dL/d(Re y_k) + i * dL/d(Im y_k); it is nonzero only on [lo, hi).
/// Parameter adjoints are accumulated into `grad` (real layout of
/// pack_params); grad must be pre-sized to cfg.real_param_count() and is
/// added to, not overwritten.
void backward_trace(const WhParams& p, const ForwardTrace& trace,
                    const ModelConfig& cfg, const ComplexSignal& cot,
                    long lo, long hi, Vec& grad);

/// Xavier-uniform initialization: each real component of a kernel of width w
/// is uniform in +-sqrt(6)/sqrt(2w); gain coefficients use w = order.
Vec init_xavier(const ModelConfig& cfg, std::uint64_t seed);

/// He initialization: normal with sigma = sqrt(2 / w) per real component.
Vec init_he(const ModelConfig& cfg, std::uint64_t seed);

/// Shifted initialization: identity_tap at the center of every lut/cs
/// kernel, gain coefficients all alpha, and the order-0 branch kernel of
/// block r carrying a single 1 at center + stagger(r) with stagger
/// enumerating 0, +1, -1, +2, -2, ... Higher branch orders start at zero.
/// With identity_gain the gain coefficients are overridden to (1, 0, ...),
/// which makes a one-block-per-layer non-residual model the exact identity.
Vec init_shifted(const ModelConfig& cfg, double alpha,
                 Complex identity_tap = Complex(1.0, 0.0),
                 bool identity_gain = false);

/// Parameter file (schema "dpd-params v1"): JSON with model_config and the
/// flat real value array; byte-deterministic for identical inputs.
void save_params_file(const Vec& theta, const ModelConfig& cfg,
                      const std::string& path);
std::pair<Vec, ModelConfig> load_params_file(const std::string& path);

std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& json_text);

}  // namespace dpd

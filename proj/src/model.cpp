#include "dpd/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace dpd {

namespace {

long clampl(long v, long lo, long hi) { return std::max(lo, std::min(v, hi)); }

struct Range {
  long lo = 0, hi = 0;  // half-open
  Range clamp(long m) const { return {clampl(lo, 0, m), clampl(hi, 0, m)}; }
  Range expand(long radius, long shift) const {
    return {lo + shift - radius, hi + shift + radius};
  }
  static Range hull(const Range& a, const Range& b) {
    return {std::min(a.lo, b.lo), std::max(a.hi, b.hi)};
  }
};

// Complex parameter count of one block.
int block_csize(const ModelConfig& c) {
  return c.lut_width + c.cs_width + c.branch_width * c.branches + c.order;
}

// Complex offset of a (layer, block) slice in the flat layout.
int block_coffset(const ModelConfig& c, int layer, int block) {
  int off = 0;
  for (int l = 0; l < layer; ++l) off += c.blocks_at(l) * block_csize(c);
  return off + block * block_csize(c);
}

double pow_nonneg(double t, int e) {
  // t >= 0, small integer exponent
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= t;
  return r;
}

}  // namespace

int ModelConfig::blocks_at(int layer) const {
  if (blocks.empty()) throw std::invalid_argument("ModelConfig: blocks empty");
  if (blocks.size() == 1) return blocks[0];
  return blocks.at(static_cast<std::size_t>(layer));
}

void ModelConfig::validate() const {
  if (layers < 1) throw std::invalid_argument("ModelConfig: layers must be >= 1");
  if (blocks.size() != 1 && static_cast<int>(blocks.size()) != layers) {
    throw std::invalid_argument("ModelConfig: blocks list must have 1 or `layers` entries");
  }
  for (int l = 0; l < layers; ++l) {
    if (blocks_at(l) < 1) throw std::invalid_argument("ModelConfig: R must be >= 1");
  }
  for (int w : {cs_width, lut_width, branch_width}) {
    if (w < 1 || w % 2 == 0) {
      throw std::invalid_argument("ModelConfig: conv widths must be odd and >= 1");
    }
  }
  if (branches < 1) throw std::invalid_argument("ModelConfig: branches must be >= 1");
  if (order < 1) throw std::invalid_argument("ModelConfig: order must be >= 1");
}

int ModelConfig::complex_param_count() const {
  int n = 0;
  for (int l = 0; l < layers; ++l) n += blocks_at(l) * block_csize(*this);
  return n;
}

WhParams WhParams::zeros(const ModelConfig& cfg) {
  cfg.validate();
  WhParams p;
  p.layers.resize(cfg.layers);
  for (int l = 0; l < cfg.layers; ++l) {
    p.layers[l].resize(cfg.blocks_at(l));
    for (BlockParams& b : p.layers[l]) {
      b.h_lut.assign(cfg.lut_width, Complex(0, 0));
      b.h_cs.assign(cfg.cs_width, Complex(0, 0));
      b.h_branch.assign(cfg.branches, CVec(cfg.branch_width, Complex(0, 0)));
      b.gain.assign(cfg.order, Complex(0, 0));
    }
  }
  return p;
}

Vec pack_params(const WhParams& p, const ModelConfig& cfg) {
  cfg.validate();
  if (static_cast<int>(p.layers.size()) != cfg.layers) {
    throw std::invalid_argument("pack_params: layer count mismatch");
  }
  Vec v(cfg.real_param_count());
  int i = 0;
  auto put = [&](const CVec& w, int expect) {
    if (static_cast<int>(w.size()) != expect) {
      throw std::invalid_argument("pack_params: kernel shape mismatch");
    }
    for (const Complex& c : w) {
      v[i++] = c.real();
      v[i++] = c.imag();
    }
  };
  for (int l = 0; l < cfg.layers; ++l) {
    if (static_cast<int>(p.layers[l].size()) != cfg.blocks_at(l)) {
      throw std::invalid_argument("pack_params: block count mismatch");
    }
    for (const BlockParams& b : p.layers[l]) {
      put(b.h_lut, cfg.lut_width);
      put(b.h_cs, cfg.cs_width);
      if (static_cast<int>(b.h_branch.size()) != cfg.branches) {
        throw std::invalid_argument("pack_params: branch count mismatch");
      }
      for (const CVec& h : b.h_branch) put(h, cfg.branch_width);
      put(b.gain, cfg.order);
    }
  }
  return v;
}

WhParams unpack_params(const Vec& v, const ModelConfig& cfg) {
  cfg.validate();
  if (v.size() != cfg.real_param_count()) {
    throw std::invalid_argument("unpack_params: length mismatch");
  }
  WhParams p = WhParams::zeros(cfg);
  int i = 0;
  auto get = [&](CVec& w) {
    for (Complex& c : w) {
      c = Complex(v[i], v[i + 1]);
      i += 2;
    }
  };
  for (auto& layer : p.layers) {
    for (BlockParams& b : layer) {
      get(b.h_lut);
      get(b.h_cs);
      for (CVec& h : b.h_branch) get(h);
      get(b.gain);
    }
  }
  return p;
}

ComplexSignal conv(const ComplexSignal& x, const CVec& kernel, int shift) {
  if (kernel.empty()) throw std::invalid_argument("conv: empty kernel");
  const long m = static_cast<long>(x.size());
  const long w = static_cast<long>(kernel.size());
  const long c = (w - 1) / 2;
  ComplexSignal y(x.size(), Complex(0, 0));
  for (long k = 0; k < m; ++k) {
    Complex acc(0, 0);
    for (long j = 0; j < w; ++j) {
      const long t = k + c - j + shift;
      if (t >= 0 && t < m) acc += kernel[j] * x[t];
    }
    y[k] = acc;
  }
  return y;
}

ComplexSignal gain_function(const ComplexSignal& x, const CVec& coeffs) {
  if (coeffs.empty()) throw std::invalid_argument("gain_function: empty coefficients");
  ComplexSignal y(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double t = std::abs(x[k]);
    Complex s(0, 0);
    double tp = 1.0;
    for (const Complex& c : coeffs) {
      s += c * tp;
      tp *= t;
    }
    y[k] = s * x[k];
  }
  return y;
}

namespace {

BlockTrace block_forward_trace(const ComplexSignal& x, const BlockParams& b,
                               const ModelConfig& cfg, ComplexSignal& out_accum) {
  BlockTrace tr;
  tr.g = gain_function(x, b.gain);
  tr.u = conv(tr.g, b.h_lut, cfg.shift);
  tr.e.resize(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) tr.e[k] = tr.u[k] - x[k];
  tr.d = conv(tr.e, b.h_cs, 0);
  tr.ad.resize(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) tr.ad[k] = std::abs(tr.d[k]);

  for (std::size_t k = 0; k < x.size(); ++k) out_accum[k] += tr.u[k];
  ComplexSignal bl(x.size());
  for (int l = 0; l < cfg.branches; ++l) {
    for (std::size_t k = 0; k < x.size(); ++k) {
      bl[k] = tr.d[k] * pow_nonneg(tr.ad[k], l);
    }
    ComplexSignal cv = conv(bl, b.h_branch[l], cfg.shift);
    for (std::size_t k = 0; k < x.size(); ++k) out_accum[k] += cv[k];
  }
  return tr;
}

}  // namespace

ComplexSignal block_forward(const ComplexSignal& x, const BlockParams& b,
                            const ModelConfig& cfg) {
  ComplexSignal out(x.size(), Complex(0, 0));
  block_forward_trace(x, b, cfg, out);
  return out;
}

ForwardTrace forward_trace(const WhParams& p, const ComplexSignal& x,
                           const ModelConfig& cfg) {
  cfg.validate();
  ForwardTrace tr;
  tr.layers.resize(cfg.layers);
  const ComplexSignal* in = &x;
  for (int l = 0; l < cfg.layers; ++l) {
    LayerTrace& lt = tr.layers[l];
    lt.input = *in;
    lt.t_in.resize(lt.input.size());
    for (std::size_t k = 0; k < lt.input.size(); ++k) lt.t_in[k] = std::abs(lt.input[k]);
    lt.output.assign(lt.input.size(), Complex(0, 0));
    lt.blocks.reserve(p.layers[l].size());
    for (const BlockParams& b : p.layers[l]) {
      lt.blocks.push_back(block_forward_trace(lt.input, b, cfg, lt.output));
    }
    // Skip connection applies from the second layer on, matching the
    // two-layer residual composition y = sum block(z) + z.
    if (cfg.residual && l > 0) {
      for (std::size_t k = 0; k < lt.output.size(); ++k) lt.output[k] += lt.input[k];
    }
    in = &lt.output;
  }
  tr.output = &tr.layers.back().output;
  return tr;
}

ComplexSignal forward(const Vec& theta, const ComplexSignal& x,
                      const ModelConfig& cfg) {
  const WhParams p = unpack_params(theta, cfg);
  ForwardTrace tr = forward_trace(p, x, cfg);
  return *tr.output;
}

void backward_trace(const WhParams& p, const ForwardTrace& trace,
                    const ModelConfig& cfg, const ComplexSignal& cot,
                    long lo, long hi, Vec& grad) {
  const long m = static_cast<long>(trace.layers.front().input.size());
  if (grad.size() != cfg.real_param_count()) {
    throw std::invalid_argument("backward_trace: grad size mismatch");
  }
  const long c_lut = (cfg.lut_width - 1) / 2;
  const long c_cs = (cfg.cs_width - 1) / 2;
  const long c_br = (cfg.branch_width - 1) / 2;
  const long s = cfg.shift;

  ComplexSignal yhat(cot), xhat(m, Complex(0, 0));
  ComplexSignal uhat(m, Complex(0, 0)), dhat(m, Complex(0, 0));
  Range ry{lo, hi};

  auto add_cgrad = [&](int coff, const Complex& w) {
    grad[2 * coff] += w.real();
    grad[2 * coff + 1] += w.imag();
  };

  for (int layer = cfg.layers - 1; layer >= 0; --layer) {
    const LayerTrace& lt = trace.layers[layer];
    const Range rc = ry.clamp(m);
    Range rx = rc;

    if (cfg.residual && layer > 0) {
      for (long k = rc.lo; k < rc.hi; ++k) xhat[k] += yhat[k];
    }

    for (int blk = 0; blk < static_cast<int>(lt.blocks.size()); ++blk) {
      const BlockTrace& bt = lt.blocks[blk];
      const BlockParams& bp = p.layers[layer][blk];
      const int base = block_coffset(cfg, layer, blk);
      const int off_lut = base;
      const int off_cs = base + cfg.lut_width;
      const int off_br = base + cfg.lut_width + cfg.cs_width;
      const int off_gain = off_br + cfg.branch_width * cfg.branches;

      // u contributes directly to the block output.
      for (long k = rc.lo; k < rc.hi; ++k) uhat[k] += yhat[k];
      Range ru = rc;

      // Branch convolutions: out += conv(d*|d|^l, h_branch[l], s).
      const Range rd = rc.expand(c_br, s).clamp(m);
      for (int l = 0; l < cfg.branches; ++l) {
        // Kernel adjoint.
        for (long j = 0; j < cfg.branch_width; ++j) {
          Complex acc(0, 0);
          for (long k = rc.lo; k < rc.hi; ++k) {
            const long t = k + c_br - j + s;
            if (t >= 0 && t < m) {
              const Complex bl = bt.d[t] * pow_nonneg(bt.ad[t], l);
              acc += std::conj(bl) * yhat[k];
            }
          }
          add_cgrad(off_br + l * cfg.branch_width + static_cast<int>(j), acc);
        }
        // Signal adjoint, folded through b = d*|d|^l.
        for (long t = rd.lo; t < rd.hi; ++t) {
          Complex bh(0, 0);
          for (long j = 0; j < cfg.branch_width; ++j) {
            const long k = t - c_br + j - s;
            if (k >= rc.lo && k < rc.hi) bh += std::conj(bp.h_branch[l][j]) * yhat[k];
          }
          if (bh == Complex(0, 0)) continue;
          const double ad = bt.ad[t];
          dhat[t] += pow_nonneg(ad, l) * bh;
          if (l >= 1 && ad > 0.0) {
            const double th = static_cast<double>(l) * pow_nonneg(ad, l - 1) *
                              (bt.d[t].real() * bh.real() + bt.d[t].imag() * bh.imag());
            dhat[t] += (th / ad) * bt.d[t];
          }
        }
      }

      // d = conv(e, h_cs, 0).
      for (long j = 0; j < cfg.cs_width; ++j) {
        Complex acc(0, 0);
        for (long k = rd.lo; k < rd.hi; ++k) {
          const long t = k + c_cs - j;
          if (t >= 0 && t < m) acc += std::conj(bt.e[t]) * dhat[k];
        }
        add_cgrad(off_cs + static_cast<int>(j), acc);
      }
      const Range re = rd.expand(c_cs, 0).clamp(m);
      for (long t = re.lo; t < re.hi; ++t) {
        Complex eh(0, 0);
        for (long j = 0; j < cfg.cs_width; ++j) {
          const long k = t - c_cs + j;
          if (k >= rd.lo && k < rd.hi) eh += std::conj(bp.h_cs[j]) * dhat[k];
        }
        // e = u - x
        uhat[t] += eh;
        xhat[t] -= eh;
      }
      ru = Range::hull(ru, re);
      rx = Range::hull(rx, re);

      // u = conv(g, h_lut, s).
      for (long j = 0; j < cfg.lut_width; ++j) {
        Complex acc(0, 0);
        for (long k = ru.lo; k < ru.hi; ++k) {
          const long t = k + c_lut - j + s;
          if (t >= 0 && t < m) acc += std::conj(bt.g[t]) * uhat[k];
        }
        add_cgrad(off_lut + static_cast<int>(j), acc);
      }
      const Range rg = ru.expand(c_lut, s).clamp(m);
      for (long t = rg.lo; t < rg.hi; ++t) {
        Complex gh(0, 0);
        for (long j = 0; j < cfg.lut_width; ++j) {
          const long k = t - c_lut + j - s;
          if (k >= ru.lo && k < ru.hi) gh += std::conj(bp.h_lut[j]) * uhat[k];
        }
        if (gh == Complex(0, 0)) continue;
        // g = s(t) * x, s(t) = sum_p C_p t^{p-1}.
        const double t_in = lt.t_in[t];
        Complex sval(0, 0), sder(0, 0);
        double tp = 1.0;
        for (int pw = 0; pw < cfg.order; ++pw) {
          sval += bp.gain[pw] * tp;
          if (pw >= 1) sder += bp.gain[pw] * static_cast<double>(pw) * pow_nonneg(t_in, pw - 1);
          tp *= t_in;
        }
        double tq = 1.0;
        for (int pw = 0; pw < cfg.order; ++pw) {
          add_cgrad(off_gain + pw, std::conj(tq * lt.input[t]) * gh);
          tq *= t_in;
        }
        xhat[t] += std::conj(sval) * gh;
        const Complex w = sder * lt.input[t];
        const double that = w.real() * gh.real() + w.imag() * gh.imag();
        if (t_in > 0.0) xhat[t] += (that / t_in) * lt.input[t];
      }
      rx = Range::hull(rx, rg);

      // Clear per-block scratch on the ranges that were touched.
      std::fill(uhat.begin() + ru.lo, uhat.begin() + ru.hi, Complex(0, 0));
      std::fill(dhat.begin() + rd.lo, dhat.begin() + rd.hi, Complex(0, 0));
    }

    // Hand the layer-input cotangent to the previous layer.
    std::swap(yhat, xhat);
    std::fill(xhat.begin() + rx.lo, xhat.begin() + rx.hi, Complex(0, 0));
    ry = rx;
  }
}

Vec init_xavier(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  WhParams p = WhParams::zeros(cfg);
  auto fill_uniform = [&](CVec& w) {
    const double bound = std::sqrt(6.0) / std::sqrt(2.0 * static_cast<double>(w.size()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Complex& c : w) {
      const double re = dist(rng);
      const double im = dist(rng);
      c = Complex(re, im);
    }
  };
  for (auto& layer : p.layers) {
    for (BlockParams& b : layer) {
      fill_uniform(b.h_lut);
      fill_uniform(b.h_cs);
      for (CVec& h : b.h_branch) fill_uniform(h);
      fill_uniform(b.gain);
    }
  }
  return pack_params(p, cfg);
}

Vec init_he(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  WhParams p = WhParams::zeros(cfg);
  auto fill_normal = [&](CVec& w) {
    const double sigma = std::sqrt(2.0 / static_cast<double>(w.size()));
    std::normal_distribution<double> dist(0.0, sigma);
    for (Complex& c : w) {
      const double re = dist(rng);
      const double im = dist(rng);
      c = Complex(re, im);
    }
  };
  for (auto& layer : p.layers) {
    for (BlockParams& b : layer) {
      fill_normal(b.h_lut);
      fill_normal(b.h_cs);
      for (CVec& h : b.h_branch) fill_normal(h);
      fill_normal(b.gain);
    }
  }
  return pack_params(p, cfg);
}

Vec init_shifted(const ModelConfig& cfg, double alpha, Complex identity_tap,
                 bool identity_gain) {
  cfg.validate();
  WhParams p = WhParams::zeros(cfg);
  const int c_br = (cfg.branch_width - 1) / 2;
  for (int l = 0; l < cfg.layers; ++l) {
    const int r_count = cfg.blocks_at(l);
    for (int r = 0; r < r_count; ++r) {
      BlockParams& b = p.layers[l][r];
      b.h_lut[(cfg.lut_width - 1) / 2] = identity_tap;
      b.h_cs[(cfg.cs_width - 1) / 2] = identity_tap;
      // Staggered offsets 0, +1, -1, +2, -2, ... for the order-0 branch
      // kernel; offsets that leave the kernel are an error.
      const int step = (r + 1) / 2;
      const int offset = (r % 2 == 1) ? step : -step;
      const int pos = c_br + offset;
      if (pos < 0 || pos >= cfg.branch_width) {
        throw std::invalid_argument(
            "init_shifted: more blocks than distinct stagger positions");
      }
      b.h_branch[0][pos] = Complex(1.0, 0.0);
      if (identity_gain) {
        b.gain[0] = Complex(1.0, 0.0);
      } else {
        for (Complex& c : b.gain) c = Complex(alpha, 0.0);
      }
    }
  }
  return pack_params(p, cfg);
}

namespace {

nlohmann::json config_to_json_obj(const ModelConfig& c) {
  return nlohmann::json{{"layers", c.layers},
                        {"blocks", c.blocks},
                        {"cs_width", c.cs_width},
                        {"lut_width", c.lut_width},
                        {"branch_width", c.branch_width},
                        {"branches", c.branches},
                        {"order", c.order},
                        {"residual", c.residual},
                        {"shift", c.shift}};
}

ModelConfig config_from_json_obj(const nlohmann::json& j) {
  static const std::vector<std::string> known = {
      "layers", "blocks", "cs_width", "lut_width", "branch_width",
      "branches", "order", "residual", "shift"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      throw std::invalid_argument("model config: unknown key '" + it.key() + "'");
    }
  }
  ModelConfig c;
  c.layers = j.at("layers").get<int>();
  c.blocks = j.at("blocks").get<std::vector<int>>();
  if (j.contains("cs_width")) c.cs_width = j.at("cs_width").get<int>();
  if (j.contains("lut_width")) c.lut_width = j.at("lut_width").get<int>();
  if (j.contains("branch_width")) c.branch_width = j.at("branch_width").get<int>();
  if (j.contains("branches")) c.branches = j.at("branches").get<int>();
  if (j.contains("order")) c.order = j.at("order").get<int>();
  if (j.contains("residual")) c.residual = j.at("residual").get<bool>();
  if (j.contains("shift")) c.shift = j.at("shift").get<int>();
  c.validate();
  return c;
}

}  // namespace

std::string model_config_to_json(const ModelConfig& cfg) {
  return config_to_json_obj(cfg).dump();
}

ModelConfig model_config_from_json(const std::string& json_text) {
  return config_from_json_obj(nlohmann::json::parse(json_text));
}

void save_params_file(const Vec& theta, const ModelConfig& cfg,
                      const std::string& path) {
  if (theta.size() != cfg.real_param_count()) {
    throw std::invalid_argument("save_params_file: length mismatch");
  }
  nlohmann::json j;
  j["schema_version"] = 1;
  j["format"] = "dpd-params";
  j["model_config"] = config_to_json_obj(cfg);
  std::vector<double> vals(theta.data(), theta.data() + theta.size());
  j["values"] = vals;
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  os << j.dump(2) << "\n";
}

std::pair<Vec, ModelConfig> load_params_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open for read: " + path);
  nlohmann::json j = nlohmann::json::parse(is);
  if (j.at("schema_version").get<int>() != 1 ||
      j.at("format").get<std::string>() != "dpd-params") {
    throw std::runtime_error("load_params_file: unsupported schema");
  }
  ModelConfig cfg = config_from_json_obj(j.at("model_config"));
  const auto vals = j.at("values").get<std::vector<double>>();
  if (static_cast<int>(vals.size()) != cfg.real_param_count()) {
    throw std::runtime_error("load_params_file: value count mismatch");
  }
  Vec v(vals.size());
  for (std::size_t i = 0; i < vals.size(); ++i) v[i] = vals[i];
  return {v, cfg};
}

}  // namespace dpd

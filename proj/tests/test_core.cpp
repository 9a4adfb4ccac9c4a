#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "dpd/model.hpp"
#include "dpd/pa_sim.hpp"
#include "dpd/signal.hpp"

using namespace dpd;

namespace {

ComplexSignal random_signal(int m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  ComplexSignal x(m);
  for (auto& v : x) v = Complex(n(rng), n(rng));
  return x;
}

Vec random_theta(const ModelConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  Vec v(cfg.real_param_count());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = u(rng);
  return v;
}

// Straight-line re-implementation of one block, kept deliberately naive.
ComplexSignal naive_conv(const ComplexSignal& x, const CVec& h, int shift) {
  const long m = static_cast<long>(x.size());
  const long w = static_cast<long>(h.size());
  const long c = (w - 1) / 2;
  ComplexSignal y(m, Complex(0, 0));
  for (long k = 0; k < m; ++k) {
    for (long j = 0; j < w; ++j) {
      const long src = k + c - j + shift;
      if (src >= 0 && src < m) y[k] += h[j] * x[src];
    }
  }
  return y;
}

ComplexSignal naive_block(const ComplexSignal& x, const BlockParams& b,
                          const ModelConfig& cfg) {
  const long m = static_cast<long>(x.size());
  ComplexSignal g(m, Complex(0, 0));
  for (long k = 0; k < m; ++k) {
    const double t = std::abs(x[k]);
    Complex acc(0, 0);
    double tp = 1.0;
    for (std::size_t p = 0; p < b.gain.size(); ++p) {
      acc += b.gain[p] * tp;
      tp *= t;
    }
    g[k] = acc * x[k];
  }
  const ComplexSignal u = naive_conv(g, b.h_lut, cfg.shift);
  ComplexSignal e(m);
  for (long k = 0; k < m; ++k) e[k] = u[k] - x[k];
  const ComplexSignal d = naive_conv(e, b.h_cs, 0);
  ComplexSignal out = u;
  for (std::size_t l = 0; l < b.h_branch.size(); ++l) {
    ComplexSignal dl(m);
    for (long k = 0; k < m; ++k) dl[k] = d[k] * std::pow(std::abs(d[k]), l);
    const ComplexSignal bl = naive_conv(dl, b.h_branch[l], cfg.shift);
    for (long k = 0; k < m; ++k) out[k] += bl[k];
  }
  return out;
}

}  // namespace

TEST_CASE("nmse basics") {
  ComplexSignal x = {Complex(1, 0), Complex(0, 2), Complex(-1, 1)};
  ComplexSignal ref = {Complex(2, 1), Complex(3, 0), Complex(0, -1)};
  ComplexSignal y(3);
  for (int k = 0; k < 3; ++k) y[k] = ref[k] + x[k];
  CHECK(nmse_db(y, ref, x) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(nmse_db(ref, ref, x) == kNmseFloorDb);

  ComplexSignal y2(3);
  for (int k = 0; k < 3; ++k) y2[k] = ref[k] + 0.1 * x[k];
  CHECK(nmse_db(y2, ref, x) == doctest::Approx(-20.0).epsilon(1e-10));

  CHECK_THROWS_AS(nmse_db(y, ref, {Complex(1, 0)}), std::invalid_argument);
  CHECK_THROWS_AS(nmse_db(y, ref, ComplexSignal(3, Complex(0, 0))),
                  std::invalid_argument);
}

TEST_CASE("nmse invariances") {
  const ComplexSignal x = random_signal(64, 1);
  const ComplexSignal ref = random_signal(64, 2);
  const ComplexSignal y = random_signal(64, 3);
  const double base = nmse_db(y, ref, x);

  const Complex rot = std::polar(1.0, 0.7);
  ComplexSignal yr(64), refr(64);
  for (int k = 0; k < 64; ++k) {
    yr[k] = rot * y[k];
    refr[k] = rot * ref[k];
  }
  CHECK(nmse_db(yr, refr, x) == doctest::Approx(base).epsilon(1e-12));

  const Complex c(2.0, -1.0);
  ComplexSignal xs(64);
  for (int k = 0; k < 64; ++k) xs[k] = c * x[k];
  CHECK(nmse_db(y, ref, xs) ==
        doctest::Approx(base - 20.0 * std::log10(std::abs(c))).epsilon(1e-10));
}

TEST_CASE("sequential split") {
  Dataset d;
  d.input = random_signal(100, 4);
  d.target = random_signal(100, 5);
  auto [tr, va] = split_sequential(d, 0.75);
  CHECK(tr.size() == 75);
  CHECK(va.size() == 25);
  for (int k = 0; k < 25; ++k) {
    CHECK(va.input[k] == d.input[75 + k]);
    CHECK(va.target[k] == d.target[75 + k]);
  }

  Dataset d10;
  d10.input = random_signal(10, 6);
  d10.target = random_signal(10, 7);
  auto [a, b] = split_sequential(d10, 0.5);
  CHECK(a.size() == 5);
  CHECK(b.size() == 5);

  Dataset d1;
  d1.input = {Complex(1, 0)};
  d1.target = {Complex(1, 0)};
  CHECK_THROWS_AS(split_sequential(d1, 0.9), std::invalid_argument);
}

TEST_CASE("parameter packing round trip") {
  ModelConfig cfg;
  cfg.layers = 2;
  cfg.blocks = {2, 1};
  cfg.order = 3;
  WhParams p = WhParams::zeros(cfg);
  p.layers[0][0].h_lut[0] = Complex(3, 4);
  Vec v = pack_params(p, cfg);
  CHECK(v[0] == 3.0);
  CHECK(v[1] == 4.0);

  const Vec zeros = pack_params(WhParams::zeros(cfg), cfg);
  CHECK(zeros.norm() == 0.0);

  const Vec r = random_theta(cfg, 8);
  const Vec rt = pack_params(unpack_params(r, cfg), cfg);
  for (Eigen::Index i = 0; i < r.size(); ++i) CHECK(rt[i] == r[i]);
}

TEST_CASE("signal generator") {
  SignalSpec one;
  one.m = 128;
  one.tone_count = 1;
  const ComplexSignal x1 = gen_signal(one);
  for (const Complex& v : x1) CHECK(std::abs(v) == doctest::Approx(1.0).epsilon(1e-12));

  SignalSpec s;
  s.m = 4096;
  s.tone_count = 64;
  const ComplexSignal a = gen_signal(s);
  const ComplexSignal b = gen_signal(s);
  for (int k = 0; k < s.m; ++k) CHECK(a[k] == b[k]);

  const double avg = signal_power(a) / s.m;
  double peak = 0.0;
  for (const Complex& v : a) peak = std::max(peak, std::norm(v));
  CHECK(10.0 * std::log10(peak / avg) > 3.0);
}

TEST_CASE("pa forward") {
  PaModel pa;
  CHECK(pa_forward(ComplexSignal(32, Complex(0, 0)), pa) ==
        ComplexSignal(32, Complex(0, 0)));

  PaModel memoryless;
  memoryless.fir = {Complex(1, 0)};
  double out_max = 0.0;
  for (double amp = 0.0; amp <= 100.0; amp += 0.25) {
    const ComplexSignal y = pa_forward({Complex(amp, 0)}, memoryless);
    out_max = std::max(out_max, std::abs(y[0]));
  }
  CHECK(out_max < memoryless.g0 * memoryless.a_sat);

  PaModel linearish = memoryless;
  linearish.am_pm = 0.0;
  for (double amp = 0.005; amp <= 0.05; amp += 0.005) {
    const ComplexSignal y = pa_forward({Complex(amp, 0)}, linearish);
    CHECK(std::abs(y[0] - Complex(linearish.g0 * amp, 0)) <=
          0.01 * linearish.g0 * amp);
  }

  const ComplexSignal x = random_signal(64, 9);
  const Complex rot = std::polar(1.0, 1.3);
  ComplexSignal xr(64);
  for (int k = 0; k < 64; ++k) xr[k] = rot * x[k];
  const ComplexSignal y = pa_forward(x, pa);
  const ComplexSignal yr = pa_forward(xr, pa);
  for (int k = 0; k < 64; ++k) CHECK(std::abs(yr[k] - rot * y[k]) < 1e-12);
}

TEST_CASE("dpd dataset pairing") {
  SignalSpec s;
  s.m = 256;
  s.tone_count = 8;

  // A PA that is a pure gain: input should equal target exactly.
  PaModel linear;
  linear.g0 = 2.0;
  linear.a_sat = 1e9;
  linear.am_pm = 0.0;
  linear.fir = {Complex(1, 0)};
  const Dataset lin = make_dpd_dataset(s, linear, linear.g0);
  for (std::size_t k = 0; k < lin.size(); ++k) {
    CHECK(std::abs(lin.input[k] - lin.target[k]) < 1e-12);
  }

  SignalSpec s8;
  s8.m = 8192;
  const Dataset d1 = make_dpd_dataset(s8, PaModel{}, 1.0);
  const Dataset d2 = make_dpd_dataset(s8, PaModel{}, 1.0);
  for (std::size_t k = 0; k < d1.size(); ++k) CHECK(d1.input[k] == d2.input[k]);

  const double mismatch = nmse_db(d1.input, d1.target, d1.target);
  CHECK(mismatch > kNmseFloorDb);
  CHECK(mismatch < 0.0);
}

TEST_CASE("convolution") {
  const ComplexSignal x = random_signal(16, 10);
  CHECK(conv(x, {Complex(0, 0), Complex(1, 0), Complex(0, 0)}, 0) == x);

  const ComplexSignal z = conv(x, CVec(5, Complex(0, 0)), 0);
  for (const Complex& v : z) CHECK(v == Complex(0, 0));

  const ComplexSignal y =
      conv({Complex(1, 0), Complex(2, 0), Complex(3, 0)},
           {Complex(1, 0), Complex(1, 0), Complex(1, 0)}, 0);
  CHECK(y[0] == Complex(3, 0));
  CHECK(y[1] == Complex(6, 0));
  CHECK(y[2] == Complex(5, 0));
}

TEST_CASE("gain function") {
  const ComplexSignal x = random_signal(16, 11);
  CHECK(gain_function(x, {Complex(1, 0), Complex(0, 0)}) == x);

  const ComplexSignal z = gain_function(x, {Complex(0, 0), Complex(0, 0)});
  for (const Complex& v : z) CHECK(v == Complex(0, 0));

  const ComplexSignal g =
      gain_function({Complex(2, 0)}, {Complex(0, 0), Complex(1, 0)});
  CHECK(g[0] == Complex(4, 0));
}

TEST_CASE("block forward against the naive oracle") {
  ModelConfig cfg;
  cfg.layers = 1;
  cfg.blocks = {1};
  cfg.order = 2;
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    WhParams p = WhParams::zeros(cfg);
    BlockParams& b = p.layers[0][0];
    auto fill = [&](CVec& v) {
      for (auto& c : v) c = Complex(u(rng), u(rng));
    };
    fill(b.h_lut);
    fill(b.h_cs);
    for (auto& h : b.h_branch) fill(h);
    fill(b.gain);
    const ComplexSignal x = random_signal(8, 1000 + trial);
    const ComplexSignal got = block_forward(x, b, cfg);
    const ComplexSignal want = naive_block(x, b, cfg);
    for (int k = 0; k < 8; ++k) {
      CHECK(std::abs(got[k] - want[k]) <= 1e-12 * (1.0 + std::abs(want[k])));
    }
  }
}

TEST_CASE("block forward special cases") {
  ModelConfig cfg;
  cfg.layers = 1;
  cfg.blocks = {1};
  WhParams p = WhParams::zeros(cfg);
  BlockParams& b = p.layers[0][0];
  const ComplexSignal x = random_signal(32, 13);

  // lut identity + unit gain: d = 0, branches vanish, output == x.
  b.h_lut[1] = Complex(1, 0);
  b.gain[0] = Complex(1, 0);
  b.h_cs = {Complex(0.3, 0.1), Complex(-0.2, 0.0), Complex(0.5, 0.5)};
  const ComplexSignal y = block_forward(x, b, cfg);
  for (int k = 0; k < 32; ++k) CHECK(std::abs(y[k] - x[k]) < 1e-14);

  const BlockParams zero = WhParams::zeros(cfg).layers[0][0];
  const ComplexSignal z = block_forward(x, zero, cfg);
  for (const Complex& v : z) CHECK(v == Complex(0, 0));
}

TEST_CASE("layer composition") {
  // Two layers, second all-zero, residual: output equals layer-1 output.
  ModelConfig cfg;
  cfg.layers = 2;
  cfg.blocks = {1, 1};
  cfg.residual = true;
  const ComplexSignal x = random_signal(32, 14);
  Vec theta = random_theta(cfg, 15);
  const int half = cfg.real_param_count() / 2;
  Vec theta_cut = theta;
  theta_cut.segment(half, half).setZero();

  ModelConfig one = cfg;
  one.layers = 1;
  one.blocks = {1};
  const ComplexSignal z = forward(theta.head(half), x, one);
  const ComplexSignal y = forward(theta_cut, x, cfg);
  for (int k = 0; k < 32; ++k) CHECK(std::abs(y[k] - z[k]) < 1e-14);
}

TEST_CASE("parameter counting") {
  ModelConfig cfg;
  cfg.layers = 2;
  cfg.blocks = {2, 2};
  cfg.cs_width = 3;
  cfg.lut_width = 3;
  cfg.branch_width = 3;
  cfg.branches = 2;
  cfg.order = 2;
  CHECK(cfg.complex_param_count() == 56);
  CHECK(cfg.real_param_count() == 112);
}

TEST_CASE("branch kernels enter linearly") {
  ModelConfig cfg;
  cfg.layers = 1;
  cfg.blocks = {1};
  const ComplexSignal x = random_signal(32, 16);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  WhParams p = WhParams::zeros(cfg);
  BlockParams& b = p.layers[0][0];
  for (auto& c : b.h_lut) c = Complex(u(rng), u(rng));
  for (auto& c : b.h_cs) c = Complex(u(rng), u(rng));
  for (auto& c : b.gain) c = Complex(u(rng), u(rng));
  std::vector<CVec> base(b.h_branch.size(), CVec(cfg.branch_width));
  for (auto& h : base) {
    for (auto& c : h) c = Complex(u(rng), u(rng));
  }
  auto at_scale = [&](double s) {
    for (std::size_t l = 0; l < base.size(); ++l) {
      for (int k = 0; k < cfg.branch_width; ++k) {
        b.h_branch[l][k] = s * base[l][k];
      }
    }
    return block_forward(x, b, cfg);
  };
  const ComplexSignal y0 = at_scale(0.0);
  const ComplexSignal y1 = at_scale(1.0);
  const ComplexSignal y2 = at_scale(2.0);
  for (int k = 0; k < 32; ++k) {
    CHECK(std::abs((y2[k] - y0[k]) - 2.0 * (y1[k] - y0[k])) < 1e-12);
  }
}

TEST_CASE("initializations") {
  ModelConfig cfg;
  cfg.layers = 2;
  cfg.blocks = {2, 2};
  cfg.order = 3;  // every kernel and the gain basis have width 3
  const Vec xa = init_xavier(cfg, 21);
  const double bound = std::sqrt(6.0) / std::sqrt(6.0);
  CHECK(xa.cwiseAbs().maxCoeff() <= bound);
  const Vec xb = init_xavier(cfg, 21);
  for (Eigen::Index i = 0; i < xa.size(); ++i) CHECK(xa[i] == xb[i]);
  CHECK((init_xavier(cfg, 22) - xa).norm() > 0.0);

  // He sigma = sqrt(2/w): collect the order-8 gain components, w = 8.
  ModelConfig wide;
  wide.layers = 1;
  wide.blocks = {6250};
  wide.cs_width = wide.lut_width = wide.branch_width = 1;
  wide.branches = 1;
  wide.order = 8;
  const WhParams hp = unpack_params(init_he(wide, 23), wide);
  double acc = 0.0;
  long count = 0;
  for (const BlockParams& b : hp.layers[0]) {
    for (const Complex& c : b.gain) {
      acc += c.real() * c.real() + c.imag() * c.imag();
      count += 2;
    }
  }
  const double sd = std::sqrt(acc / count);
  CHECK(sd == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("shifted initialization") {
  ModelConfig cfg;
  cfg.layers = 2;
  cfg.blocks = {1, 1};
  const Vec theta = init_shifted(cfg, 0.0, Complex(1, 0), true);
  const ComplexSignal x = random_signal(64, 24);
  const ComplexSignal y = forward(theta, x, cfg);
  for (int k = 0; k < 64; ++k) CHECK(std::abs(y[k] - x[k]) <= 1e-15);

  ModelConfig five;
  five.layers = 1;
  five.blocks = {5};
  five.branch_width = 7;
  const WhParams p = unpack_params(init_shifted(five, 0.01), five);
  const int c = 3;
  const int expect[5] = {c, c + 1, c - 1, c + 2, c - 2};
  for (int r = 0; r < 5; ++r) {
    const CVec& h = p.layers[0][r].h_branch[0];
    for (int k = 0; k < 7; ++k) {
      CHECK(h[k] == (k == expect[r] ? Complex(1, 0) : Complex(0, 0)));
    }
    for (const Complex& g : p.layers[0][r].gain) CHECK(g == Complex(0.01, 0.0));
  }

  ModelConfig tight;
  tight.layers = 1;
  tight.blocks = {5};
  tight.branch_width = 3;
  CHECK_THROWS_AS(init_shifted(tight, 0.01), std::invalid_argument);
}

TEST_CASE("parameter file round trip") {
  ModelConfig cfg;
  cfg.layers = 2;
  cfg.blocks = {2, 1};
  const Vec theta = random_theta(cfg, 25);
  const std::string path = "test_core_params.json";
  save_params_file(theta, cfg, path);
  auto [loaded, lcfg] = load_params_file(path);
  CHECK(lcfg.complex_param_count() == cfg.complex_param_count());
  for (Eigen::Index i = 0; i < theta.size(); ++i) CHECK(loaded[i] == theta[i]);
  std::remove(path.c_str());

  CHECK_THROWS(model_config_from_json("{\"layers\":2,\"blocks\":[1],\"bogus\":1}"));
}

TEST_CASE("dataset file round trip") {
  SignalSpec s;
  s.m = 64;
  s.tone_count = 4;
  const Dataset d = make_dpd_dataset(s, PaModel{}, 1.0);
  const std::string path = "test_core_dataset.txt";
  save_dataset_file(d, path);
  const Dataset r = load_dataset_file(path);
  REQUIRE(r.size() == d.size());
  for (std::size_t k = 0; k < d.size(); ++k) {
    CHECK(r.input[k] == d.input[k]);
    CHECK(r.target[k] == d.target[k]);
  }
  std::remove(path.c_str());
}

#include "dpd/pa_sim.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace dpd {

void PaModel::validate() const {
  if (!(g0 > 0.0) || !(a_sat > 0.0)) {
    throw std::invalid_argument("PaModel: g0 and a_sat must be positive");
  }
  if (fir.empty() || fir.size() > 5 || fir.size() % 2 == 0) {
    throw std::invalid_argument("PaModel: FIR kernel must have odd length <= 5");
  }
  if (fir[fir.size() / 2] == Complex(0.0, 0.0)) {
    throw std::invalid_argument("PaModel: FIR center tap must be nonzero");
  }
}

void SignalSpec::validate() const {
  if (m < 64) throw std::invalid_argument("SignalSpec: m must be >= 64");
  if (tone_count < 1) throw std::invalid_argument("SignalSpec: tone_count must be >= 1");
  if (!(peak > 0.0)) throw std::invalid_argument("SignalSpec: peak must be positive");
}

ComplexSignal gen_signal(const SignalSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);

  // Tones on an evenly spaced comb around DC, one random phase each.
  const int t0 = -(spec.tone_count - 1) / 2;
  std::vector<double> phases(spec.tone_count);
  for (double& p : phases) p = phase(rng);

  ComplexSignal x(spec.m, Complex(0.0, 0.0));
  for (int t = 0; t < spec.tone_count; ++t) {
    const double freq = static_cast<double>(t0 + t);
    const double w = 2.0 * std::numbers::pi * freq / static_cast<double>(spec.m);
    for (int k = 0; k < spec.m; ++k) {
      x[k] += std::polar(1.0, w * k + phases[t]);
    }
  }
  double peak = 0.0;
  for (const Complex& v : x) peak = std::max(peak, std::abs(v));
  const double scale = spec.peak / peak;
  for (Complex& v : x) v *= scale;
  return x;
}

ComplexSignal pa_forward(const ComplexSignal& x, const PaModel& pa) {
  pa.validate();
  const std::size_t m = x.size();
  ComplexSignal mem(m);
  for (std::size_t k = 0; k < m; ++k) {
    const double t = std::abs(x[k]);
    const double u = t / pa.a_sat;
    const double gain = pa.g0 / (1.0 + u * u);
    const double phi = pa.am_pm * t * t / (1.0 + t * t);
    mem[k] = gain * std::polar(1.0, phi) * x[k];
  }
  // FIR with center alignment and zero padding.
  const int w = static_cast<int>(pa.fir.size());
  const int c = (w - 1) / 2;
  ComplexSignal y(m, Complex(0.0, 0.0));
  for (std::size_t k = 0; k < m; ++k) {
    Complex acc(0.0, 0.0);
    for (int j = 0; j < w; ++j) {
      const long idx = static_cast<long>(k) + c - j;
      if (idx >= 0 && idx < static_cast<long>(m)) acc += pa.fir[j] * mem[idx];
    }
    y[k] = acc;
  }
  return y;
}

Dataset make_dpd_dataset(const SignalSpec& spec, const PaModel& pa, double a) {
  if (!(a > 0.0)) throw std::invalid_argument("make_dpd_dataset: a must be positive");
  Dataset d;
  d.target = gen_signal(spec);
  d.input = pa_forward(d.target, pa);
  for (Complex& v : d.input) v /= a;
  return d;
}

void save_dataset(const Dataset& d, std::ostream& os) {
  os << "# dpd-dataset v1\n" << d.size() << "\n";
  os.precision(17);
  for (std::size_t k = 0; k < d.size(); ++k) {
    os << d.input[k].real() << ' ' << d.input[k].imag() << ' '
       << d.target[k].real() << ' ' << d.target[k].imag() << '\n';
  }
}

Dataset load_dataset(std::istream& is) {
  std::string header;
  std::getline(is, header);
  if (header != "# dpd-dataset v1") {
    throw std::runtime_error("load_dataset: unrecognized header '" + header + "'");
  }
  std::size_t m = 0;
  is >> m;
  Dataset d;
  d.input.resize(m);
  d.target.resize(m);
  for (std::size_t k = 0; k < m; ++k) {
    double a, b, c, e;
    if (!(is >> a >> b >> c >> e)) {
      throw std::runtime_error("load_dataset: truncated file");
    }
    d.input[k] = Complex(a, b);
    d.target[k] = Complex(c, e);
  }
  return d;
}

void save_dataset_file(const Dataset& d, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  save_dataset(d, os);
}

Dataset load_dataset_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open for read: " + path);
  return load_dataset(is);
}

}  // namespace dpd

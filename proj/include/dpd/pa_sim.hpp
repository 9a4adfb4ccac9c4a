#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>

#include "dpd/signal.hpp"

namespace dpd {

/// Memoryless AM/AM + AM/PM nonlinearity followed by a short FIR kernel.
/// AM/AM: g(t) = g0 / (1 + (t/a_sat)^2); AM/PM: phi(t) = c * t^2 / (1 + t^2).
struct PaModel {
  double g0 = 2.0;
  double a_sat = 1.0;
  double am_pm = 0.5;
  ComplexSignal fir = {Complex(0.05, 0.0), Complex(1.0, 0.0), Complex(0.05, 0.0)};

  void validate() const;
};

/// Multitone test-signal description.
struct SignalSpec {
  int m = 8192;
  int tone_count = 64;
  std::uint64_t seed = 1;
  double peak = 1.0;

  void validate() const;
};

/// Sum of tone_count complex exponentials with seeded random phases,
/// normalized so the peak amplitude equals spec.peak.
ComplexSignal gen_signal(const SignalSpec& spec);

/// Applies the PA nonlinearity sample by sample, then its FIR memory.
ComplexSignal pa_forward(const ComplexSignal& x, const PaModel& pa);

/// Indirect-learning pairs: input = pa_forward(x)/a, target = x.
/// A model trained on these approximates PA^{-1} composed with gain a.
Dataset make_dpd_dataset(const SignalSpec& spec, const PaModel& pa, double a);

/// Text export/import, schema "dpd-dataset v1": four columns per line
/// (re_in, im_in, re_target, im_target).
void save_dataset(const Dataset& d, std::ostream& os);
Dataset load_dataset(std::istream& is);
void save_dataset_file(const Dataset& d, const std::string& path);
Dataset load_dataset_file(const std::string& path);

}  // namespace dpd

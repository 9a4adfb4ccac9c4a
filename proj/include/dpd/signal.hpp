#pragma once

#include <complex>
#include <stdexcept>
#include <utility>
#include <vector>

namespace dpd {

using Complex = std::complex<double>;

/// A finite baseband signal: a sequence of complex samples.
using ComplexSignal = std::vector<Complex>;

/// A supervised (input, target) signal pair of equal length.
struct Dataset {
  ComplexSignal input;
  ComplexSignal target;

  std::size_t size() const { return input.size(); }
};

/// Sum of squared moduli.
double signal_power(const ComplexSignal& x);

/// NMSE floor used instead of -inf when the residual is exactly zero,
/// so traces stay plottable.
inline constexpr double kNmseFloorDb = -300.0;

/// Normalized mean square error in dB:
///   10*log10( sum |y_k - y_ref_k|^2 / sum |x_k|^2 ).
/// Throws std::invalid_argument on length mismatch or zero input power.
double nmse_db(const ComplexSignal& y, const ComplexSignal& y_ref,
               const ComplexSignal& x);

/// Splits a dataset into a leading training segment of
/// floor(train_fraction * m) samples and the trailing remainder,
/// preserving sample order. Both parts must end up non-empty.
std::pair<Dataset, Dataset> split_sequential(const Dataset& d,
                                             double train_fraction);

void check_finite(const ComplexSignal& x, const char* what);

}  // namespace dpd

#include "dpd/signal.hpp"

#include <cmath>
#include <string>

namespace dpd {

double signal_power(const ComplexSignal& x) {
  double p = 0.0;
  for (const Complex& v : x) p += std::norm(v);
  return p;
}

double nmse_db(const ComplexSignal& y, const ComplexSignal& y_ref,
               const ComplexSignal& x) {
  if (y.size() != y_ref.size() || y.size() != x.size()) {
    throw std::invalid_argument("nmse_db: signal lengths differ");
  }
  if (y.empty()) {
    throw std::invalid_argument("nmse_db: empty signals");
  }
  const double den = signal_power(x);
  if (!(den > 0.0)) {
    throw std::invalid_argument("nmse_db: zero input power");
  }
  double num = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) num += std::norm(y[k] - y_ref[k]);
  if (num == 0.0) return kNmseFloorDb;
  return 10.0 * std::log10(num / den);
}

std::pair<Dataset, Dataset> split_sequential(const Dataset& d,
                                             double train_fraction) {
  if (d.input.size() != d.target.size()) {
    throw std::invalid_argument("split_sequential: input/target length mismatch");
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("split_sequential: fraction must be in (0,1)");
  }
  const std::size_t m = d.size();
  const std::size_t m_train =
      static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(m)));
  if (m_train < 1 || m - m_train < 1) {
    throw std::invalid_argument("split_sequential: degenerate split");
  }
  Dataset train, val;
  train.input.assign(d.input.begin(), d.input.begin() + m_train);
  train.target.assign(d.target.begin(), d.target.begin() + m_train);
  val.input.assign(d.input.begin() + m_train, d.input.end());
  val.target.assign(d.target.begin() + m_train, d.target.end());
  return {std::move(train), std::move(val)};
}

void check_finite(const ComplexSignal& x, const char* what) {
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!std::isfinite(x[k].real()) || !std::isfinite(x[k].imag())) {
      throw std::runtime_error(std::string(what) + ": non-finite sample at index " +
                               std::to_string(k));
    }
  }
}

}  // namespace dpd

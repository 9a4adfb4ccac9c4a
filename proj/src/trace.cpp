#include "dpd/trace.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace dpd {

std::string stop_status_name(StopStatus s) {
  switch (s) {
    case StopStatus::kConverged: return "converged";
    case StopStatus::kBudget: return "budget";
    case StopStatus::kStalled: return "stalled";
    case StopStatus::kDiverged: return "diverged";
    case StopStatus::kLOverflow: return "l_overflow";
  }
  return "unknown";
}

void OptimizerBudget::validate() const {
  if (max_iterations < 0) throw std::invalid_argument("budget: negative iterations");
  if (max_iterations == std::numeric_limits<long>::max() &&
      !std::isfinite(max_seconds)) {
    throw std::invalid_argument("budget: no finite limit");
  }
}

Stopwatch::Stopwatch() : start_(Clock::now()) {}

double Stopwatch::seconds() const {
  if (paused_) return banked_;
  return banked_ + std::chrono::duration<double>(Clock::now() - start_).count();
}

void Stopwatch::pause() {
  if (paused_) return;
  banked_ += std::chrono::duration<double>(Clock::now() - start_).count();
  paused_ = true;
}

void Stopwatch::resume() {
  if (!paused_) return;
  start_ = Clock::now();
  paused_ = false;
}

Reporter::Reporter(const OptimizerBudget& budget, long record_interval)
    : budget_(budget), interval_(record_interval) {
  budget_.validate();
  if (interval_ < 1) throw std::invalid_argument("Reporter: record_interval < 1");
}

void Reporter::record(RunTrace& tr, long iter, double f, double train_nmse,
                      double val_nmse, double aux, bool force) {
  if (!force && iter % interval_ != 0) return;
  clock_.pause();
  double t = clock_.seconds();
  // Keep wall_s strictly increasing even across sub-resolution iterations.
  if (!tr.rows.empty() && t <= tr.rows.back().wall_s) {
    t = std::nextafter(tr.rows.back().wall_s, std::numeric_limits<double>::max());
  }
  tr.rows.push_back({t, iter, f, train_nmse, val_nmse, aux});
  clock_.resume();
}

bool Reporter::iterations_exhausted(long iter) const {
  return iter >= budget_.max_iterations;
}

bool Reporter::time_exhausted() const {
  return clock_.seconds() >= budget_.max_seconds;
}

bool Reporter::target_reached(double f) const { return f <= budget_.target_f; }

void write_trace_csv(const RunTrace& tr, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open trace file: " + path);
  out.precision(17);
  out << "wall_s,iter,f,train_nmse_db,val_nmse_db,aux\n";
  for (const TraceRow& r : tr.rows) {
    out << r.wall_s << ',' << r.iter << ',' << r.f << ',' << r.train_nmse_db
        << ',' << r.val_nmse_db << ',' << r.aux << '\n';
  }
  out << "# status=" << stop_status_name(tr.status) << " method=" << tr.method
      << " fingerprint=" << tr.fingerprint << '\n';
  if (!out) throw std::runtime_error("trace write failed: " + path);
}

}  // namespace dpd

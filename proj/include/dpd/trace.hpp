#pragma once

#include <chrono>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace dpd {

enum class StopStatus {
  kConverged,   // gradient tolerance reached
  kBudget,      // iteration or wall-time limit
  kStalled,     // no descent step found / step floor reached
  kDiverged,    // loss blow-up
  kLOverflow,   // adaptive-L doubling cap reached
};

std::string stop_status_name(StopStatus s);

struct OptimizerBudget {
  long max_iterations = 1000;
  double max_seconds = std::numeric_limits<double>::infinity();
  double grad_tol = 1e-5;
  double target_f = -std::numeric_limits<double>::infinity();

  void validate() const;  // at least one of the two limits must be finite
};

struct TraceRow {
  double wall_s = 0.0;
  long iter = 0;
  double f = 0.0;
  double train_nmse_db = 0.0;
  double val_nmse_db = 0.0;
  double aux = 0.0;  // method-specific (L_k, lambda, step size)
};

struct RunTrace {
  std::vector<TraceRow> rows;
  StopStatus status = StopStatus::kBudget;
  std::string method;
  std::uint64_t fingerprint = 0;

  const TraceRow& back() const { return rows.back(); }
};

/// Monotonic stopwatch with a pause switch so out-of-band metric
/// evaluations stay off the optimization clock.
class Stopwatch {
 public:
  Stopwatch();
  double seconds() const;
  void pause();
  void resume();

 private:
  using Clock = std::chrono::steady_clock;
  Clock::time_point start_;
  double banked_ = 0.0;
  bool paused_ = false;
};

/// Shared per-iteration bookkeeping for all optimizer drivers: clock, row
/// recording with the paused-clock rule, and budget checks.
class Reporter {
 public:
  /// val_loss_fn may be empty; then val_nmse_db mirrors train.
  Reporter(const OptimizerBudget& budget, long record_interval = 1);

  Stopwatch& clock() { return clock_; }

  /// Records a row when iter falls on the record interval (iteration 0 and
  /// the final row are always kept by the drivers calling force).
  void record(RunTrace& tr, long iter, double f, double train_nmse,
              double val_nmse, double aux, bool force = false);

  bool iterations_exhausted(long iter) const;
  bool time_exhausted() const;
  bool target_reached(double f) const;
  const OptimizerBudget& budget() const { return budget_; }

 private:
  OptimizerBudget budget_;
  long interval_;
  Stopwatch clock_;
};

/// Plot-ready CSV: header wall_s,iter,f,train_nmse_db,val_nmse_db,aux then
/// one row per trace row, 17 significant digits.
void write_trace_csv(const RunTrace& tr, const std::string& path);

}  // namespace dpd

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dpd/model.hpp"
#include "dpd/pa_sim.hpp"
#include "dpd/trace.hpp"

namespace dpd {

/// Experiment description, parsed from the versioned JSON config file
/// (see README for the schema). Unknown keys are rejected at every level.
struct ExperimentConfig {
  // Dataset: either synthetic generation parameters or a dataset file.
  bool synthetic = true;
  SignalSpec signal;
  PaModel pa;
  double gain_target = 1.0;
  std::string dataset_file;

  ModelConfig model;

  std::string init_scheme = "shifted";  // shifted | xavier | he
  std::uint64_t init_seed = 1;
  double init_alpha = 0.01;
  bool init_identity_gain = false;

  std::string method = "lbfgs";
  // Method knobs; unused ones are ignored by the dispatcher.
  int variant = 1;          // polyak / bb / lm variants
  std::string cg_variant = "prp+";
  int history = 100;        // lbfgs
  double d_level = 0.2;     // raider
  long k_rs = 0;            // cg / bfgs restart period (0 = default)
  double f_star = 0.0;      // polyak lower bound
  int p = -1;               // ssm batch (absolute; -1 = use p_mult)
  double p_mult = 6.0;      // ssm batch as multiple of n
  double l0 = 1.0;          // tsm / nsgn / ssm regularization
  int batch_size = 2048;    // stochastic
  double step_size = 0.001; // stochastic
  std::uint64_t run_seed = 1;
  // Global-method knobs.
  double box_half_width = 2.0;
  double sa_t0 = 6.0;
  int sa_k_jump = 100;
  double sa_d_jump = 1.0;
  int k_cg = 50;
  int de_m_pop = 20;
  double de_f = 0.5;
  double de_cr = 0.1;
  double de_eps_bio = 1e-6;
  int n_starts = 10;
  double start_half_width = 0.1;

  OptimizerBudget budget;
  std::vector<double> thresholds_db = {-30.0, -35.0, -37.0, -39.0};
  double train_fraction = 0.75;
  long record_interval = 1;
  std::string group;  // sweep grouping tag

  std::uint64_t fingerprint() const;
};

ExperimentConfig experiment_config_from_json(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);

/// FNV-1a over a byte string; used to stamp output files with their config.
std::uint64_t fnv1a(const std::string& bytes);

struct ExperimentResult {
  RunTrace trace;
  Vec theta;
  double train_nmse_db = 0.0;
  double val_nmse_db = 0.0;
  std::vector<std::optional<double>> threshold_seconds;
};

/// Builds the dataset and model from the config, runs the configured
/// optimizer, and (when out_dir is nonempty) writes trace.csv, summary.txt
/// and params.json into out_dir.
ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const std::string& out_dir);

/// First wall-clock crossing of each threshold by the train-NMSE column.
std::vector<std::optional<double>> time_to_threshold(
    const RunTrace& trace, const std::vector<double>& thresholds_db);

struct SweepRow {
  std::string group;
  int layers = 0;
  int blocks = 0;
  int complex_params = 0;
  double final_train_nmse_db = 0.0;
  double final_val_nmse_db = 0.0;
  std::vector<std::optional<double>> threshold_seconds;
};

/// Runs each config and tabulates the results; configs sharing a nonempty
/// group tag must have identical complex parameter counts (the
/// fixed-budget comparison premise), violations are a hard error.
std::vector<SweepRow> config_sweep(const std::vector<ExperimentConfig>& configs,
                                   const std::string& out_dir);

struct OverfitRow {
  double fraction = 0.0;
  double train_nmse_db = 0.0;
  double val_nmse_db = 0.0;
  double gap_db = 0.0;
};

/// Re-runs the configured experiment at each sequential train fraction and
/// reports the train/validation NMSE gap.
std::vector<OverfitRow> overfitting_report(const ExperimentConfig& cfg,
                                           const std::vector<double>& fractions,
                                           const std::string& out_dir);

struct MultistartRow {
  double f_start = 0.0;
  double f_final = 0.0;
  double nmse_final_db = 0.0;
};

/// Multi-start study on the configured problem: n_starts uniform draws from
/// [-start_half_width, start_half_width]^n, each descended with
/// L-BFGS(history); rows sorted best first.
std::vector<MultistartRow> multistart_report(const ExperimentConfig& cfg,
                                             const std::string& out_dir);

}  // namespace dpd

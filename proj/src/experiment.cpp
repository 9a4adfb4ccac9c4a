#include "dpd/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "dpd/gauss_newton.hpp"
#include "dpd/global_opt.hpp"
#include "dpd/optimizers.hpp"
#include "dpd/residual_system.hpp"
#include "dpd/stochastic.hpp"

namespace dpd {

using nlohmann::json;

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

namespace {

void reject_unknown(const json& j, const std::vector<std::string>& known,
                    const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      throw std::invalid_argument(where + ": unknown key '" + it.key() + "'");
    }
  }
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["schema_version"] = 1;
  if (c.synthetic) {
    json fir = json::array();
    for (const Complex& t : c.pa.fir) fir.push_back({t.real(), t.imag()});
    j["dataset"]["synthetic"] = {
        {"m", c.signal.m},           {"tone_count", c.signal.tone_count},
        {"seed", c.signal.seed},     {"peak", c.signal.peak},
        {"gain_target", c.gain_target},
        {"pa", {{"g0", c.pa.g0}, {"a_sat", c.pa.a_sat}, {"am_pm", c.pa.am_pm},
                {"fir", fir}}}};
  } else {
    j["dataset"]["file"] = c.dataset_file;
  }
  j["model"] = json::parse(model_config_to_json(c.model));
  j["init"] = {{"scheme", c.init_scheme},
               {"seed", c.init_seed},
               {"alpha", c.init_alpha},
               {"identity_gain", c.init_identity_gain}};
  j["optimizer"] = {{"method", c.method},
                    {"variant", c.variant},
                    {"cg_variant", c.cg_variant},
                    {"history", c.history},
                    {"d_level", c.d_level},
                    {"k_rs", c.k_rs},
                    {"f_star", c.f_star},
                    {"p", c.p},
                    {"p_mult", c.p_mult},
                    {"l0", c.l0},
                    {"batch_size", c.batch_size},
                    {"step_size", c.step_size},
                    {"seed", c.run_seed},
                    {"box_half_width", c.box_half_width},
                    {"t0", c.sa_t0},
                    {"k_jump", c.sa_k_jump},
                    {"d_jump", c.sa_d_jump},
                    {"k_cg", c.k_cg},
                    {"m_pop", c.de_m_pop},
                    {"F", c.de_f},
                    {"CR", c.de_cr},
                    {"eps_bio", c.de_eps_bio},
                    {"n_starts", c.n_starts},
                    {"start_half_width", c.start_half_width}};
  j["budget"] = {{"max_iterations", c.budget.max_iterations},
                 {"max_seconds", std::isfinite(c.budget.max_seconds)
                                     ? json(c.budget.max_seconds)
                                     : json()},
                 {"grad_tol", c.budget.grad_tol}};
  j["thresholds_db"] = c.thresholds_db;
  j["train_fraction"] = c.train_fraction;
  j["record_interval"] = c.record_interval;
  j["group"] = c.group;
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  reject_unknown(j, {"schema_version", "dataset", "model", "init", "optimizer",
                     "budget", "thresholds_db", "train_fraction",
                     "record_interval", "group"},
                 "config");
  if (j.value("schema_version", 0) != 1) {
    throw std::invalid_argument("config: schema_version must be 1");
  }
  ExperimentConfig c;

  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    reject_unknown(d, {"synthetic", "file"}, "dataset");
    if (d.contains("file")) {
      c.synthetic = false;
      c.dataset_file = d.at("file").get<std::string>();
    } else if (d.contains("synthetic")) {
      const json& s = d.at("synthetic");
      reject_unknown(s, {"m", "tone_count", "seed", "peak", "gain_target", "pa"},
                     "dataset.synthetic");
      if (s.contains("m")) c.signal.m = s.at("m").get<int>();
      if (s.contains("tone_count")) c.signal.tone_count = s.at("tone_count").get<int>();
      if (s.contains("seed")) c.signal.seed = s.at("seed").get<std::uint64_t>();
      if (s.contains("peak")) c.signal.peak = s.at("peak").get<double>();
      if (s.contains("gain_target")) c.gain_target = s.at("gain_target").get<double>();
      if (s.contains("pa")) {
        const json& p = s.at("pa");
        reject_unknown(p, {"g0", "a_sat", "am_pm", "fir"}, "dataset.synthetic.pa");
        if (p.contains("g0")) c.pa.g0 = p.at("g0").get<double>();
        if (p.contains("a_sat")) c.pa.a_sat = p.at("a_sat").get<double>();
        if (p.contains("am_pm")) c.pa.am_pm = p.at("am_pm").get<double>();
        if (p.contains("fir")) {
          c.pa.fir.clear();
          for (const json& tap : p.at("fir")) {
            c.pa.fir.emplace_back(tap.at(0).get<double>(), tap.at(1).get<double>());
          }
        }
      }
    }
  }

  if (j.contains("model")) c.model = model_config_from_json(j.at("model").dump());

  if (j.contains("init")) {
    const json& i = j.at("init");
    reject_unknown(i, {"scheme", "seed", "alpha", "identity_gain"}, "init");
    if (i.contains("scheme")) c.init_scheme = i.at("scheme").get<std::string>();
    if (i.contains("seed")) c.init_seed = i.at("seed").get<std::uint64_t>();
    if (i.contains("alpha")) c.init_alpha = i.at("alpha").get<double>();
    if (i.contains("identity_gain")) c.init_identity_gain = i.at("identity_gain").get<bool>();
    if (c.init_scheme != "shifted" && c.init_scheme != "xavier" &&
        c.init_scheme != "he") {
      throw std::invalid_argument("init: unknown scheme '" + c.init_scheme + "'");
    }
  }

  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    reject_unknown(o, {"method", "variant", "cg_variant", "history", "d_level",
                       "k_rs", "f_star", "p", "p_mult", "l0", "batch_size",
                       "step_size", "seed", "box_half_width", "t0", "k_jump",
                       "d_jump", "k_cg", "m_pop", "F", "CR", "eps_bio",
                       "n_starts", "start_half_width"},
                   "optimizer");
    if (o.contains("method")) c.method = o.at("method").get<std::string>();
    if (o.contains("variant")) c.variant = o.at("variant").get<int>();
    if (o.contains("cg_variant")) c.cg_variant = o.at("cg_variant").get<std::string>();
    if (o.contains("history")) c.history = o.at("history").get<int>();
    if (o.contains("d_level")) c.d_level = o.at("d_level").get<double>();
    if (o.contains("k_rs")) c.k_rs = o.at("k_rs").get<long>();
    if (o.contains("f_star")) c.f_star = o.at("f_star").get<double>();
    if (o.contains("p")) c.p = o.at("p").get<int>();
    if (o.contains("p_mult")) c.p_mult = o.at("p_mult").get<double>();
    if (o.contains("l0")) c.l0 = o.at("l0").get<double>();
    if (o.contains("batch_size")) c.batch_size = o.at("batch_size").get<int>();
    if (o.contains("step_size")) c.step_size = o.at("step_size").get<double>();
    if (o.contains("seed")) c.run_seed = o.at("seed").get<std::uint64_t>();
    if (o.contains("box_half_width")) c.box_half_width = o.at("box_half_width").get<double>();
    if (o.contains("t0")) c.sa_t0 = o.at("t0").get<double>();
    if (o.contains("k_jump")) c.sa_k_jump = o.at("k_jump").get<int>();
    if (o.contains("d_jump")) c.sa_d_jump = o.at("d_jump").get<double>();
    if (o.contains("k_cg")) c.k_cg = o.at("k_cg").get<int>();
    if (o.contains("m_pop")) c.de_m_pop = o.at("m_pop").get<int>();
    if (o.contains("F")) c.de_f = o.at("F").get<double>();
    if (o.contains("CR")) c.de_cr = o.at("CR").get<double>();
    if (o.contains("eps_bio")) c.de_eps_bio = o.at("eps_bio").get<double>();
    if (o.contains("n_starts")) c.n_starts = o.at("n_starts").get<int>();
    if (o.contains("start_half_width")) c.start_half_width = o.at("start_half_width").get<double>();
  }

  if (j.contains("budget")) {
    const json& b = j.at("budget");
    reject_unknown(b, {"max_iterations", "max_seconds", "grad_tol", "target_f"},
                   "budget");
    if (b.contains("max_iterations")) c.budget.max_iterations = b.at("max_iterations").get<long>();
    if (b.contains("max_seconds") && !b.at("max_seconds").is_null()) {
      c.budget.max_seconds = b.at("max_seconds").get<double>();
    }
    if (b.contains("grad_tol")) c.budget.grad_tol = b.at("grad_tol").get<double>();
    if (b.contains("target_f")) c.budget.target_f = b.at("target_f").get<double>();
  }

  if (j.contains("thresholds_db")) c.thresholds_db = j.at("thresholds_db").get<std::vector<double>>();
  if (j.contains("train_fraction")) c.train_fraction = j.at("train_fraction").get<double>();
  if (j.contains("record_interval")) c.record_interval = j.at("record_interval").get<long>();
  if (j.contains("group")) c.group = j.at("group").get<std::string>();

  if (c.train_fraction <= 0.0 || c.train_fraction >= 1.0) {
    throw std::invalid_argument("config: train_fraction must lie in (0, 1)");
  }
  if (c.record_interval < 1) {
    throw std::invalid_argument("config: record_interval < 1");
  }
  return c;
}

Dataset build_dataset(const ExperimentConfig& cfg) {
  if (cfg.synthetic) return make_dpd_dataset(cfg.signal, cfg.pa, cfg.gain_target);
  return load_dataset_file(cfg.dataset_file);
}

Vec build_init(const ExperimentConfig& cfg) {
  if (cfg.init_scheme == "xavier") return init_xavier(cfg.model, cfg.init_seed);
  if (cfg.init_scheme == "he") return init_he(cfg.model, cfg.init_seed);
  return init_shifted(cfg.model, cfg.init_alpha, Complex(1.0, 0.0),
                      cfg.init_identity_gain);
}

}  // namespace

std::uint64_t ExperimentConfig::fingerprint() const {
  return fnv1a(config_to_json(*this).dump());
}

ExperimentConfig experiment_config_from_json(const std::string& json_text) {
  return config_from_json(json::parse(json_text));
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot open config: " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return experiment_config_from_json(ss.str());
}

std::vector<std::optional<double>> time_to_threshold(
    const RunTrace& trace, const std::vector<double>& thresholds_db) {
  if (trace.rows.empty()) throw std::invalid_argument("time_to_threshold: empty trace");
  std::vector<std::optional<double>> out(thresholds_db.size());
  for (std::size_t t = 0; t < thresholds_db.size(); ++t) {
    for (const TraceRow& r : trace.rows) {
      if (r.train_nmse_db <= thresholds_db[t]) {
        out[t] = r.wall_s;
        break;
      }
    }
  }
  return out;
}

namespace {

RunTrace dispatch(const ExperimentConfig& cfg, const ResidualSystem& train,
                  const ResidualSystem& val, Vec& theta) {
  const std::string& m = cfg.method;
  const Objective obj = make_objective(train, &val);
  const long ri = cfg.record_interval;
  if (m == "sdm") return sdm_run(obj, theta, cfg.budget, {}, ri);
  if (m == "polyak") return polyak_run(obj, theta, cfg.budget, cfg.f_star, cfg.variant, ri);
  if (m == "bb") return bb_run(obj, theta, cfg.budget, cfg.variant, ri);
  if (m == "raider") return raider_run(obj, theta, cfg.budget, cfg.d_level, ri);
  if (m == "cg") {
    return cg_run(obj, theta, cfg.budget, cg_variant_from_name(cfg.cg_variant),
                  cfg.k_rs, {}, ri);
  }
  if (m == "bfgs") return bfgs_dfp_run(obj, theta, cfg.budget, QuasiNewtonRule::kBfgs, cfg.k_rs, {}, ri);
  if (m == "dfp") return bfgs_dfp_run(obj, theta, cfg.budget, QuasiNewtonRule::kDfp, cfg.k_rs, {}, ri);
  if (m == "lbfgs") return lbfgs_run(obj, theta, cfg.budget, cfg.history, {}, ri);
  if (m == "tsm") return tsm_run(train, theta, cfg.budget, cfg.l0, &val, ri);
  if (m == "nsgn") return nsgn_run(train, theta, cfg.budget, cfg.l0, &val, ri);
  if (m == "ssm") {
    int p = cfg.p;
    if (p < 0) p = static_cast<int>(std::lround(cfg.p_mult * train.param_dim()));
    p = std::clamp(p, 0, train.residual_count());
    return ssm_run(train, theta, cfg.budget, p, cfg.l0, cfg.run_seed, &val, ri);
  }
  if (m == "lm") return lm_run(train, theta, cfg.budget, cfg.variant, &val, ri);
  if (m == "sgd" || m == "adam" || m == "adagrad" || m == "adadelta" ||
      m == "adamax" || m == "rmsprop") {
    return stochastic_run(train, theta, cfg.budget, stoch_method_from_name(m),
                          cfg.batch_size, cfg.step_size, cfg.run_seed, &val, ri);
  }
  if (m == "sa") {
    SaParams p{cfg.sa_t0, cfg.k_cg, cfg.sa_k_jump, cfg.sa_d_jump};
    return simulated_annealing(obj, theta, cfg.budget, p,
                               BoxBounds::cube(obj.dim, cfg.box_half_width),
                               cfg.run_seed, ri);
  }
  if (m == "de") {
    DeParams p{cfg.de_m_pop, cfg.k_cg, cfg.de_f, cfg.de_cr, cfg.de_eps_bio};
    return differential_evolution(obj, theta, cfg.budget, p,
                                  BoxBounds::cube(obj.dim, cfg.box_half_width),
                                  cfg.run_seed, ri);
  }
  throw std::invalid_argument("optimizer: unknown method '" + m + "'");
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void write_summary(const ExperimentConfig& cfg, const ExperimentResult& res,
                   const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open summary: " + path);
  out << "fingerprint=" << cfg.fingerprint() << "\n";
  out << "method=" << cfg.method << "\n";
  out << "status=" << stop_status_name(res.trace.status) << "\n";
  out << "iterations=" << res.trace.back().iter << "\n";
  out << "final_f=" << fmt(res.trace.back().f) << "\n";
  out << "train_nmse_db=" << fmt(res.train_nmse_db) << "\n";
  out << "val_nmse_db=" << fmt(res.val_nmse_db) << "\n";
  for (std::size_t t = 0; t < cfg.thresholds_db.size(); ++t) {
    out << "time_to_" << cfg.thresholds_db[t] << "dB=";
    if (res.threshold_seconds[t]) out << fmt(*res.threshold_seconds[t]);
    out << "\n";
  }
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const std::string& out_dir) {
  const Dataset data = build_dataset(cfg);
  auto [train_data, val_data] = split_sequential(data, cfg.train_fraction);
  const ResidualSystem train(cfg.model, train_data);
  const ResidualSystem val(cfg.model, val_data);

  ExperimentResult res;
  res.theta = build_init(cfg);
  res.trace = dispatch(cfg, train, val, res.theta);
  res.trace.fingerprint = cfg.fingerprint();
  res.train_nmse_db = train.nmse(res.theta);
  res.val_nmse_db = val.nmse(res.theta);
  res.threshold_seconds = time_to_threshold(res.trace, cfg.thresholds_db);

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_trace_csv(res.trace, out_dir + "/trace.csv");
    write_summary(cfg, res, out_dir + "/summary.txt");
    save_params_file(res.theta, cfg.model, out_dir + "/params.json");
  }
  return res;
}

std::vector<SweepRow> config_sweep(const std::vector<ExperimentConfig>& configs,
                                   const std::string& out_dir) {
  // Configs sharing a group tag claim equal model capacity; verify before
  // spending any compute.
  std::map<std::string, int> group_count;
  for (const ExperimentConfig& c : configs) {
    if (c.group.empty()) continue;
    const int n = c.model.complex_param_count();
    auto [it, inserted] = group_count.emplace(c.group, n);
    if (!inserted && it->second != n) {
      throw std::invalid_argument("sweep group '" + c.group +
                                  "': parameter counts differ (" +
                                  std::to_string(it->second) + " vs " +
                                  std::to_string(n) + ")");
    }
  }
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const ExperimentConfig& c = configs[i];
    const std::string sub =
        out_dir.empty() ? "" : out_dir + "/run_" + std::to_string(i);
    const ExperimentResult r = run_experiment(c, sub);
    SweepRow row;
    row.group = c.group;
    row.layers = c.model.layers;
    row.blocks = c.model.blocks_at(0);
    row.complex_params = c.model.complex_param_count();
    row.final_train_nmse_db = r.train_nmse_db;
    row.final_val_nmse_db = r.val_nmse_db;
    row.threshold_seconds = r.threshold_seconds;
    rows.push_back(std::move(row));
  }
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream out(out_dir + "/sweep.csv");
    out.precision(17);
    out << "group,layers,blocks,complex_params,train_nmse_db,val_nmse_db\n";
    for (const SweepRow& r : rows) {
      out << r.group << ',' << r.layers << ',' << r.blocks << ','
          << r.complex_params << ',' << r.final_train_nmse_db << ','
          << r.final_val_nmse_db << '\n';
    }
  }
  return rows;
}

std::vector<OverfitRow> overfitting_report(const ExperimentConfig& cfg,
                                           const std::vector<double>& fractions,
                                           const std::string& out_dir) {
  std::vector<OverfitRow> rows;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    if (fractions[i] <= 0.0 || fractions[i] >= 1.0) {
      throw std::invalid_argument("overfit: fraction must lie in (0, 1)");
    }
    ExperimentConfig c = cfg;
    c.train_fraction = fractions[i];
    const std::string sub =
        out_dir.empty() ? "" : out_dir + "/frac_" + std::to_string(i);
    const ExperimentResult r = run_experiment(c, sub);
    rows.push_back({fractions[i], r.train_nmse_db, r.val_nmse_db,
                    r.val_nmse_db - r.train_nmse_db});
  }
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream out(out_dir + "/overfit.csv");
    out.precision(17);
    out << "fraction,train_nmse_db,val_nmse_db,gap_db\n";
    for (const OverfitRow& r : rows) {
      out << r.fraction << ',' << r.train_nmse_db << ',' << r.val_nmse_db
          << ',' << r.gap_db << '\n';
    }
  }
  return rows;
}

std::vector<MultistartRow> multistart_report(const ExperimentConfig& cfg,
                                             const std::string& out_dir) {
  const Dataset data = build_dataset(cfg);
  auto [train_data, val_data] = split_sequential(data, cfg.train_fraction);
  const ResidualSystem train(cfg.model, train_data);
  const Objective obj = make_objective(train);
  const BoxBounds box = BoxBounds::cube(obj.dim, cfg.start_half_width);
  const auto results =
      multistart(obj, cfg.n_starts, box, cfg.run_seed, cfg.budget, cfg.history);
  std::vector<MultistartRow> rows;
  rows.reserve(results.size());
  for (const StartResult& r : results) {
    rows.push_back({obj.eval(r.start), r.f_final, r.metric_final});
  }
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream out(out_dir + "/multistart.csv");
    out.precision(17);
    out << "f_start,f_final,nmse_final_db\n";
    for (const MultistartRow& r : rows) {
      out << r.f_start << ',' << r.f_final << ',' << r.nmse_final_db << '\n';
    }
  }
  return rows;
}

}  // namespace dpd

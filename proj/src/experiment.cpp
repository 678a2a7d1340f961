#include "fgd/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;

namespace fgd {

namespace {

// ---------------------------------------------------------------------------
// flat key = value parsing
// ---------------------------------------------------------------------------

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

struct Section {
  std::string kind;  // "", "scenario", "algorithm"
  std::string name;
  std::map<std::string, std::string> values;
  std::map<std::string, int> lines;
};

struct RawConfig {
  Section globals;
  std::vector<Section> sections;
};

RawConfig tokenize(const std::string& text, std::vector<std::string>& errors) {
  RawConfig raw;
  Section* current = &raw.globals;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line.substr(0, line.find('#')));
    if (stripped.empty()) continue;
    if (stripped.front() == '[') {
      if (stripped.back() != ']') {
        errors.push_back("line " + std::to_string(lineno) + ": unterminated section header");
        continue;
      }
      std::istringstream header(stripped.substr(1, stripped.size() - 2));
      Section section;
      header >> section.kind >> section.name;
      if (section.kind != "scenario" && section.kind != "algorithm") {
        errors.push_back("line " + std::to_string(lineno) + ": section kind must be " +
                         "'scenario' or 'algorithm', got '" + section.kind + "'");
      }
      if (section.name.empty())
        errors.push_back("line " + std::to_string(lineno) + ": section needs a name");
      raw.sections.push_back(std::move(section));
      current = &raw.sections.back();
      continue;
    }
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      errors.push_back("line " + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) {
      errors.push_back("line " + std::to_string(lineno) + ": empty key");
      continue;
    }
    if (current->values.count(key))
      errors.push_back("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    current->values[key] = value;
    current->lines[key] = lineno;
  }
  return raw;
}

class SectionReader {
 public:
  SectionReader(const Section& section, const std::string& where,
                std::vector<std::string>& errors)
      : section_(section), where_(where), errors_(errors) {}

  bool has(const std::string& key) const { return section_.values.count(key) > 0; }

  std::string str(const std::string& key, const std::string& fallback) {
    used_.insert(key);
    const auto it = section_.values.find(key);
    return it == section_.values.end() ? fallback : it->second;
  }

  double number(const std::string& key, double fallback) {
    used_.insert(key);
    const auto it = section_.values.find(key);
    if (it == section_.values.end()) return fallback;
    try {
      size_t pos = 0;
      const double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("trailing text");
      return v;
    } catch (const std::exception&) {
      fail(key, "is not a number (got '" + it->second + "')");
      return fallback;
    }
  }

  int integer(const std::string& key, int fallback) {
    const double v = number(key, fallback);
    if (v != std::floor(v)) fail(key, "must be an integer");
    return static_cast<int>(v);
  }

  bool boolean(const std::string& key, bool fallback) {
    used_.insert(key);
    const auto it = section_.values.find(key);
    if (it == section_.values.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    fail(key, "must be true or false");
    return fallback;
  }

  std::vector<double> number_list(const std::string& key) {
    used_.insert(key);
    std::vector<double> out;
    const auto it = section_.values.find(key);
    if (it == section_.values.end()) return out;
    std::istringstream in(it->second);
    std::string token;
    while (std::getline(in, token, ',')) {
      try {
        out.push_back(std::stod(trim(token)));
      } catch (const std::exception&) {
        fail(key, "has a non-numeric entry '" + trim(token) + "'");
      }
    }
    return out;
  }

  void fail(const std::string& key, const std::string& what) {
    const auto it = section_.lines.find(key);
    const std::string loc = it != section_.lines.end()
                                ? "line " + std::to_string(it->second) + ": "
                                : "";
    errors_.push_back(loc + where_ + ": '" + key + "' " + what);
  }

  void check_unknown_keys() {
    for (const auto& [key, value] : section_.values)
      if (!used_.count(key))
        errors_.push_back("line " + std::to_string(section_.lines.at(key)) + ": " + where_ +
                          ": unknown key '" + key + "'");
  }

 private:
  const Section& section_;
  std::string where_;
  std::vector<std::string>& errors_;
  std::set<std::string> used_;
};

Vec to_vec(const std::vector<double>& v) {
  Vec out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = v[i];
  return out;
}

ScenarioSpec parse_scenario(const Section& section, std::vector<std::string>& errors) {
  SectionReader r(section, "scenario " + section.name, errors);
  ScenarioSpec spec;
  DriftScenario& s = spec.scenario;
  s.name = section.name;

  const std::string kind = r.str("kind", "periodic_rotation");
  if (kind == "periodic_rotation") s.kind = DriftKind::periodic_rotation;
  else if (kind == "linear_drift") s.kind = DriftKind::linear_drift;
  else if (kind == "piecewise_stationary") s.kind = DriftKind::piecewise_stationary;
  else if (kind == "random_walk") s.kind = DriftKind::random_walk;
  else
    r.fail("kind", "must be one of periodic_rotation, linear_drift, piecewise_stationary, "
                   "random_walk");

  const std::string task = r.str("task", "regression");
  if (task == "regression") s.task = TaskKind::regression;
  else if (task == "classification") s.task = TaskKind::classification;
  else r.fail("task", "must be regression or classification");

  s.d = r.integer("d", 16);
  if (s.d < 1) r.fail("d", "must be >= 1");
  s.n_per_round = r.integer("n", 1024);
  if (s.n_per_round < 1) r.fail("n", "must be >= 1");
  s.noise = r.number("noise", 0.1);
  if (s.noise < 0) r.fail("noise", "must be >= 0");
  s.period = r.integer("period", 1);
  if (s.kind == DriftKind::periodic_rotation && s.period < 1) r.fail("period", "must be >= 1");
  s.angle_step = r.number("angle_step", 0.0);
  s.segment_len = r.integer("segment_len", 50);
  if (s.kind == DriftKind::piecewise_stationary && s.segment_len < 1)
    r.fail("segment_len", "must be >= 1");
  s.jump_scale = r.number("jump_scale", 1.0);
  s.step_scale = r.number("step_scale", 0.1);

  const std::vector<double> velocity = r.number_list("velocity");
  if (!velocity.empty()) {
    if (velocity.size() == 1) {
      Vec v = Vec::Zero(s.d);
      v[0] = velocity[0];
      s.velocity = v;
    } else if (static_cast<int>(velocity.size()) == s.d) {
      s.velocity = to_vec(velocity);
    } else {
      r.fail("velocity", "needs 1 or d entries");
    }
  }
  const std::vector<double> beta0 = r.number_list("beta0");
  if (!beta0.empty()) {
    if (static_cast<int>(beta0.size()) == s.d) s.beta0 = to_vec(beta0);
    else r.fail("beta0", "needs d entries");
  }
  const std::vector<double> mean0 = r.number_list("mean0");
  if (!mean0.empty()) {
    if (static_cast<int>(mean0.size()) == s.d) s.mean0 = to_vec(mean0);
    else r.fail("mean0", "needs d entries");
  }

  const std::string model = r.str("model", "linear_squared");
  if (model == "linear_squared") spec.model_kind = ModelKind::linear_squared;
  else if (model == "logistic") spec.model_kind = ModelKind::logistic;
  else if (model == "mlp") spec.model_kind = ModelKind::mlp;
  else r.fail("model", "must be one of linear_squared, logistic, mlp");
  spec.mlp_hidden = r.integer("hidden", 8);
  if (spec.mlp_hidden < 1) r.fail("hidden", "must be >= 1");

  if (s.kind == DriftKind::periodic_rotation && s.period > 1 && s.d < 2)
    r.fail("d", "must be >= 2 for a periodic rotation");

  r.check_unknown_keys();
  return spec;
}

AlgorithmSpec parse_algorithm(const Section& section, std::vector<std::string>& errors) {
  SectionReader r(section, "algorithm " + section.name, errors);
  AlgorithmSpec spec;
  spec.name = section.name;
  TrainerConfig& t = spec.trainer;

  const std::string kind = r.str("kind", "");
  if (kind == "iu") t.algorithm = Algorithm::iu;
  else if (kind == "bu") t.algorithm = Algorithm::bu;
  else if (kind == "mgd_lag") { t.algorithm = Algorithm::mgd; }
  else if (kind == "mgd_ideal") { t.algorithm = Algorithm::mgd; spec.mgd_ideal = true; }
  else if (kind == "fgd_linear") t.algorithm = Algorithm::fgd_linear;
  else if (kind == "fgd_neural") t.algorithm = Algorithm::fgd_neural;
  else
    r.fail("kind", "must be one of iu, bu, mgd_lag, mgd_ideal, fgd_linear, fgd_neural");

  t.b = r.integer("b", 1);
  if (t.b < 1) r.fail("b", "must be >= 1");
  if (t.algorithm == Algorithm::iu && t.b != 1) r.fail("b", "must be 1 for iu");
  t.w = r.integer("w", 1);
  if (t.w < 1) r.fail("w", "must be >= 1");
  t.delta = r.number("delta", 1e-2);
  if (t.delta < 0) r.fail("delta", "must be >= 0");
  t.eta = r.number("eta", 0.2);
  if (t.eta <= 0) r.fail("eta", "must be > 0");
  t.max_inner_iters = r.integer("max_inner_iters", 10000);
  if (t.max_inner_iters < 1) r.fail("max_inner_iters", "must be >= 1");

  t.one_pass = r.boolean("one_pass", true);
  const std::string ws = r.str("warm_start", t.one_pass ? "window_back" : "previous");
  if (ws == "previous") t.warm_start = WarmStart::previous;
  else if (ws == "window_back") t.warm_start = WarmStart::window_back;
  else if (ws == "fresh") t.warm_start = WarmStart::fresh;
  else r.fail("warm_start", "must be one of previous, window_back, fresh");

  t.mini_batch = r.integer("mini_batch", 256);
  if (t.mini_batch < 1) r.fail("mini_batch", "must be >= 1");
  t.theta_init_scale = r.number("theta_init_scale", 0.5);
  t.eta_phi = r.number("eta_phi", -1.0);
  t.meta_steps = r.integer("meta_steps", 20);
  if (t.meta_steps < 0) r.fail("meta_steps", "must be >= 0");
  t.buffer_stride = r.integer("buffer_stride", 10);
  if (t.buffer_stride < 1) r.fail("buffer_stride", "must be >= 1");
  t.d2 = r.integer("d2", 8);
  t.mlp_hidden = r.integer("mlp_hidden", 16);
  t.trace = r.boolean("trace", false);

  spec.mgd_lag = r.integer("lag", 0);
  if (kind == "mgd_lag" && spec.mgd_lag < 1)
    r.fail("lag", "must be >= 1 for mgd_lag");

  r.check_unknown_keys();
  return spec;
}

}  // namespace

ConfigParseResult parse_config_text(const std::string& text) {
  ConfigParseResult result;
  RawConfig raw = tokenize(text, result.errors);

  ExperimentConfig& config = result.config;
  SectionReader g(raw.globals, "global", result.errors);
  config.T = g.integer("T", 100);
  if (config.T < 1) g.fail("T", "must be >= 1");
  const std::vector<double> seeds = g.number_list("seeds");
  if (g.has("seeds")) {
    config.seeds.clear();
    for (double s : seeds) {
      if (s < 0 || s != std::floor(s)) g.fail("seeds", "must be nonnegative integers");
      else config.seeds.push_back(static_cast<uint64_t>(s));
    }
  }
  if (config.seeds.empty()) g.fail("seeds", "must be a non-empty list");
  config.out_dir = g.str("out", "out");
  config.workers = g.integer("workers", 1);
  if (config.workers < 1) g.fail("workers", "must be >= 1");
  const std::string source = g.str("gradient_source", "empirical");
  if (source == "empirical") config.source = GradientSourceKind::empirical;
  else if (source == "population") config.source = GradientSourceKind::population;
  else g.fail("gradient_source", "must be empirical or population");
  config.emit_ledgers = g.boolean("emit_ledgers", true);
  config.emit_bound_reports = g.boolean("emit_bound_reports", true);
  config.emit_plot_data = g.boolean("emit_plot_data", false);
  config.emit_checkpoints = g.boolean("emit_checkpoints", false);
  config.probe_count = g.integer("probe_count", 16);
  if (config.probe_count < 0) g.fail("probe_count", "must be >= 0");
  config.probe_lo = g.number("probe_lo", -2.0);
  config.probe_hi = g.number("probe_hi", 2.0);
  if (config.probe_lo > config.probe_hi) g.fail("probe_lo", "must be <= probe_hi");
  g.check_unknown_keys();

  for (const Section& section : raw.sections) {
    if (section.kind == "scenario") {
      ScenarioSpec spec = parse_scenario(section, result.errors);
      result.config.scenarios.push_back(std::move(spec));
    } else if (section.kind == "algorithm") {
      AlgorithmSpec spec = parse_algorithm(section, result.errors);
      result.config.algorithms.push_back(std::move(spec));
    }
  }
  if (config.scenarios.empty()) result.errors.push_back("config defines no scenarios");
  if (config.algorithms.empty()) result.errors.push_back("config defines no algorithms");

  // cross checks
  for (const ScenarioSpec& s : config.scenarios) {
    if (config.source == GradientSourceKind::population &&
        (s.model_kind != ModelKind::linear_squared || s.scenario.task != TaskKind::regression))
      result.errors.push_back("scenario " + s.scenario.name +
                              ": population gradients need model = linear_squared and "
                              "task = regression");
    for (const AlgorithmSpec& a : config.algorithms) {
      if (a.trainer.one_pass && config.source == GradientSourceKind::population)
        result.errors.push_back("algorithm " + a.name +
                                ": one_pass needs gradient_source = empirical");
    }
  }
  return result;
}

ConfigParseResult validate_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    ConfigParseResult result;
    result.errors.push_back("cannot read config file '" + path + "'");
    return result;
  }
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str());
}

// ---------------------------------------------------------------------------
// run matrix
// ---------------------------------------------------------------------------

namespace {

std::string fmt_num(double x) {
  if (!std::isfinite(x)) return "";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

void atomic_write(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ConfigError("cannot open " + tmp + " for writing");
    out << content;
  }
  fs::rename(tmp, path);
}

LossModelSpec model_for(const ScenarioSpec& spec) {
  switch (spec.model_kind) {
    case ModelKind::linear_squared: return LossModelSpec::linear_squared(spec.scenario.d);
    case ModelKind::logistic: return LossModelSpec::logistic(spec.scenario.d);
    case ModelKind::mlp: return LossModelSpec::mlp(spec.scenario.d, spec.mlp_hidden);
  }
  throw ConfigError("unknown model kind");
}

// Closed-form-speed oracle for grad r_t: population moments when admissible,
// otherwise per-round empirical second moments (linear-squared) or plain
// batch gradients.
RoundGradOracle make_grad_oracle(const DriftScenario& scenario, const LossModelSpec& model,
                                 GradientSourceKind kind) {
  if (kind == GradientSourceKind::population) {
    return [scenario, model](int t, const Vec& theta) -> Vec {
      if (t < 1) return Vec::Zero(theta.size());
      return population_gradient(scenario, t, model, theta);
    };
  }
  if (model.kind == ModelKind::linear_squared) {
    auto cache = std::make_shared<std::map<int, std::pair<Mat, Vec>>>();
    return [scenario, model, cache](int t, const Vec& theta) -> Vec {
      if (t < 1) return Vec::Zero(theta.size());
      auto it = cache->find(t);
      if (it == cache->end()) {
        while (cache->size() >= 512) cache->erase(cache->begin());
        const DomainBatch batch = next_domain(scenario, t);
        Mat second = batch.features.transpose() * batch.features / batch.n();
        Vec cross = batch.features.transpose() * batch.labels / batch.n();
        it = cache->emplace(t, std::make_pair(std::move(second), std::move(cross))).first;
      }
      return 2.0 * (it->second.first * theta - it->second.second);
    };
  }
  auto source = std::make_shared<RoundSource>(scenario, model, GradientSourceKind::empirical);
  return [source](int t, const Vec& theta) { return source->grad_at(t, theta); };
}

struct Cell {
  int scenario_idx;
  int algorithm_idx;
  uint64_t seed;
};

CellResult run_cell(const ExperimentConfig& config, const ScenarioSpec& scen_spec,
                    const AlgorithmSpec& algo_spec, uint64_t seed) {
  CellResult cell;
  cell.scenario = scen_spec.scenario.name;
  cell.algorithm = algo_spec.name;
  cell.seed = seed;
  try {
    DriftScenario scenario = scen_spec.scenario;
    scenario.seed = seed;
    const LossModelSpec model = model_for(scen_spec);
    RoundSource source(scenario, model, config.source);

    GeneratorSchedule schedule;
    const GeneratorSchedule* schedule_ptr = nullptr;
    if (algo_spec.trainer.algorithm == Algorithm::mgd) {
      if (algo_spec.mgd_ideal) {
        // exogenous oracle: the realized round-t gradient itself
        schedule = GeneratorSchedule::from_oracle(
            make_grad_oracle(scenario, model, config.source));
      } else {
        schedule = GeneratorSchedule::lagged(algo_spec.mgd_lag);
      }
      schedule_ptr = &schedule;
    }

    RunResult run = run_trainer(algo_spec.trainer, source, config.T, seed, schedule_ptr);
    const RegretLedger& ledger = run.ledger;

    cell.r_w = local_regret(ledger, algo_spec.trainer.w);
    cell.final_forecast_err = ledger.rounds.back().forecast_err;
    double loss_sum = 0, auc_sum = 0;
    int loss_n = 0, auc_n = 0;
    for (const RoundRecord& r : ledger.rounds) {
      if (std::isfinite(r.eval_loss)) { loss_sum += r.eval_loss; ++loss_n; }
      if (std::isfinite(r.eval_auc)) { auc_sum += r.eval_auc; ++auc_n; }
    }
    if (loss_n > 0) cell.eval_loss_mean = loss_sum / loss_n;
    if (auc_n > 0) cell.eval_auc_mean = auc_sum / auc_n;

    // one-step inequality: ||grad u_{w,t}||^2 <= 2 delta^2 + (2/w^2) resid^2,
    // asserted at every threshold-terminated round
    const double w = algo_spec.trainer.w;
    const double delta = algo_spec.trainer.delta;
    for (const RoundRecord& r : ledger.rounds) {
      if (r.stop != StopReason::threshold) continue;
      if (!std::isfinite(r.resid_sq) || !std::isfinite(r.grad_u_sq)) continue;
      const double rhs = 2.0 * delta * delta + (2.0 / (w * w)) * r.resid_sq;
      if (r.grad_u_sq > rhs + 1e-9 * (1.0 + rhs)) ++cell.per_round_violations;
    }

    if (config.emit_ledgers) {
      const std::string name = cell.scenario + "__" + cell.algorithm + "__seed" +
                               std::to_string(seed) + ".jsonl";
      const fs::path dir = fs::path(config.out_dir) / "ledgers";
      fs::create_directories(dir);
      const std::string path = (dir / name).string();
      ledger.write_jsonl(path + ".tmp");
      fs::rename(path + ".tmp", path);
      cell.ledger_path = path;
    }

    if (config.emit_checkpoints &&
        (!run.phi_trajectory.empty() || !run.net_checkpoints.empty())) {
      const fs::path dir = fs::path(config.out_dir) / "checkpoints";
      fs::create_directories(dir);
      const std::string path = (dir / (cell.scenario + "__" + cell.algorithm + "__seed" +
                                       std::to_string(seed) + ".jsonl")).string();
      std::ostringstream out;
      const auto dump = [&out](const char* key, const std::vector<Vec>& rows) {
        for (size_t i = 0; i < rows.size(); ++i) {
          out << "{\"" << key << "\":" << i << ",\"values\":[";
          for (int j = 0; j < rows[i].size(); ++j)
            out << (j ? "," : "") << fmt_num(rows[i][j]);
          out << "]}\n";
        }
      };
      dump("phi_round", run.phi_trajectory);
      dump("net_round", run.net_checkpoints);
      atomic_write(path, out.str());
    }

    if (config.emit_bound_reports) {
      const bool is_bu = algo_spec.trainer.algorithm == Algorithm::bu ||
                         algo_spec.trainer.algorithm == Algorithm::iu;
      if (is_bu && algo_spec.trainer.b == algo_spec.trainer.w) {
        ProbeConfig pc;
        pc.lo = Vec::Constant(model.param_dim(), config.probe_lo);
        pc.hi = Vec::Constant(model.param_dim(), config.probe_hi);
        pc.count = config.probe_count;
        pc.seed = seed;
        std::vector<Vec> visited;
        for (const RoundRecord& r : ledger.rounds) visited.push_back(r.theta);
        const ProbeSet probe = build_probe_set(pc, visited);
        const RoundGradOracle oracle = make_grad_oracle(scenario, model, config.source);
        const double v_w =
            gradient_variation(oracle, probe, algo_spec.trainer.w, config.T);
        const BoundReport report = bound_check_batch_update(ledger, v_w, delta);
        bool all_threshold = true;
        for (const RoundRecord& r : ledger.rounds)
          all_threshold &= r.stop == StopReason::threshold;
        // the 2*delta^2 form needs delta-terminated training; the tight form
        // (measured training-side stationarity) holds for any stopping mode
        cell.bound_slack = all_threshold ? report.slack : report.slack_tight;
      } else if (algo_spec.trainer.algorithm == Algorithm::fgd_linear &&
                 algo_spec.trainer.b > 1 && ledger.eta_phi > 0.0) {
        const Vec phi_star = ledger_phi_star(ledger, seed);
        const BoundReport report = bound_check_meta_regret(ledger, phi_star, ledger.eta_phi,
                                                    algo_spec.trainer.b,
                                                    ledger.observed_grad_bound);
        cell.bound_slack = report.slack;
      }
    }
  } catch (const std::exception& e) {
    cell.failed = true;
    cell.diagnostic = e.what();
  }
  return cell;
}

double nan_mean(const std::vector<double>& xs) {
  double sum = 0;
  int n = 0;
  for (double x : xs)
    if (std::isfinite(x)) { sum += x; ++n; }
  return n > 0 ? sum / n : kNaN;
}

double nan_std(const std::vector<double>& xs) {
  const double mean = nan_mean(xs);
  if (!std::isfinite(mean)) return kNaN;
  double sum = 0;
  int n = 0;
  for (double x : xs)
    if (std::isfinite(x)) { sum += (x - mean) * (x - mean); ++n; }
  return n > 1 ? std::sqrt(sum / (n - 1)) : 0.0;
}

}  // namespace

MatrixResult run_matrix(const ExperimentConfig& config) {
  MatrixResult result;
  fs::create_directories(config.out_dir);

  for (const ScenarioSpec& s : config.scenarios)
    if (s.scenario.task == TaskKind::regression)
      std::cout << "note: scenario " << s.scenario.name
                << " is a regression stream; AUC columns are skipped\n";

  std::vector<Cell> cells;
  for (size_t si = 0; si < config.scenarios.size(); ++si)
    for (size_t ai = 0; ai < config.algorithms.size(); ++ai)
      for (uint64_t seed : config.seeds)
        cells.push_back({static_cast<int>(si), static_cast<int>(ai), seed});

  result.cells.resize(cells.size());
  std::atomic<size_t> next{0};
  const int workers = std::min<int>(config.workers, static_cast<int>(cells.size()));
  const auto work = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      const Cell& c = cells[i];
      result.cells[i] =
          run_cell(config, config.scenarios[c.scenario_idx], config.algorithms[c.algorithm_idx],
                   c.seed);
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < workers; ++i) pool.emplace_back(work);
    for (std::thread& th : pool) th.join();
  }

  // aggregate over seeds, preserving config order
  for (size_t si = 0; si < config.scenarios.size(); ++si) {
    for (size_t ai = 0; ai < config.algorithms.size(); ++ai) {
      TableRow row;
      row.scenario = config.scenarios[si].scenario.name;
      row.algorithm = config.algorithms[ai].name;
      std::vector<double> r_w, forecast, eval_loss, eval_auc;
      for (size_t i = 0; i < cells.size(); ++i) {
        if (cells[i].scenario_idx != static_cast<int>(si) ||
            cells[i].algorithm_idx != static_cast<int>(ai))
          continue;
        const CellResult& cell = result.cells[i];
        ++row.cells;
        if (cell.failed) { ++row.failed; continue; }
        r_w.push_back(cell.r_w);
        forecast.push_back(cell.final_forecast_err);
        eval_loss.push_back(cell.eval_loss_mean);
        eval_auc.push_back(cell.eval_auc_mean);
      }
      row.r_w_mean = nan_mean(r_w);
      row.r_w_std = nan_std(r_w);
      row.forecast_mean = nan_mean(forecast);
      row.forecast_std = nan_std(forecast);
      row.eval_loss_mean = nan_mean(eval_loss);
      row.eval_loss_std = nan_std(eval_loss);
      row.eval_auc_mean = nan_mean(eval_auc);
      row.eval_auc_std = nan_std(eval_auc);
      result.table.push_back(std::move(row));
    }
  }

  // comparison table CSV
  {
    std::ostringstream out;
    out << "scenario,algorithm,cells,failed,r_w_mean,r_w_std,forecast_final_mean,"
           "forecast_final_std,eval_loss_mean,eval_loss_std,eval_auc_mean,eval_auc_std\n";
    for (const TableRow& row : result.table) {
      out << row.scenario << ',' << row.algorithm << ',' << row.cells << ',' << row.failed << ','
          << fmt_num(row.r_w_mean) << ',' << fmt_num(row.r_w_std) << ','
          << fmt_num(row.forecast_mean) << ',' << fmt_num(row.forecast_std) << ','
          << fmt_num(row.eval_loss_mean) << ',' << fmt_num(row.eval_loss_std) << ','
          << fmt_num(row.eval_auc_mean) << ',' << fmt_num(row.eval_auc_std) << '\n';
    }
    atomic_write((fs::path(config.out_dir) / "comparison.csv").string(), out.str());
  }

  // bound report CSV + exit code
  bool any_failed = false, any_negative = false;
  {
    std::ostringstream out;
    out << "scenario,algorithm,seed,bound_slack,per_round_violations,failed,diagnostic\n";
    for (const CellResult& cell : result.cells) {
      out << cell.scenario << ',' << cell.algorithm << ',' << cell.seed << ','
          << fmt_num(cell.bound_slack) << ',' << cell.per_round_violations << ','
          << (cell.failed ? 1 : 0) << ',' << cell.diagnostic << '\n';
      any_failed |= cell.failed;
      if (std::isfinite(cell.bound_slack) && cell.bound_slack < 0) any_negative = true;
      if (cell.per_round_violations > 0) any_negative = true;
    }
    if (config.emit_bound_reports)
      atomic_write((fs::path(config.out_dir) / "bound_reports.csv").string(), out.str());
  }

  if (config.emit_plot_data) {
    std::vector<std::string> paths;
    for (const CellResult& cell : result.cells)
      if (!cell.ledger_path.empty()) paths.push_back(cell.ledger_path);
    emit_plot_data(paths, config.out_dir);
  }

  result.exit_code = any_failed || (config.emit_bound_reports && any_negative) ? 1 : 0;
  return result;
}

int emit_plot_data(const std::vector<std::string>& ledger_paths, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::ostringstream grad_out, forecast_out;
  grad_out << "round,iter,grad_sq_norm\n";
  forecast_out << "round,iter,forecast_error\n";
  int rows = 0;
  for (const std::string& path : ledger_paths) {
    const RegretLedger ledger = RegretLedger::read_jsonl(path);
    for (const TraceRecord& tr : ledger.traces) {
      grad_out << tr.t << ',' << tr.iter << ',' << fmt_num(tr.grad_sq) << '\n';
      forecast_out << tr.t << ',' << tr.iter << ',' << fmt_num(tr.forecast_err) << '\n';
      ++rows;
    }
  }
  if (rows == 0) {
    std::cout << "emit_plot_data: no per-iteration traces found; enable tracing to produce "
                 "plot data\n";
    return 0;
  }
  atomic_write((fs::path(out_dir) / "plot_grad_sq.csv").string(), grad_out.str());
  atomic_write((fs::path(out_dir) / "plot_forecast.csv").string(), forecast_out.str());
  return rows;
}

std::string format_table(const std::vector<TableRow>& table) {
  const auto short_num = [](double x) -> std::string {
    if (!std::isfinite(x)) return "-";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", x);
    return buf;
  };
  std::ostringstream out;
  out << "scenario            algorithm          R_w(T) mean+/-std      eval-loss    AUC\n";
  for (const TableRow& row : table) {
    char line[256];
    const std::string rw = short_num(row.r_w_mean) + " +/- " + short_num(row.r_w_std);
    std::snprintf(line, sizeof(line), "%-19s %-18s %-22s %-12s %s\n", row.scenario.c_str(),
                  row.algorithm.c_str(), rw.c_str(), short_num(row.eval_loss_mean).c_str(),
                  short_num(row.eval_auc_mean).c_str());
    out << line;
  }
  return out.str();
}

std::string report_ledger_dir(const std::string& dir) {
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".jsonl") paths.push_back(entry.path().string());
  std::sort(paths.begin(), paths.end());
  std::ostringstream out;
  out << "ledger,algorithm,scenario,seed,T,R_w,mean_eval_loss,threshold_rounds,cap_rounds\n";
  for (const std::string& path : paths) {
    const RegretLedger ledger = RegretLedger::read_jsonl(path);
    double loss_sum = 0;
    int loss_n = 0, thresh = 0, cap = 0;
    for (const RoundRecord& r : ledger.rounds) {
      if (std::isfinite(r.eval_loss)) { loss_sum += r.eval_loss; ++loss_n; }
      thresh += r.stop == StopReason::threshold;
      cap += r.stop == StopReason::iter_cap;
    }
    out << fs::path(path).filename().string() << ',' << ledger.algorithm << ','
        << ledger.scenario << ',' << ledger.seed << ',' << ledger.T << ','
        << fmt_num(local_regret(ledger, ledger.w)) << ','
        << fmt_num(loss_n ? loss_sum / loss_n : kNaN) << ',' << thresh << ',' << cap << '\n';
  }
  return out.str();
}

}  // namespace fgd

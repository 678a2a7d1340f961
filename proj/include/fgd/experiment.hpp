// Experiment orchestration: a run matrix of scenarios x algorithms x seeds,
// prequential evaluation, ledger persistence, bound reports, and plot-ready
// CSV emission.
//
// The config file is a flat key = value format with one [scenario NAME] or
// [algorithm NAME] section per entry; see validate_config for the accepted
// keys. All outputs are UTF-8 CSV / JSON-lines with LF endings, written
// atomically (temp file + rename), and byte-identical across reruns of the
// same config.

#ifndef FGD_EXPERIMENT_HPP
#define FGD_EXPERIMENT_HPP

#include <string>
#include <vector>

#include "fgd/trainers.hpp"

namespace fgd {

// An algorithm entry: trainer config plus everything needed to build it.
struct AlgorithmSpec {
  std::string name;
  TrainerConfig trainer;
  int mgd_lag = 0;         // mgd: lag-form generator
  bool mgd_ideal = false;  // mgd: oracle m(.;t) = grad r_t
};

struct ScenarioSpec {
  DriftScenario scenario;
  ModelKind model_kind = ModelKind::linear_squared;
  int mlp_hidden = 8;
};

struct ExperimentConfig {
  std::vector<ScenarioSpec> scenarios;
  std::vector<AlgorithmSpec> algorithms;
  std::vector<uint64_t> seeds = {1, 2, 3};
  int T = 100;
  std::string out_dir = "out";
  GradientSourceKind source = GradientSourceKind::empirical;
  int workers = 1;
  bool emit_ledgers = true;
  bool emit_bound_reports = true;
  bool emit_plot_data = false;
  bool emit_checkpoints = false;
  int probe_count = 16;
  double probe_lo = -2.0;
  double probe_hi = 2.0;
};

// Parses and fully validates; on failure every violation is reported, not
// just the first.
struct ConfigParseResult {
  ExperimentConfig config;
  std::vector<std::string> errors;
  bool ok() const { return errors.empty(); }
};

ConfigParseResult validate_config(const std::string& path);
ConfigParseResult parse_config_text(const std::string& text);

// One (scenario, algorithm, seed) cell of the matrix.
struct CellResult {
  std::string scenario;
  std::string algorithm;
  uint64_t seed = 0;
  bool failed = false;
  std::string diagnostic;
  double r_w = kNaN;
  double final_forecast_err = kNaN;
  double eval_loss_mean = kNaN;
  double eval_auc_mean = kNaN;
  int per_round_violations = 0;  // one-step inequality failures
  double bound_slack = kNaN;     // decomposition / meta-regret slack where applicable
  std::string ledger_path;
};

struct TableRow {
  std::string scenario;
  std::string algorithm;
  int cells = 0;
  int failed = 0;
  double r_w_mean = kNaN, r_w_std = kNaN;
  double forecast_mean = kNaN, forecast_std = kNaN;
  double eval_loss_mean = kNaN, eval_loss_std = kNaN;
  double eval_auc_mean = kNaN, eval_auc_std = kNaN;
};

struct MatrixResult {
  std::vector<CellResult> cells;
  std::vector<TableRow> table;
  int exit_code = 0;  // nonzero iff any cell failed or a bound check went negative
};

MatrixResult run_matrix(const ExperimentConfig& config);

// Long-format per-iteration traces from ledger files:
//   <out>/plot_grad_sq.csv      (round, iter, grad_sq_norm)
//   <out>/plot_forecast.csv     (round, iter, forecast_error)
// Returns the number of trace rows written; prints a notice when none exist.
int emit_plot_data(const std::vector<std::string>& ledger_paths, const std::string& out_dir);

// Human-readable summary of a finished matrix (stdout helper for the CLI).
std::string format_table(const std::vector<TableRow>& table);

// Aggregated report over the ledgers in a directory (CLI `report` verb).
std::string report_ledger_dir(const std::string& dir);

}  // namespace fgd

#endif  // FGD_EXPERIMENT_HPP

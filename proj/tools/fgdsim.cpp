// fgdsim: run experiment matrices over drifting synthetic streams, validate
// configs, and summarize ledger directories.

#include <CLI11.hpp>
#include <iostream>

#include "fgd/domain_stream.hpp"
#include "fgd/experiment.hpp"

namespace {

int cmd_validate(const std::string& path) {
  const fgd::ConfigParseResult parsed = fgd::validate_config(path);
  if (!parsed.ok()) {
    for (const std::string& error : parsed.errors) std::cerr << "error: " << error << "\n";
    return 1;
  }
  std::cout << "config ok: " << parsed.config.scenarios.size() << " scenario(s), "
            << parsed.config.algorithms.size() << " algorithm(s), "
            << parsed.config.seeds.size() << " seed(s), T=" << parsed.config.T << "\n";
  return 0;
}

int cmd_run(const std::string& path, int workers, const std::string& out, bool trace) {
  fgd::ConfigParseResult parsed = fgd::validate_config(path);
  if (!parsed.ok()) {
    for (const std::string& error : parsed.errors) std::cerr << "error: " << error << "\n";
    return 1;
  }
  if (workers > 0) parsed.config.workers = workers;
  if (!out.empty()) parsed.config.out_dir = out;
  if (trace) {
    parsed.config.emit_plot_data = true;
    for (fgd::AlgorithmSpec& algo : parsed.config.algorithms) algo.trainer.trace = true;
  }

  const fgd::MatrixResult result = fgd::run_matrix(parsed.config);
  std::cout << fgd::format_table(result.table);
  for (const fgd::CellResult& cell : result.cells) {
    if (cell.failed)
      std::cerr << "cell failed: " << cell.scenario << "/" << cell.algorithm << "/seed"
                << cell.seed << ": " << cell.diagnostic << "\n";
    if (cell.per_round_violations > 0)
      std::cerr << "bound violation: " << cell.scenario << "/" << cell.algorithm << "/seed"
                << cell.seed << ": " << cell.per_round_violations
                << " per-round inequality failure(s)\n";
  }
  std::cout << "outputs written to " << parsed.config.out_dir << "\n";
  return result.exit_code;
}

int cmd_report(const std::string& dir) {
  std::cout << fgd::report_ledger_dir(dir);
  return 0;
}

int cmd_dump(const std::string& config_path, const std::string& scenario_name, int rounds,
             uint64_t seed, const std::string& out_path) {
  const fgd::ConfigParseResult parsed = fgd::validate_config(config_path);
  if (!parsed.ok()) {
    for (const std::string& error : parsed.errors) std::cerr << "error: " << error << "\n";
    return 1;
  }
  for (const fgd::ScenarioSpec& spec : parsed.config.scenarios) {
    if (spec.scenario.name != scenario_name) continue;
    fgd::DriftScenario scenario = spec.scenario;
    scenario.seed = seed;
    fgd::dump_stream_csv(scenario, rounds, out_path);
    std::cout << "wrote " << rounds << " round(s) of " << scenario_name << " to " << out_path
              << "\n";
    return 0;
  }
  std::cerr << "error: config has no scenario named '" << scenario_name << "'\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"online learning under temporal domain shift: experiment runner"};
  app.require_subcommand(1);

  std::string config_path, out_dir, ledger_dir;
  int workers = 0;
  bool trace = false;

  CLI::App* run = app.add_subcommand("run", "execute an experiment matrix");
  run->add_option("config", config_path, "experiment config file")->required();
  run->add_option("--workers", workers, "concurrent cells");
  run->add_option("--out", out_dir, "output directory (overrides config)");
  run->add_flag("--trace", trace, "emit per-iteration traces and plot data");

  CLI::App* validate = app.add_subcommand("validate", "check a config file");
  validate->add_option("config", config_path, "experiment config file")->required();

  CLI::App* report = app.add_subcommand("report", "summarize a ledger directory");
  report->add_option("dir", ledger_dir, "directory of .jsonl ledgers")->required();

  std::string scenario_name, dump_path = "stream.csv";
  int dump_rounds = 10;
  uint64_t dump_seed = 1;
  CLI::App* dump = app.add_subcommand("dump", "write a scenario's stream to CSV");
  dump->add_option("config", config_path, "experiment config file")->required();
  dump->add_option("scenario", scenario_name, "scenario name from the config")->required();
  dump->add_option("--rounds", dump_rounds, "rounds to dump");
  dump->add_option("--seed", dump_seed, "stream seed");
  dump->add_option("--out", dump_path, "output CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, workers, out_dir, trace);
    if (validate->parsed()) return cmd_validate(config_path);
    if (report->parsed()) return cmd_report(ledger_dir);
    if (dump->parsed()) return cmd_dump(config_path, scenario_name, dump_rounds, dump_seed,
                                        dump_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

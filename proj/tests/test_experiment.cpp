#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fgd/experiment.hpp"

using namespace fgd;
namespace fs = std::filesystem;

namespace {

const char* kMinimalConfig = R"(
T = 5
seeds = 1

[scenario flat]
kind = periodic_rotation
period = 1
d = 3
n = 64

[algorithm iu]
kind = iu
delta = 0.01
eta = 0.3
)";

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("minimal config parses and echoes defaults") {
  const ConfigParseResult parsed = parse_config_text(kMinimalConfig);
  REQUIRE(parsed.ok());
  CHECK(parsed.config.T == 5);
  CHECK(parsed.config.seeds == std::vector<uint64_t>{1});
  REQUIRE(parsed.config.scenarios.size() == 1);
  CHECK(parsed.config.scenarios[0].scenario.name == "flat");
  CHECK(parsed.config.scenarios[0].scenario.n_per_round == 64);
  CHECK(parsed.config.scenarios[0].scenario.noise == 0.1);  // default
  REQUIRE(parsed.config.algorithms.size() == 1);
  CHECK(parsed.config.algorithms[0].trainer.algorithm == Algorithm::iu);
  CHECK(parsed.config.algorithms[0].trainer.b == 1);
  CHECK(parsed.config.algorithms[0].trainer.max_inner_iters == 10000);  // default
  CHECK(parsed.config.algorithms[0].trainer.one_pass);                  // one-pass by default
  CHECK(parsed.config.algorithms[0].trainer.warm_start == WarmStart::window_back);
  CHECK(parsed.config.workers == 1);
}

TEST_CASE("T = 0 is rejected with a named error") {
  const std::string text = std::string("T = 0\nseeds = 1\n") + R"(
[scenario s]
kind = periodic_rotation
d = 3
[algorithm a]
kind = iu
)";
  const ConfigParseResult parsed = parse_config_text(text);
  REQUIRE(!parsed.ok());
  bool found = false;
  for (const std::string& e : parsed.errors)
    found |= e.find("'T' must be >= 1") != std::string::npos;
  CHECK(found);
}

TEST_CASE("unknown algorithm kind names the field and the allowed values") {
  const std::string text = R"(
T = 5
seeds = 1
[scenario s]
kind = periodic_rotation
d = 3
[algorithm a]
kind = adagrad
)";
  const ConfigParseResult parsed = parse_config_text(text);
  REQUIRE(!parsed.ok());
  bool found = false;
  for (const std::string& e : parsed.errors)
    found |= e.find("'kind'") != std::string::npos && e.find("fgd_linear") != std::string::npos;
  CHECK(found);
}

TEST_CASE("validation reports every violation, not just the first") {
  const std::string text = R"(
T = 0
seeds =
workers = 0
[scenario s]
kind = nonsense
d = 0
[algorithm a]
kind = bu
b = -1
eta = 0
)";
  const ConfigParseResult parsed = parse_config_text(text);
  CHECK(parsed.errors.size() >= 6);
}

TEST_CASE("unknown keys are flagged") {
  const std::string text = R"(
T = 5
seeds = 1
frobnicate = yes
[scenario s]
kind = periodic_rotation
d = 3
[algorithm a]
kind = iu
)";
  const ConfigParseResult parsed = parse_config_text(text);
  REQUIRE(!parsed.ok());
  bool found = false;
  for (const std::string& e : parsed.errors)
    found |= e.find("unknown key 'frobnicate'") != std::string::npos;
  CHECK(found);
}

TEST_CASE("smallest matrix: one scenario, IU, one seed, five rounds") {
  const fs::path dir = fresh_dir("fgd_matrix_min");
  ConfigParseResult parsed = parse_config_text(kMinimalConfig);
  REQUIRE(parsed.ok());
  parsed.config.out_dir = dir.string();

  const MatrixResult result = run_matrix(parsed.config);
  CHECK(result.exit_code == 0);
  REQUIRE(result.table.size() == 1);
  CHECK(result.table[0].cells == 1);
  CHECK(result.table[0].failed == 0);
  REQUIRE(result.cells.size() == 1);
  CHECK(result.cells[0].per_round_violations == 0);

  const RegretLedger ledger = RegretLedger::read_jsonl(result.cells[0].ledger_path);
  CHECK(ledger.rounds.size() == 5);
  CHECK(fs::exists(dir / "comparison.csv"));
  fs::remove_all(dir);
}

TEST_CASE("rerunning the same config yields byte-identical CSV outputs") {
  const std::string config_text = R"(
T = 6
seeds = 1, 2
workers = 2

[scenario rot]
kind = periodic_rotation
period = 2
d = 3
n = 64

[algorithm bu-2]
kind = bu
b = 2
w = 2
delta = 0.01
eta = 0.3

[algorithm fgd]
kind = fgd_linear
b = 2
delta = 0.01
eta = 0.3
)";
  ConfigParseResult parsed = parse_config_text(config_text);
  REQUIRE(parsed.ok());

  const fs::path dir1 = fresh_dir("fgd_matrix_a");
  parsed.config.out_dir = dir1.string();
  run_matrix(parsed.config);

  const fs::path dir2 = fresh_dir("fgd_matrix_b");
  parsed.config.out_dir = dir2.string();
  run_matrix(parsed.config);

  CHECK(read_file(dir1 / "comparison.csv") == read_file(dir2 / "comparison.csv"));
  CHECK(read_file(dir1 / "bound_reports.csv") == read_file(dir2 / "bound_reports.csv"));
  CHECK(read_file(dir1 / "ledgers" / "rot__bu-2__seed1.jsonl") ==
        read_file(dir2 / "ledgers" / "rot__bu-2__seed1.jsonl"));
  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

TEST_CASE("plot data emission") {
  const fs::path dir = fresh_dir("fgd_plot");
  const std::string config_text = R"(
T = 3
seeds = 1
emit_plot_data = true

[scenario flat]
kind = periodic_rotation
period = 1
d = 3
n = 64

[algorithm iu]
kind = iu
delta = 0.000001
eta = 0.3
max_inner_iters = 7
one_pass = false
trace = true
)";
  ConfigParseResult parsed = parse_config_text(config_text);
  REQUIRE(parsed.ok());
  parsed.config.out_dir = dir.string();
  const MatrixResult result = run_matrix(parsed.config);

  // every training round hits the 7-iteration cap, so each trained round
  // contributes exactly 7 rows
  const RegretLedger ledger = RegretLedger::read_jsonl(result.cells[0].ledger_path);
  int trained_rounds = 0;
  for (const RoundRecord& r : ledger.rounds) trained_rounds += r.inner_iters > 0;
  CHECK(static_cast<int>(ledger.traces.size()) == 7 * trained_rounds);

  const std::string grad_csv = read_file(dir / "plot_grad_sq.csv");
  size_t lines = 0;
  for (char c : grad_csv) lines += c == '\n';
  CHECK(lines == ledger.traces.size() + 1);  // header + rows

  SUBCASE("absent traces produce a notice and no files") {
    const fs::path dir2 = fresh_dir("fgd_plot_empty");
    ConfigParseResult p2 = parse_config_text(kMinimalConfig);
    REQUIRE(p2.ok());
    p2.config.out_dir = dir2.string();
    p2.config.emit_plot_data = true;
    const MatrixResult r2 = run_matrix(p2.config);
    CHECK(r2.exit_code == 0);
    CHECK(!fs::exists(dir2 / "plot_grad_sq.csv"));
    fs::remove_all(dir2);
  }
  fs::remove_all(dir);
}

TEST_CASE("failed cells set a nonzero exit code and stay in the table") {
  const std::string config_text = R"(
T = 4
seeds = 1
gradient_source = population

[scenario flat]
kind = periodic_rotation
period = 1
d = 3
n = 32

[algorithm diverge]
kind = iu
delta = 0.0000000001
eta = 40.0
max_inner_iters = 2000
one_pass = false
)";
  ConfigParseResult parsed = parse_config_text(config_text);
  REQUIRE(parsed.ok());
  const fs::path dir = fresh_dir("fgd_matrix_fail");
  parsed.config.out_dir = dir.string();
  const MatrixResult result = run_matrix(parsed.config);
  CHECK(result.exit_code == 1);
  REQUIRE(result.cells.size() == 1);
  CHECK(result.cells[0].failed);
  CHECK(!result.cells[0].diagnostic.empty());
  CHECK(result.table[0].failed == 1);
  fs::remove_all(dir);
}

TEST_CASE("population source with a non-admissible model is a config error") {
  const std::string text = R"(
T = 5
seeds = 1
gradient_source = population
[scenario s]
kind = periodic_rotation
d = 3
model = logistic
task = classification
[algorithm a]
kind = iu
)";
  const ConfigParseResult parsed = parse_config_text(text);
  REQUIRE(!parsed.ok());
  bool found = false;
  for (const std::string& e : parsed.errors)
    found |= e.find("population gradients") != std::string::npos;
  CHECK(found);
}

TEST_CASE("periodic matrix: FGD-linear ends with the lowest mean local regret") {
  const std::string config_text = R"(
T = 80
seeds = 1, 2
gradient_source = population
emit_ledgers = false
emit_bound_reports = false

[scenario p3]
kind = periodic_rotation
period = 3
d = 4
n = 64
beta0 = 1.2, 0.9, 0, 0

[algorithm bu-1]
kind = iu
delta = 0.05
eta = 0.2
one_pass = false
warm_start = previous

[algorithm bu-2]
kind = bu
b = 2
delta = 0.05
eta = 0.2
one_pass = false
warm_start = previous

[algorithm bu-3]
kind = bu
b = 3
delta = 0.05
eta = 0.2
one_pass = false
warm_start = previous

[algorithm fgd-linear-3]
kind = fgd_linear
b = 3
delta = 0.05
eta = 0.2
eta_phi = 0.1
one_pass = false
warm_start = previous

[algorithm mgd-lag-3]
kind = mgd_lag
lag = 3
delta = 0.05
eta = 0.2
one_pass = false
warm_start = previous
)";
  ConfigParseResult parsed = parse_config_text(config_text);
  REQUIRE(parsed.ok());
  const fs::path dir = fresh_dir("fgd_matrix_p3");
  parsed.config.out_dir = dir.string();
  const MatrixResult result = run_matrix(parsed.config);
  REQUIRE(result.table.size() == 5);

  double fgd = 0, mgd_floor = 0, best_bu = 1e300;
  for (const TableRow& row : result.table) {
    if (row.algorithm == "fgd-linear-3") fgd = row.r_w_mean;
    else if (row.algorithm == "mgd-lag-3") mgd_floor = row.r_w_mean;
    else best_bu = std::min(best_bu, row.r_w_mean);
  }
  CHECK(fgd < best_bu);          // beats every batch-update row
  CHECK(mgd_floor <= fgd * 2);   // and sits near the period-lag oracle floor
  fs::remove_all(dir);
}

TEST_CASE("classification matrix records a desk AUC above chance") {
  const std::string config_text = R"(
T = 12
seeds = 1
emit_bound_reports = false

[scenario clicks]
kind = periodic_rotation
period = 1
d = 4
n = 512
task = classification
model = logistic
beta0 = 1.5, -1.0, 0.5, 0

[algorithm iu]
kind = iu
delta = 0.05
eta = 0.5
one_pass = false
warm_start = previous
max_inner_iters = 3000
)";
  ConfigParseResult parsed = parse_config_text(config_text);
  REQUIRE(parsed.ok());
  const fs::path dir = fresh_dir("fgd_matrix_auc");
  parsed.config.out_dir = dir.string();
  const MatrixResult result = run_matrix(parsed.config);
  REQUIRE(result.table.size() == 1);
  CHECK(std::isfinite(result.table[0].eval_auc_mean));
  CHECK(result.table[0].eval_auc_mean > 0.6);
  CHECK(std::isfinite(result.table[0].eval_loss_mean));
  fs::remove_all(dir);
}

TEST_CASE("stream dump writes the documented CSV layout") {
  DriftScenario s;
  s.name = "dumped";
  s.kind = DriftKind::periodic_rotation;
  s.period = 2;
  s.d = 3;
  s.n_per_round = 5;
  s.seed = 11;
  const fs::path path = fs::temp_directory_path() / "fgd_stream_dump.csv";
  dump_stream_csv(s, 4, path.string());
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,feature_0,feature_1,feature_2,label");
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) rows += !line.empty();
  CHECK(rows == 4 * 5);
  fs::remove(path);
}

TEST_CASE("table aggregates are recomputable from the persisted ledgers") {
  const std::string config_text = R"(
T = 8
seeds = 1, 2, 3
emit_checkpoints = true

[scenario rot]
kind = periodic_rotation
period = 2
d = 3
n = 64

[algorithm fgd]
kind = fgd_linear
b = 2
delta = 0.02
eta = 0.3
one_pass = false
warm_start = previous
)";
  ConfigParseResult parsed = parse_config_text(config_text);
  REQUIRE(parsed.ok());
  const fs::path dir = fresh_dir("fgd_matrix_agg");
  parsed.config.out_dir = dir.string();
  const MatrixResult result = run_matrix(parsed.config);
  REQUIRE(result.table.size() == 1);

  double sum = 0.0;
  int n = 0;
  for (const CellResult& cell : result.cells) {
    const RegretLedger ledger = RegretLedger::read_jsonl(cell.ledger_path);
    sum += local_regret(ledger, ledger.w);
    ++n;
  }
  CHECK(result.table[0].r_w_mean == doctest::Approx(sum / n).epsilon(1e-15));

  // generator state was checkpointed: phi per round plus the final update
  const fs::path ckpt = dir / "checkpoints" / "rot__fgd__seed1.jsonl";
  REQUIRE(fs::exists(ckpt));
  std::ifstream in(ckpt);
  int lines = 0;
  std::string line;
  while (std::getline(in, line)) lines += !line.empty();
  CHECK(lines == parsed.config.T + 1);
  fs::remove_all(dir);
}

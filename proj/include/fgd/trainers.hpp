// The update pipelines: IU/BU, MGD with a pre-specified generator, FGD with
// the linear exponentiated-gradient generator, and FGD with the neural
// generator, all driving the deployed sequence theta_1..theta_T and a ledger.
//
// Round structure (one iteration of every pipeline):
//   1. deploy theta_t, then observe D_t          (theta_{t+1} never sees D_{t+1})
//   2. prequential evaluation of theta_t on D_t
//   3. ledger row: ||grad u_{w,t}(theta_t)||^2, generator residual, h_t, ...
//   4. meta update (EG step / K neural steps), where the pipeline has one
//   5. inner descent on m_bar(.; t+1) from the warm start -> theta_{t+1}
//
// Every pipeline evaluates its training gradient through the same canonical
// weighted-lag form (coefficients applied per lag, ascending), so the
// reductions FGD-linear(b=1) = IU = BU(b=1) and MGD(grad r_{t-w}) = BU(b=w)
// produce bit-identical sequences.

#ifndef FGD_TRAINERS_HPP
#define FGD_TRAINERS_HPP

#include <functional>
#include <map>
#include <memory>
#include <optional>

#include "fgd/metrics.hpp"
#include "fgd/neural_mfgg.hpp"

namespace fgd {

enum class Algorithm { iu, bu, mgd, fgd_linear, fgd_neural };
enum class WarmStart { previous, window_back, fresh };
enum class GradientSourceKind { empirical, population };

std::string to_string(Algorithm a);
std::string to_string(WarmStart ws);
std::string to_string(GradientSourceKind k);

// Per-round data access for one (scenario, model) pair. Batches are
// regenerated on demand and cached; in population mode gradients and losses
// come from the closed-form moments instead. Rounds become visible one at a
// time, so a trainer cannot touch D_{t+1} while computing theta_{t+1}.
class RoundSource {
 public:
  RoundSource(DriftScenario scenario, LossModelSpec model, GradientSourceKind kind);

  const DriftScenario& scenario() const { return scenario_; }
  const LossModelSpec& model() const { return model_; }
  GradientSourceKind kind() const { return kind_; }
  int param_dim() const { return model_.param_dim(); }

  // zero vector for t <= 0
  Vec grad_at(int t, const Vec& theta) const;
  double loss_at(int t, const Vec& theta) const;
  Vec summary(int t) const;  // domain summary for the neural generator
  const DomainBatch& batch(int t) const;

  // visibility control (used by the trainers; unlimited by default)
  void reset_visibility();
  void advance_visible(int t);
  int visible() const { return visible_; }

  // ordering instrumentation: first data touch per round plus trainer marks
  struct AccessEvent {
    enum Kind { deploy, eval_done, train_begin, data_touch } kind;
    int t;
  };
  void mark(AccessEvent::Kind kind, int t) const;
  const std::vector<AccessEvent>& access_log() const { return log_; }

 private:
  void check_visible(int t) const;
  void touch(int t) const;

  DriftScenario scenario_;
  LossModelSpec model_;
  GradientSourceKind kind_;
  int visible_ = std::numeric_limits<int>::max();
  mutable std::map<int, DomainBatch> cache_;
  mutable std::vector<AccessEvent> log_;
  mutable std::vector<bool> touched_;
};

struct TrainerConfig {
  Algorithm algorithm = Algorithm::bu;
  int b = 1;                 // training window
  int w = 1;                 // evaluation window
  double delta = 1e-2;       // stopping threshold on the generator norm
  double eta = 0.2;          // model learning rate
  int max_inner_iters = 10000;
  // one-pass fixed-iteration training is the default mode; delta-stopping is
  // selected by one_pass = false
  WarmStart warm_start = WarmStart::window_back;
  bool one_pass = true;
  int mini_batch = 256;      // one-pass slice size
  double theta_init_scale = 0.5;

  // meta side
  double eta_phi = -1.0;     // >0 fixed; 0 disables meta updates; <0 Thm-2 schedule
  int meta_steps = 20;       // K inner meta-iterations (neural)
  int buffer_stride = 10;    // trajectory-buffer snapshot stride
  int d2 = 8;                // neural attention width
  int mlp_hidden = 16;

  bool trace = false;        // per-iteration trace emission

  void validate() const;
};

struct RoundOutcome {
  int t = 0;
  Vec theta;
  int inner_iters = 0;
  double terminal_generator_norm = kNaN;
  StopReason stop = StopReason::none;
  int snapshots = 0;
};

struct RunResult {
  std::vector<RoundOutcome> rounds;
  RegretLedger ledger;
  std::vector<Vec> phi_trajectory;    // fgd_linear: phi_t per round (phi_1 first)
  std::vector<Vec> net_checkpoints;   // fgd_neural: flat weights per round
};

// Optional observation points, used by the causality tests.
struct TrainerHooks {
  std::function<void(int t, const Vec& theta)> on_deploy;
  std::function<void(int t)> on_round_done;
};

// MGD's pre-specified generator: either a pure lag (m(.;t) = grad r_{t-lag})
// or an arbitrary per-round oracle such as the ideal m(.;t) = grad r_t.
struct GeneratorSchedule {
  int lag = 0;  // > 0 selects the lag form
  std::function<Vec(int t, const Vec& theta)> oracle;

  static GeneratorSchedule lagged(int lag);
  static GeneratorSchedule from_oracle(std::function<Vec(int t, const Vec& theta)> fn);
};

RunResult run_bu(const TrainerConfig& config, RoundSource& source, int T, uint64_t run_seed,
                 const TrainerHooks& hooks = {});
RunResult run_mgd(const TrainerConfig& config, RoundSource& source, int T, uint64_t run_seed,
                  const GeneratorSchedule& schedule, const TrainerHooks& hooks = {});
RunResult run_fgd_linear(const TrainerConfig& config, RoundSource& source, int T,
                         uint64_t run_seed, const TrainerHooks& hooks = {});
RunResult run_fgd_neural(const TrainerConfig& config, RoundSource& source, int T,
                         uint64_t run_seed, const NeuralMfggConfig& net_config,
                         const TrainerHooks& hooks = {});

// Dispatch on config.algorithm (mgd requires a schedule).
RunResult run_trainer(const TrainerConfig& config, RoundSource& source, int T, uint64_t run_seed,
                      const GeneratorSchedule* schedule = nullptr,
                      const TrainerHooks& hooks = {});

// Shared inner loop: gradient descent on generator_fn until its norm drops
// below delta or max_iters is hit. Snapshots are taken every `stride`
// applied steps (final iterate always included when any step ran).
struct InnerResult {
  Vec theta;
  int iters = 0;
  StopReason stop = StopReason::none;
  double terminal_norm = kNaN;
  std::vector<Vec> snapshots;
  std::vector<Vec> trace_iterates;  // every iterate, only when tracing
};

InnerResult inner_descent(const Vec& theta0, const std::function<Vec(const Vec&)>& generator_fn,
                          double delta, double eta, int max_iters, int snapshot_stride = 0,
                          bool keep_trace = false);

}  // namespace fgd

#endif  // FGD_TRAINERS_HPP

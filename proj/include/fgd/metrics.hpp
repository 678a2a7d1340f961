// Regret accounting: the per-round ledger written by every trainer and the
// post-hoc quantities computed from it -- w-local regret R_w(T), gradient
// variation V_w(T), generator error Q(T;m), the decomposition bound reports,
// and the desk-scale AUC.
//
// Conventions follow the analysis: grad r_s = 0 for rounds s <= 0, sums run
// over t = 1..T (so the first w rounds of V_w contribute sup ||grad r_t||^2),
// and every supremum over theta is replaced by a max over a finite probe set,
// which can only under-estimate the true value.

#ifndef FGD_METRICS_HPP
#define FGD_METRICS_HPP

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "fgd/domain_stream.hpp"
#include "fgd/generators.hpp"

namespace fgd {

enum class StopReason { none, threshold, iter_cap, one_pass_end };

std::string to_string(StopReason reason);
StopReason stop_reason_from_string(const std::string& s);

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Everything needed to re-evaluate h_t at an arbitrary phi later.
struct HRecord {
  MetaLoss quad;
  Vec phi;    // phi_t used at this round
  double h = kNaN;  // h_t(phi_t)
};

struct RoundRecord {
  int t = 0;
  Vec theta;                      // deployed theta_t
  double grad_u_sq = kNaN;        // ||grad u_{w,t}(theta_t)||^2
  double grad_u_train_sq = kNaN;  // ||grad u_{w,t-1}(theta_t)||^2 (training-side)
  double resid_sq = kNaN;         // ||grad r_t(theta_t) - m(theta_t;t)||^2
  double h = kNaN;                // h_t(phi_t), linear generator runs
  double forecast_err = kNaN;     // resid_sq / ||grad r_t(theta_t)||^2
  double eval_loss = kNaN;        // prequential r_t(theta_t)
  double eval_auc = kNaN;         // classification streams only
  int inner_iters = 0;            // iterations spent training this theta_t
  int snapshots = 0;
  double terminal_norm = kNaN;    // re-evaluated generator norm after training
  StopReason stop = StopReason::none;
  std::optional<HRecord> h_rec;
};

struct TraceRecord {
  int t = 0;     // round whose gradient is probed
  int iter = 0;  // training iteration index
  double grad_sq = kNaN;
  double forecast_err = kNaN;
};

struct RegretLedger {
  // config echo
  std::string algorithm;
  std::string scenario;
  std::string model;
  std::string source;  // "empirical" | "population"
  int b = 1;
  int w = 1;
  double delta = 0.0;
  double eta = 0.0;
  double eta_phi = 0.0;
  int T = 0;
  uint64_t seed = 0;
  double observed_grad_bound = 0.0;  // running max ||grad r|| seen by the meta loop
  int skipped_meta_updates = 0;      // rounds whose trajectory buffer was empty

  std::vector<RoundRecord> rounds;
  std::vector<TraceRecord> traces;

  void require_complete() const;  // rounds contiguous 1..T, throws otherwise

  void write_jsonl(const std::string& path) const;
  static RegretLedger read_jsonl(const std::string& path);
};

// R_w(T) = (1/T) sum_t ||grad u_{w,t}(theta_t)||^2 from the stored norms.
double local_regret(const RegretLedger& ledger, int w);

// Oracle giving grad r_t(theta); t <= 0 must return the zero vector.
using RoundGradOracle = std::function<Vec(int t, const Vec& theta)>;

// Per-round supremum summand of V_w and its average over t = 1..T.
double gradient_variation_summand(const RoundGradOracle& oracle, const ProbeSet& probe, int w,
                                  int t);
double gradient_variation(const RoundGradOracle& oracle, const ProbeSet& probe, int w, int T);

// Q(T;m) for a generator trajectory m(theta; t).
using GeneratorOracle = std::function<Vec(int t, const Vec& theta)>;
double generator_error(const GeneratorOracle& generator, const RoundGradOracle& oracle,
                       const ProbeSet& probe, int T);

struct BoundReport {
  double lhs = kNaN;
  double rhs = kNaN;
  double slack = kNaN;           // rhs - lhs; negative means the bound failed
  double optimization_term = kNaN;
  double generalization_term = kNaN;
  double rhs_tight = kNaN;       // measured training-stationarity in place of delta^2
  double slack_tight = kNaN;
  bool cap_preempted = false;    // some round hit the iteration cap
  bool degenerate = false;       // e.g. eta_phi = 0 makes the rhs infinite
  bool oracle_warning = false;   // comparator failed the stationarity certificate
};

// R_w(T) <= 2 delta^2 + (2/w^2) V_w(T) for a BU ledger with b == w.
BoundReport bound_check_batch_update(const RegretLedger& ledger, double v_w, double delta);

// sum_t (h_t(phi_t) - h_t(phi_star)) <= (log b)/eta_phi + 32 eta_phi M^4 T.
BoundReport bound_check_meta_regret(const RegretLedger& ledger, const Vec& phi_star, double eta_phi,
                             int b, double grad_bound);

// Brute-force minimization over the simplex: exhaustive grid for b <= 3,
// uniform random draws for larger b. Independent of any closed-form update.
Vec simplex_search(const std::function<double(const Vec&)>& objective, int b, int grid_steps,
                   int random_draws, uint64_t seed);

// phi_star for a run: minimizes sum_t h_t over S_b using the stored quadratic
// records, then polishes with exponentiated-gradient descent.
Vec ledger_phi_star(const RegretLedger& ledger, uint64_t seed);

// Exact Mann-Whitney AUC with tie correction; labels must contain both classes.
double desk_auc(const Vec& scores, const Vec& labels);

}  // namespace fgd

#endif  // FGD_METRICS_HPP

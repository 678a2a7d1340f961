// Synthetic streams of gradually shifting domains with analytically known
// population risks.
//
// Data model per round t: features x ~ N(mu_t, cov); regression labels
// y = <beta_t, x> + noise * eps, classification labels y ~ Bernoulli(sigmoid(<beta_t, x>)).
// Each drift kind evolves (mu_t, beta_t) deterministically from (seed, t), so
// a stream can be regenerated instead of stored and replays bit-identically.
//
// For the linear-squared model the population risk is the exact quadratic
//   r_t(theta) = theta' S_t theta - 2 c_t' theta + E[y^2],
// with S_t = cov + mu_t mu_t' and c_t = S_t beta_t, which gives the
// closed-form gradient oracle 2 (S_t theta - c_t) used by the bound checks.

#ifndef FGD_DOMAIN_STREAM_HPP
#define FGD_DOMAIN_STREAM_HPP

#include <string>
#include <vector>

#include "fgd/models.hpp"

namespace fgd {

enum class DriftKind { periodic_rotation, linear_drift, piecewise_stationary, random_walk };
enum class TaskKind { regression, classification };

std::string to_string(DriftKind kind);
std::string to_string(TaskKind kind);

struct DriftScenario {
  std::string name = "scenario";
  DriftKind kind = DriftKind::periodic_rotation;
  TaskKind task = TaskKind::regression;
  int d = 16;
  int n_per_round = 1024;
  uint64_t seed = 1;
  double noise = 0.1;  // label noise sigma (regression only)

  // base distribution; empty mean0/beta0 expand to zeros / e_0, empty cov to I
  Vec mean0;
  Vec beta0;
  Mat cov;

  int period = 1;           // periodic_rotation
  double angle_step = 0.0;  // radians per phase step; 0 -> 2*pi/period
  Vec velocity;             // linear_drift: feature-mean shift per round
  int segment_len = 50;     // piecewise_stationary
  double jump_scale = 1.0;  // piecewise_stationary
  double step_scale = 0.1;  // random_walk

  void validate() const;  // throws ConfigError
};

// Population parameters of P_t after drift is applied.
struct ScenarioMoments {
  Vec mu;       // feature mean
  Vec beta;     // regression coefficients
  Mat second;   // E[x x'] = cov + mu mu'
  Vec cross;    // E[x y]  (regression: second * beta)
  double y_sq;  // E[y^2]  (regression)
};

ScenarioMoments moments_at(const DriftScenario& scenario, int t);

// Draws D_t; pure function of (scenario.seed, t).
DomainBatch next_domain(const DriftScenario& scenario, int t);

// Exact population gradient of r_t for the linear-squared model; throws
// UnsupportedOracleError for any other model kind.
Vec population_gradient(const DriftScenario& scenario, int t, const LossModelSpec& model,
                        const Vec& theta);

// Population risk matching population_gradient (linear-squared only).
double population_loss(const DriftScenario& scenario, int t, const LossModelSpec& model,
                       const Vec& theta);

// Monte-Carlo gradient estimate with the requested sample budget; works for
// every model kind. Deterministic given mc_seed.
Vec population_gradient_mc(const DriftScenario& scenario, int t, const LossModelSpec& model,
                           const Vec& theta, int budget, uint64_t mc_seed);

// Finite surrogate for sup over theta: quasi-random box samples plus every
// parameter a trainer visited.
struct ProbeConfig {
  Vec lo;
  Vec hi;
  int count = 0;
  uint64_t seed = 1;
};

struct ProbeSet {
  std::vector<Vec> points;
  int size() const { return static_cast<int>(points.size()); }
};

ProbeSet build_probe_set(const ProbeConfig& config, const std::vector<Vec>& visited);

// CSV dump (header: t, feature_0..feature_{d-1}, label), rounds 1..T.
void dump_stream_csv(const DriftScenario& scenario, int rounds, const std::string& path);

}  // namespace fgd

#endif  // FGD_DOMAIN_STREAM_HPP

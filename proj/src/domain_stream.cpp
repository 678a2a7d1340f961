#include "fgd/domain_stream.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace fgd {

namespace {

// sub-stream tags for seed mixing
constexpr uint64_t kTagBatch = 0x01;
constexpr uint64_t kTagJump = 0x02;
constexpr uint64_t kTagWalk = 0x03;
constexpr uint64_t kTagProbe = 0x04;

Vec default_or(const Vec& v, int d, double fill) {
  if (v.size() == 0) return Vec::Constant(d, fill);
  return v;
}

double sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

// rotation in the (0,1) coordinate plane
Vec rotate01(const Vec& v, double angle) {
  Vec out = v;
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  out[0] = c * v[0] - s * v[1];
  out[1] = s * v[0] + c * v[1];
  return out;
}

}  // namespace

std::string to_string(DriftKind kind) {
  switch (kind) {
    case DriftKind::periodic_rotation: return "periodic_rotation";
    case DriftKind::linear_drift: return "linear_drift";
    case DriftKind::piecewise_stationary: return "piecewise_stationary";
    case DriftKind::random_walk: return "random_walk";
  }
  return "?";
}

std::string to_string(TaskKind kind) {
  return kind == TaskKind::regression ? "regression" : "classification";
}

void DriftScenario::validate() const {
  if (d < 1) throw ConfigError("scenario d must be >= 1");
  if (n_per_round < 1) throw ConfigError("scenario sample size must be >= 1");
  if (noise < 0.0) throw ConfigError("noise level must be >= 0");
  if (kind == DriftKind::periodic_rotation) {
    if (period < 1) throw ConfigError("period must be >= 1");
    if (period > 1 && d < 2) throw ConfigError("periodic rotation needs d >= 2");
  }
  if (kind == DriftKind::linear_drift && velocity.size() != 0 && velocity.size() != d)
    throw ConfigError("velocity dimension != d");
  if (kind == DriftKind::piecewise_stationary && segment_len < 1)
    throw ConfigError("segment length must be >= 1");
  if (mean0.size() != 0 && mean0.size() != d) throw ConfigError("mean0 dimension != d");
  if (beta0.size() != 0 && beta0.size() != d) throw ConfigError("beta0 dimension != d");
  if (cov.size() != 0) {
    if (cov.rows() != d || cov.cols() != d) throw ConfigError("covariance shape != d x d");
    Eigen::LLT<Mat> llt(cov);
    if (llt.info() != Eigen::Success)
      throw ConfigError("covariance must be positive definite");
  }
}

ScenarioMoments moments_at(const DriftScenario& scenario, int t) {
  scenario.validate();
  if (t < 1) throw PreconditionError("round index must be >= 1");

  const int d = scenario.d;
  Vec mu = default_or(scenario.mean0, d, 0.0);
  Vec beta = scenario.beta0;
  if (beta.size() == 0) {
    beta = Vec::Zero(d);
    beta[0] = 1.0;
  }

  switch (scenario.kind) {
    case DriftKind::periodic_rotation: {
      const int phase = (t - 1) % scenario.period;
      if (scenario.period > 1 && phase != 0) {
        const double step =
            scenario.angle_step != 0.0 ? scenario.angle_step : 2.0 * M_PI / scenario.period;
        beta = rotate01(beta, step * phase);
      }
      break;
    }
    case DriftKind::linear_drift: {
      if (scenario.velocity.size() == d) mu += static_cast<double>(t - 1) * scenario.velocity;
      break;
    }
    case DriftKind::piecewise_stationary: {
      const int segment = (t - 1) / scenario.segment_len;
      for (int k = 1; k <= segment; ++k) {
        Rng rng(mix_seed(scenario.seed, mix_seed(kTagJump, static_cast<uint64_t>(k))));
        beta += scenario.jump_scale * rng.gaussian_vec(d);
      }
      break;
    }
    case DriftKind::random_walk: {
      for (int s = 1; s < t; ++s) {
        Rng rng(mix_seed(scenario.seed, mix_seed(kTagWalk, static_cast<uint64_t>(s))));
        beta += scenario.step_scale * rng.gaussian_vec(d);
      }
      break;
    }
  }

  ScenarioMoments m;
  m.mu = mu;
  m.beta = beta;
  const Mat cov = scenario.cov.size() ? scenario.cov : Mat(Mat::Identity(d, d));
  m.second = cov + mu * mu.transpose();
  m.cross = m.second * beta;
  m.y_sq = beta.dot(m.second * beta) + scenario.noise * scenario.noise;
  return m;
}

DomainBatch next_domain(const DriftScenario& scenario, int t) {
  const ScenarioMoments m = moments_at(scenario, t);
  const int d = scenario.d;
  const int n = scenario.n_per_round;
  const Mat cov = scenario.cov.size() ? scenario.cov : Mat(Mat::Identity(d, d));
  const Mat chol = Eigen::LLT<Mat>(cov).matrixL();

  Rng rng(mix_seed(scenario.seed, mix_seed(kTagBatch, static_cast<uint64_t>(t))));
  DomainBatch batch;
  batch.t = t;
  batch.features.resize(n, d);
  batch.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    const Vec x = m.mu + chol * rng.gaussian_vec(d);
    batch.features.row(i) = x.transpose();
    const double signal = m.beta.dot(x);
    if (scenario.task == TaskKind::regression) {
      batch.labels[i] = signal + scenario.noise * rng.gaussian();
    } else {
      batch.labels[i] = rng.uniform() < sigmoid(signal) ? 1.0 : 0.0;
    }
  }
  return batch;
}

Vec population_gradient(const DriftScenario& scenario, int t, const LossModelSpec& model,
                        const Vec& theta) {
  if (model.kind != ModelKind::linear_squared)
    throw UnsupportedOracleError("closed-form population gradient exists only for the "
                                 "linear-squared model; use the Monte-Carlo estimator");
  if (scenario.task != TaskKind::regression)
    throw UnsupportedOracleError("closed-form cross moment needs regression labels");
  if (theta.size() != model.param_dim()) throw ShapeError("theta dimension != model dim");
  const ScenarioMoments m = moments_at(scenario, t);
  return 2.0 * (m.second * theta - m.cross);
}

double population_loss(const DriftScenario& scenario, int t, const LossModelSpec& model,
                       const Vec& theta) {
  if (model.kind != ModelKind::linear_squared || scenario.task != TaskKind::regression)
    throw UnsupportedOracleError("closed-form population risk exists only for the "
                                 "linear-squared model on regression streams");
  const ScenarioMoments m = moments_at(scenario, t);
  return theta.dot(m.second * theta) - 2.0 * m.cross.dot(theta) + m.y_sq;
}

Vec population_gradient_mc(const DriftScenario& scenario, int t, const LossModelSpec& model,
                           const Vec& theta, int budget, uint64_t mc_seed) {
  if (budget < 1) throw PreconditionError("Monte-Carlo budget must be >= 1");
  DriftScenario big = scenario;
  big.n_per_round = budget;
  big.seed = mix_seed(scenario.seed, mc_seed);
  return grad(model, theta, next_domain(big, t));
}

namespace {

// Halton radical inverse, base b
double radical_inverse(uint64_t index, int base) {
  double inv = 1.0 / base;
  double scale = inv;
  double value = 0.0;
  while (index > 0) {
    value += static_cast<double>(index % base) * scale;
    index /= base;
    scale *= inv;
  }
  return value;
}

constexpr int kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37, 41,
                           43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101};

}  // namespace

ProbeSet build_probe_set(const ProbeConfig& config, const std::vector<Vec>& visited) {
  if (config.count < 0) throw ConfigError("probe count must be >= 0");
  if (config.count > 0) {
    if (config.lo.size() == 0 || config.lo.size() != config.hi.size())
      throw ConfigError("probe box bounds missing or mismatched");
    for (int i = 0; i < config.lo.size(); ++i) {
      if (!std::isfinite(config.lo[i]) || !std::isfinite(config.hi[i]) ||
          config.lo[i] > config.hi[i])
        throw ConfigError("probe box bounds must be finite with lo <= hi");
    }
    if (config.lo.size() > static_cast<long>(std::size(kPrimes)))
      throw ConfigError("probe box dimension too large for the Halton generator");
  }

  ProbeSet probe;
  const uint64_t offset = 17 + mix_seed(config.seed, kTagProbe) % 4096;
  const int d = static_cast<int>(config.lo.size());
  for (int j = 0; j < config.count; ++j) {
    Vec p(d);
    for (int k = 0; k < d; ++k) {
      const double u = radical_inverse(offset + static_cast<uint64_t>(j), kPrimes[k]);
      p[k] = config.lo[k] + (config.hi[k] - config.lo[k]) * u;
    }
    probe.points.push_back(std::move(p));
  }
  for (const Vec& v : visited) probe.points.push_back(v);
  if (probe.points.empty()) throw ConfigError("probe set is empty");
  const long dim = probe.points.front().size();
  for (const Vec& p : probe.points)
    if (p.size() != dim) throw ShapeError("probe points have mixed dimensions");
  return probe;
}

void dump_stream_csv(const DriftScenario& scenario, int rounds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  out << "t";
  for (int k = 0; k < scenario.d; ++k) out << ",feature_" << k;
  out << ",label\n";
  char buf[64];
  for (int t = 1; t <= rounds; ++t) {
    const DomainBatch batch = next_domain(scenario, t);
    for (int i = 0; i < batch.n(); ++i) {
      out << t;
      for (int k = 0; k < scenario.d; ++k) {
        std::snprintf(buf, sizeof(buf), ",%.17g", batch.features(i, k));
        out << buf;
      }
      std::snprintf(buf, sizeof(buf), ",%.17g\n", batch.labels[i]);
      out << buf;
    }
  }
}

}  // namespace fgd

#include "fgd/trainers.hpp"

#include <algorithm>
#include <cmath>

namespace fgd {

namespace {
constexpr uint64_t kTagThetaInit = 0x11;
constexpr uint64_t kTagFresh = 0x12;
constexpr uint64_t kTagNet = 0x13;
constexpr int kCacheKeep = 64;
}  // namespace

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::iu: return "iu";
    case Algorithm::bu: return "bu";
    case Algorithm::mgd: return "mgd";
    case Algorithm::fgd_linear: return "fgd_linear";
    case Algorithm::fgd_neural: return "fgd_neural";
  }
  return "?";
}

std::string to_string(WarmStart ws) {
  switch (ws) {
    case WarmStart::previous: return "previous";
    case WarmStart::window_back: return "window_back";
    case WarmStart::fresh: return "fresh";
  }
  return "?";
}

std::string to_string(GradientSourceKind k) {
  return k == GradientSourceKind::empirical ? "empirical" : "population";
}

// ---------------------------------------------------------------------------
// RoundSource
// ---------------------------------------------------------------------------

RoundSource::RoundSource(DriftScenario scenario, LossModelSpec model, GradientSourceKind kind)
    : scenario_(std::move(scenario)), model_(model), kind_(kind) {
  scenario_.validate();
  model_.validate();
  if (scenario_.d != model_.d)
    throw ConfigError("scenario feature dim " + std::to_string(scenario_.d) +
                      " != model d " + std::to_string(model_.d));
  if (kind_ == GradientSourceKind::population) {
    if (model_.kind != ModelKind::linear_squared || scenario_.task != TaskKind::regression)
      throw ConfigError("population gradients need the linear-squared model on a "
                        "regression stream");
  }
}

void RoundSource::check_visible(int t) const {
  if (t > visible_)
    throw PreconditionError("round " + std::to_string(t) + " accessed before it was observed " +
                            "(visible through " + std::to_string(visible_) + ")");
}

void RoundSource::touch(int t) const {
  if (t < 1) return;
  if (static_cast<int>(touched_.size()) <= t) touched_.resize(t + 1, false);
  if (!touched_[t]) {
    touched_[t] = true;
    log_.push_back({AccessEvent::data_touch, t});
  }
}

void RoundSource::mark(AccessEvent::Kind kind, int t) const { log_.push_back({kind, t}); }

void RoundSource::reset_visibility() { visible_ = 0; }

void RoundSource::advance_visible(int t) {
  if (t < visible_) throw PreconditionError("visibility must advance monotonically");
  visible_ = t;
}

const DomainBatch& RoundSource::batch(int t) const {
  if (t < 1) throw PreconditionError("no batch for round " + std::to_string(t));
  check_visible(t);
  touch(t);
  auto it = cache_.find(t);
  if (it == cache_.end()) {
    // evict before inserting so the returned reference cannot be the victim
    while (static_cast<int>(cache_.size()) >= kCacheKeep) cache_.erase(cache_.begin());
    it = cache_.emplace(t, next_domain(scenario_, t)).first;
  }
  return it->second;
}

Vec RoundSource::grad_at(int t, const Vec& theta) const {
  if (t < 1) return Vec::Zero(theta.size());
  check_visible(t);
  touch(t);
  if (kind_ == GradientSourceKind::population)
    return population_gradient(scenario_, t, model_, theta);
  return grad(model_, theta, batch(t));
}

double RoundSource::loss_at(int t, const Vec& theta) const {
  if (t < 1) return 0.0;
  check_visible(t);
  touch(t);
  if (kind_ == GradientSourceKind::population)
    return population_loss(scenario_, t, model_, theta);
  return loss(model_, theta, batch(t));
}

Vec RoundSource::summary(int t) const {
  if (t < 1) return Vec::Zero(scenario_.d);
  check_visible(t);
  touch(t);
  if (kind_ == GradientSourceKind::population)
    return static_cast<double>(scenario_.n_per_round) * moments_at(scenario_, t).mu;
  return domain_summary(batch(t));
}

// ---------------------------------------------------------------------------
// config / schedule
// ---------------------------------------------------------------------------

void TrainerConfig::validate() const {
  if (b < 1) throw ConfigError("training window b must be >= 1");
  if (w < 1) throw ConfigError("evaluation window w must be >= 1");
  if (delta < 0.0) throw ConfigError("stopping threshold delta must be >= 0");
  if (eta <= 0.0) throw ConfigError("learning rate eta must be > 0");
  if (max_inner_iters < 1) throw ConfigError("max_inner_iters must be >= 1");
  if (mini_batch < 1) throw ConfigError("mini-batch size must be >= 1");
  if (buffer_stride < 1) throw ConfigError("buffer stride must be >= 1");
  if (meta_steps < 0) throw ConfigError("meta_steps must be >= 0");
  if (theta_init_scale < 0.0) throw ConfigError("theta_init_scale must be >= 0");
  if (algorithm == Algorithm::iu && b != 1) throw ConfigError("iu means b = 1");
}

GeneratorSchedule GeneratorSchedule::lagged(int lag) {
  if (lag < 1) throw ConfigError("generator lag must be >= 1");
  GeneratorSchedule s;
  s.lag = lag;
  return s;
}

GeneratorSchedule GeneratorSchedule::from_oracle(std::function<Vec(int, const Vec&)> fn) {
  GeneratorSchedule s;
  s.oracle = std::move(fn);
  return s;
}

// ---------------------------------------------------------------------------
// inner descent
// ---------------------------------------------------------------------------

InnerResult inner_descent(const Vec& theta0, const std::function<Vec(const Vec&)>& generator_fn,
                          double delta, double eta, int max_iters, int snapshot_stride,
                          bool keep_trace) {
  if (delta < 0.0) throw PreconditionError("delta must be >= 0");
  if (eta <= 0.0) throw PreconditionError("eta must be > 0");
  if (max_iters < 1) throw PreconditionError("max_iters must be >= 1");

  InnerResult r;
  Vec theta = theta0;
  for (;;) {
    const Vec g = generator_fn(theta);
    if (!all_finite(g)) throw NumericError("divergence: non-finite generator value");
    const double norm = g.norm();
    if (norm < delta || norm == 0.0) {
      r.stop = StopReason::threshold;
      r.terminal_norm = norm;
      break;
    }
    if (r.iters >= max_iters) {
      r.stop = StopReason::iter_cap;
      r.terminal_norm = norm;
      break;
    }
    theta -= eta * g;
    if (!all_finite(theta)) throw NumericError("divergence: non-finite parameters");
    ++r.iters;
    if (keep_trace) r.trace_iterates.push_back(theta);
    if (snapshot_stride > 0 && r.iters % snapshot_stride == 0) r.snapshots.push_back(theta);
  }
  if (snapshot_stride > 0 && r.iters > 0 && r.iters % snapshot_stride != 0)
    r.snapshots.push_back(theta);
  r.theta = std::move(theta);
  return r;
}

// ---------------------------------------------------------------------------
// pipeline driver
// ---------------------------------------------------------------------------

namespace {

// Training generator for one target round, expressed as per-lag coefficients
// so that every pipeline shares one floating-point evaluation path.
struct RoundGenerator {
  int target = 1;
  int w = 1;
  std::vector<double> mbar_coeffs;  // [i] = coefficient of lag i+1 in m_bar
  std::vector<double> m_coeffs;     // [i] = coefficient of lag i+1 in m
  std::function<Vec(int, const Vec&)> callback;  // m-part oracle; overrides coeffs

  Vec eval_mbar(const RoundSource& src, const Vec& theta) const {
    if (callback) {
      Vec acc = callback(target, theta);
      for (int i = 1; i <= w - 1; ++i) acc += src.grad_at(target - i, theta);
      return acc / w;
    }
    Vec acc = Vec::Zero(theta.size());
    for (size_t i = 0; i < mbar_coeffs.size(); ++i)
      if (mbar_coeffs[i] != 0.0)
        acc += mbar_coeffs[i] * src.grad_at(target - static_cast<int>(i) - 1, theta);
    return acc;
  }

  Vec eval_m(const RoundSource& src, const Vec& theta) const {
    if (callback) return callback(target, theta);
    Vec acc = Vec::Zero(theta.size());
    for (size_t i = 0; i < m_coeffs.size(); ++i)
      if (m_coeffs[i] != 0.0)
        acc += m_coeffs[i] * src.grad_at(target - static_cast<int>(i) - 1, theta);
    return acc;
  }
};

// m_bar coefficients from m coefficients: c_i = (m_i + [i <= w-1]) / w.
RoundGenerator generator_from_m(int target, int w, std::vector<double> m_coeffs) {
  RoundGenerator gen;
  gen.target = target;
  gen.w = w;
  const size_t len = std::max(m_coeffs.size(), static_cast<size_t>(w - 1));
  m_coeffs.resize(len, 0.0);
  gen.m_coeffs = m_coeffs;
  gen.mbar_coeffs.resize(len);
  for (size_t i = 0; i < len; ++i) {
    const double smooth = (static_cast<int>(i) + 1 <= w - 1) ? 1.0 : 0.0;
    gen.mbar_coeffs[i] = (m_coeffs[i] + smooth) / w;
  }
  return gen;
}

// BU's averaged-window objective, with the implied m derived for diagnostics.
RoundGenerator generator_bu(int target, int w, int b) {
  RoundGenerator gen;
  gen.target = target;
  gen.w = w;
  const size_t len = std::max(static_cast<size_t>(b), static_cast<size_t>(w - 1));
  gen.mbar_coeffs.assign(len, 0.0);
  for (int i = 0; i < b; ++i) gen.mbar_coeffs[i] = 1.0 / b;
  gen.m_coeffs.resize(len);
  for (size_t i = 0; i < len; ++i) {
    const double smooth = (static_cast<int>(i) + 1 <= w - 1) ? 1.0 : 0.0;
    gen.m_coeffs[i] = w * gen.mbar_coeffs[i] - smooth;
  }
  return gen;
}

struct PipelineKit {
  Algorithm algo;
  SimplexWeights phi{Vec::Ones(1)};
  double frozen_eta_phi = 0.0;  // EG rate once fixed; 0 while undetermined
  bool meta_disabled = false;
  std::optional<NeuralMfgg> net;
  const GeneratorSchedule* schedule = nullptr;
};

Vec smoothed_grad(const RoundSource& src, int t_hi, int w, const Vec& theta) {
  Vec acc = Vec::Zero(theta.size());
  for (int i = 0; i < w; ++i) acc += (1.0 / w) * src.grad_at(t_hi - i, theta);
  return acc;
}

std::vector<Vec> target_summaries(const RoundSource& src, int target, int b) {
  std::vector<Vec> out;
  out.reserve(b);
  for (int i = 1; i <= b; ++i) out.push_back(src.summary(target - i));
  return out;
}

class PipelineDriver {
 public:
  PipelineDriver(const TrainerConfig& config, RoundSource& source, int T, uint64_t run_seed,
                 PipelineKit kit, const TrainerHooks& hooks)
      : config_(config), source_(source), T_(T), run_seed_(run_seed), kit_(std::move(kit)),
        hooks_(hooks) {
    config_.validate();
    if (T_ < 1) throw ConfigError("T must be >= 1");
    if (config_.one_pass) {
      if (source_.kind() != GradientSourceKind::empirical)
        throw ConfigError("one-pass training needs empirical batches");
      if (kit_.schedule != nullptr && kit_.schedule->lag == 0)
        throw ConfigError("one-pass training needs a lag-form generator");
    }
  }

  RunResult run() {
    result_.ledger.algorithm = to_string(kit_.algo);
    result_.ledger.scenario = source_.scenario().name;
    result_.ledger.model = to_string(source_.model().kind);
    result_.ledger.source = to_string(source_.kind());
    result_.ledger.b = config_.b;
    result_.ledger.w = config_.w;
    result_.ledger.delta = config_.delta;
    result_.ledger.eta = config_.eta;
    result_.ledger.T = T_;
    result_.ledger.seed = run_seed_;

    source_.reset_visibility();
    Rng init_rng(mix_seed(run_seed_, kTagThetaInit));
    theta_ = random_params(source_.model(), init_rng, config_.theta_init_scale);
    theta_history_.push_back(theta_);

    // theta_1 trains on m_bar(.;1); with lag generators every lag falls on
    // rounds <= 0, so this is a no-op, while an MGD oracle really trains
    gen_ = build_generator(1);
    last_inner_ = descend(theta_);
    theta_ = last_inner_.theta;
    theta_history_.back() = theta_;

    for (int t = 1; t <= T_; ++t) {
      round(t);
      if (hooks_.on_round_done) hooks_.on_round_done(t);
    }

    result_.ledger.eta_phi = kit_.frozen_eta_phi;
    result_.ledger.observed_grad_bound = max_grad_norm_;
    result_.ledger.skipped_meta_updates = skipped_meta_updates_;
    return std::move(result_);
  }

 private:
  RoundGenerator build_generator(int target) {
    switch (kit_.algo) {
      case Algorithm::iu:
      case Algorithm::bu:
        return generator_bu(target, config_.w, config_.b);
      case Algorithm::mgd: {
        if (kit_.schedule->lag > 0) {
          std::vector<double> m(kit_.schedule->lag, 0.0);
          m[kit_.schedule->lag - 1] = 1.0;
          return generator_from_m(target, config_.w, std::move(m));
        }
        RoundGenerator gen;
        gen.target = target;
        gen.w = config_.w;
        gen.callback = kit_.schedule->oracle;
        return gen;
      }
      case Algorithm::fgd_linear: {
        std::vector<double> m(kit_.phi.a.data(), kit_.phi.a.data() + kit_.phi.size());
        return generator_from_m(target, config_.w, std::move(m));
      }
      case Algorithm::fgd_neural: {
        const SimplexWeights a = kit_.net->forward(target_summaries(source_, target, config_.b));
        std::vector<double> m(a.a.data(), a.a.data() + a.size());
        return generator_from_m(target, config_.w, std::move(m));
      }
    }
    throw ConfigError("unknown algorithm");
  }

  InnerResult descend(const Vec& start) {
    const int stride = kit_.algo == Algorithm::fgd_neural ? config_.buffer_stride : 0;
    if (!config_.one_pass) {
      return inner_descent(
          start, [&](const Vec& th) { return gen_.eval_mbar(source_, th); }, config_.delta,
          config_.eta, config_.max_inner_iters, stride, config_.trace);
    }
    return one_pass_descend(start, stride);
  }

  // One deterministic pass over the pooled window: each participating lag's
  // batch is cut into contiguous slices, every example is touched exactly
  // once, and each step scales its slice gradient by pool_size * coefficient
  // so the pass averages to m_bar.
  InnerResult one_pass_descend(const Vec& start, int stride) {
    std::vector<std::pair<int, double>> pool;  // (lag, coefficient)
    for (size_t i = 0; i < gen_.mbar_coeffs.size(); ++i) {
      const int lag = static_cast<int>(i) + 1;
      if (gen_.mbar_coeffs[i] != 0.0 && gen_.target - lag >= 1)
        pool.emplace_back(lag, gen_.mbar_coeffs[i]);
    }
    InnerResult r;
    Vec theta = start;
    const double pool_size = static_cast<double>(pool.size());
    for (const auto& [lag, coeff] : pool) {
      const DomainBatch& full = source_.batch(gen_.target - lag);
      for (int begin = 0; begin < full.n(); begin += config_.mini_batch) {
        const DomainBatch part = slice(full, begin, config_.mini_batch);
        const Vec g = pool_size * coeff * grad(source_.model(), theta, part);
        if (!all_finite(g)) throw NumericError("divergence: non-finite mini-batch gradient");
        theta -= config_.eta * g;
        if (!all_finite(theta)) throw NumericError("divergence: non-finite parameters");
        ++r.iters;
        if (config_.trace) r.trace_iterates.push_back(theta);
        if (stride > 0 && r.iters % stride == 0) r.snapshots.push_back(theta);
      }
    }
    if (stride > 0 && r.iters > 0 && r.iters % stride != 0) r.snapshots.push_back(theta);
    r.stop = StopReason::one_pass_end;
    r.terminal_norm = gen_.eval_mbar(source_, theta).norm();
    r.theta = std::move(theta);
    return r;
  }

  Vec warm_start(int target) {
    switch (config_.warm_start) {
      case WarmStart::previous:
        return theta_;
      case WarmStart::window_back: {
        const int back = std::max(1, target - config_.b);
        return theta_history_[back - 1];
      }
      case WarmStart::fresh: {
        Rng rng(mix_seed(run_seed_, mix_seed(kTagFresh, static_cast<uint64_t>(target))));
        return random_params(source_.model(), rng, config_.theta_init_scale);
      }
    }
    return theta_;
  }

  void round(int t) {
    if (hooks_.on_deploy) hooks_.on_deploy(t, theta_);
    source_.mark(RoundSource::AccessEvent::deploy, t);
    source_.advance_visible(t);

    RoundRecord rec;
    rec.t = t;
    rec.theta = theta_;

    // prequential evaluation of theta_t on the newly arrived D_t
    rec.eval_loss = source_.loss_at(t, theta_);
    if (source_.kind() == GradientSourceKind::empirical &&
        source_.scenario().task == TaskKind::classification) {
      const DomainBatch& batch = source_.batch(t);
      const Vec scores = predict(source_.model(), theta_, batch);
      bool has_pos = false, has_neg = false;
      for (int i = 0; i < batch.n(); ++i) (batch.labels[i] == 1.0 ? has_pos : has_neg) = true;
      if (has_pos && has_neg) rec.eval_auc = desk_auc(scores, batch.labels);
    }
    source_.mark(RoundSource::AccessEvent::eval_done, t);

    const Vec g_t = source_.grad_at(t, theta_);
    rec.grad_u_sq = smoothed_grad(source_, t, config_.w, theta_).squaredNorm();
    rec.grad_u_train_sq = smoothed_grad(source_, t - 1, config_.w, theta_).squaredNorm();
    const Vec m_val = gen_.eval_m(source_, theta_);
    rec.resid_sq = (g_t - m_val).squaredNorm();
    const double g_sq = g_t.squaredNorm();
    rec.forecast_err = g_sq > 0.0 ? rec.resid_sq / g_sq : kNaN;
    rec.inner_iters = last_inner_.iters;
    rec.stop = last_inner_.stop;
    rec.terminal_norm = last_inner_.terminal_norm;
    rec.snapshots = static_cast<int>(last_inner_.snapshots.size());

    if (config_.trace) {
      for (size_t i = 0; i < last_inner_.trace_iterates.size(); ++i) {
        const Vec& snap = last_inner_.trace_iterates[i];
        const Vec g = source_.grad_at(t, snap);
        TraceRecord tr;
        tr.t = t;
        tr.iter = static_cast<int>(i) + 1;
        tr.grad_sq = g.squaredNorm();
        if (tr.grad_sq > 0.0)
          tr.forecast_err = (gen_.eval_m(source_, snap) - g).squaredNorm() / tr.grad_sq;
        result_.ledger.traces.push_back(tr);
      }
    }

    meta_update(t, g_t, rec);
    result_.ledger.rounds.push_back(std::move(rec));

    RoundOutcome outcome;
    outcome.t = t;
    outcome.theta = theta_;
    outcome.inner_iters = last_inner_.iters;
    outcome.terminal_generator_norm = last_inner_.terminal_norm;
    outcome.stop = last_inner_.stop;
    outcome.snapshots = static_cast<int>(last_inner_.snapshots.size());
    result_.rounds.push_back(std::move(outcome));

    source_.mark(RoundSource::AccessEvent::train_begin, t);
    if (t < T_) {
      gen_ = build_generator(t + 1);
      last_inner_ = descend(warm_start(t + 1));
      theta_ = last_inner_.theta;
      theta_history_.push_back(theta_);
    }
  }

  void meta_update(int t, const Vec& g_t, RoundRecord& rec) {
    if (kit_.algo == Algorithm::fgd_linear) {
      std::vector<Vec> lag_grads;
      lag_grads.reserve(config_.b);
      for (int i = 1; i <= config_.b; ++i) lag_grads.push_back(source_.grad_at(t - i, theta_));
      const MetaLoss ml = meta_loss_and_grad(kit_.phi, lag_grads, g_t);
      rec.h = ml.h;
      HRecord hr;
      hr.quad = ml;
      hr.phi = kit_.phi.a;
      hr.h = ml.h;
      rec.h_rec = std::move(hr);
      result_.phi_trajectory.push_back(kit_.phi.a);

      max_grad_norm_ = std::max(max_grad_norm_, g_t.norm());
      for (const Vec& g : lag_grads) max_grad_norm_ = std::max(max_grad_norm_, g.norm());

      if (config_.b > 1 && !kit_.meta_disabled) {
        if (kit_.frozen_eta_phi <= 0.0) {
          if (config_.eta_phi > 0.0) {
            kit_.frozen_eta_phi = config_.eta_phi;
          } else if (max_grad_norm_ > 0.0) {
            // square-root schedule with M = the running max gradient norm
            kit_.frozen_eta_phi = std::sqrt(std::log(static_cast<double>(config_.b)) /
                                            (static_cast<double>(T_) *
                                             std::pow(max_grad_norm_, 4)));
          }
        }
        if (kit_.frozen_eta_phi > 0.0)
          kit_.phi = eg_update(kit_.phi, ml.grad, kit_.frozen_eta_phi);
      }
      if (t == T_) result_.phi_trajectory.push_back(kit_.phi.a);
    } else if (kit_.algo == Algorithm::fgd_neural) {
      if (!kit_.meta_disabled && !last_inner_.snapshots.empty() && config_.meta_steps > 0) {
        std::vector<MetaLoss> quads;
        quads.reserve(last_inner_.snapshots.size());
        for (const Vec& snap : last_inner_.snapshots) {
          std::vector<Vec> lag_grads;
          lag_grads.reserve(config_.b);
          for (int i = 1; i <= config_.b; ++i)
            lag_grads.push_back(source_.grad_at(t - i, snap));
          quads.push_back(lag_quadratic(lag_grads, source_.grad_at(t, snap)));
        }
        const std::vector<Vec> summaries = target_summaries(source_, t, config_.b);
        const double eta = config_.eta_phi > 0.0 ? config_.eta_phi : 0.01;
        kit_.frozen_eta_phi = eta;
        for (int k = 0; k < config_.meta_steps; ++k) {
          const double before = kit_.net->train_step(summaries, quads, eta);
          if (k == 0) rec.h = before;
        }
      } else if (last_inner_.snapshots.empty()) {
        ++skipped_meta_updates_;
      }
      result_.net_checkpoints.push_back(kit_.net->weights());
    }
  }

  TrainerConfig config_;
  RoundSource& source_;
  int T_;
  uint64_t run_seed_;
  PipelineKit kit_;
  TrainerHooks hooks_;

  RunResult result_;
  Vec theta_;
  std::vector<Vec> theta_history_;
  RoundGenerator gen_;
  InnerResult last_inner_;
  double max_grad_norm_ = 0.0;
  int skipped_meta_updates_ = 0;
};

}  // namespace

RunResult run_bu(const TrainerConfig& config, RoundSource& source, int T, uint64_t run_seed,
                 const TrainerHooks& hooks) {
  PipelineKit kit;
  kit.algo = config.algorithm == Algorithm::iu ? Algorithm::iu : Algorithm::bu;
  TrainerConfig cfg = config;
  if (cfg.algorithm != Algorithm::iu) cfg.algorithm = Algorithm::bu;
  return PipelineDriver(cfg, source, T, run_seed, std::move(kit), hooks).run();
}

RunResult run_mgd(const TrainerConfig& config, RoundSource& source, int T, uint64_t run_seed,
                  const GeneratorSchedule& schedule, const TrainerHooks& hooks) {
  if (schedule.lag == 0 && !schedule.oracle)
    throw ConfigError("mgd needs a lag or an oracle generator");
  PipelineKit kit;
  kit.algo = Algorithm::mgd;
  kit.schedule = &schedule;
  TrainerConfig cfg = config;
  cfg.algorithm = Algorithm::mgd;
  return PipelineDriver(cfg, source, T, run_seed, std::move(kit), hooks).run();
}

RunResult run_fgd_linear(const TrainerConfig& config, RoundSource& source, int T,
                         uint64_t run_seed, const TrainerHooks& hooks) {
  PipelineKit kit;
  kit.algo = Algorithm::fgd_linear;
  kit.phi = SimplexWeights::uniform(config.b);
  kit.meta_disabled = config.eta_phi == 0.0;
  TrainerConfig cfg = config;
  cfg.algorithm = Algorithm::fgd_linear;
  return PipelineDriver(cfg, source, T, run_seed, std::move(kit), hooks).run();
}

RunResult run_fgd_neural(const TrainerConfig& config, RoundSource& source, int T,
                         uint64_t run_seed, const NeuralMfggConfig& net_config,
                         const TrainerHooks& hooks) {
  PipelineKit kit;
  kit.algo = Algorithm::fgd_neural;
  NeuralMfggConfig nc = net_config;
  nc.b = config.b;
  nc.d1 = source.scenario().d;
  nc.seed = mix_seed(run_seed, kTagNet);
  kit.net.emplace(nc);
  kit.meta_disabled = config.eta_phi == 0.0;
  TrainerConfig cfg = config;
  cfg.algorithm = Algorithm::fgd_neural;
  return PipelineDriver(cfg, source, T, run_seed, std::move(kit), hooks).run();
}

RunResult run_trainer(const TrainerConfig& config, RoundSource& source, int T, uint64_t run_seed,
                      const GeneratorSchedule* schedule, const TrainerHooks& hooks) {
  switch (config.algorithm) {
    case Algorithm::iu:
    case Algorithm::bu:
      return run_bu(config, source, T, run_seed, hooks);
    case Algorithm::mgd:
      if (schedule == nullptr) throw ConfigError("mgd needs a generator schedule");
      return run_mgd(config, source, T, run_seed, *schedule, hooks);
    case Algorithm::fgd_linear:
      return run_fgd_linear(config, source, T, run_seed, hooks);
    case Algorithm::fgd_neural: {
      NeuralMfggConfig nc;
      nc.d2 = config.d2;
      nc.mlp_hidden = config.mlp_hidden;
      return run_fgd_neural(config, source, T, run_seed, nc, hooks);
    }
  }
  throw ConfigError("unknown algorithm");
}

}  // namespace fgd

#include "fgd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace fgd {

using nlohmann::json;

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::none: return "none";
    case StopReason::threshold: return "threshold";
    case StopReason::iter_cap: return "iter_cap";
    case StopReason::one_pass_end: return "one_pass_end";
  }
  return "?";
}

StopReason stop_reason_from_string(const std::string& s) {
  if (s == "none") return StopReason::none;
  if (s == "threshold") return StopReason::threshold;
  if (s == "iter_cap") return StopReason::iter_cap;
  if (s == "one_pass_end") return StopReason::one_pass_end;
  throw ConfigError("unknown stop reason '" + s + "'");
}

void RegretLedger::require_complete() const {
  if (static_cast<int>(rounds.size()) != T)
    throw PreconditionError("ledger holds " + std::to_string(rounds.size()) + " rounds, expected " +
                            std::to_string(T));
  for (int i = 0; i < T; ++i) {
    if (rounds[i].t != i + 1) throw PreconditionError("ledger rounds are not contiguous");
    if (rounds[i].grad_u_sq < 0.0) throw PreconditionError("negative stored norm");
  }
}

namespace {

json vec_to_json(const Vec& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Vec vec_from_json(const json& arr) {
  Vec v(arr.size());
  for (size_t i = 0; i < arr.size(); ++i) v[i] = arr[i].get<double>();
  return v;
}

json mat_to_json(const Mat& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) rows.push_back(vec_to_json(m.row(i).transpose()));
  return rows;
}

Mat mat_from_json(const json& rows) {
  const int r = static_cast<int>(rows.size());
  const int c = r > 0 ? static_cast<int>(rows[0].size()) : 0;
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rows[i][j].get<double>();
  return m;
}

// NaN is not representable in JSON; encode as null
json num_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

double num_from(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return kNaN;
  return j[key].get<double>();
}

}  // namespace

void RegretLedger::write_jsonl(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  json meta = {{"type", "meta"},
               {"algorithm", algorithm},
               {"scenario", scenario},
               {"model", model},
               {"source", source},
               {"b", b},
               {"w", w},
               {"delta", delta},
               {"eta", eta},
               {"eta_phi", eta_phi},
               {"T", T},
               {"seed", seed},
               {"observed_grad_bound", observed_grad_bound},
               {"skipped_meta_updates", skipped_meta_updates}};
  out << meta.dump() << "\n";
  for (const RoundRecord& r : rounds) {
    json row = {{"type", "round"},
                {"t", r.t},
                {"theta", vec_to_json(r.theta)},
                {"grad_u_sq", num_or_null(r.grad_u_sq)},
                {"grad_u_train_sq", num_or_null(r.grad_u_train_sq)},
                {"resid_sq", num_or_null(r.resid_sq)},
                {"h", num_or_null(r.h)},
                {"forecast_err", num_or_null(r.forecast_err)},
                {"eval_loss", num_or_null(r.eval_loss)},
                {"eval_auc", num_or_null(r.eval_auc)},
                {"inner_iters", r.inner_iters},
                {"snapshots", r.snapshots},
                {"terminal_norm", num_or_null(r.terminal_norm)},
                {"stop", to_string(r.stop)}};
    if (r.h_rec) {
      row["h_gram"] = mat_to_json(r.h_rec->quad.gram);
      row["h_cross"] = vec_to_json(r.h_rec->quad.cross);
      row["h_target_sq"] = r.h_rec->quad.target_sq;
      row["phi"] = vec_to_json(r.h_rec->phi);
    }
    out << row.dump() << "\n";
  }
  for (const TraceRecord& tr : traces) {
    json row = {{"type", "trace"},
                {"t", tr.t},
                {"iter", tr.iter},
                {"grad_sq", num_or_null(tr.grad_sq)},
                {"forecast_err", num_or_null(tr.forecast_err)}};
    out << row.dump() << "\n";
  }
}

RegretLedger RegretLedger::read_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  RegretLedger ledger;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    const std::string type = j.at("type").get<std::string>();
    if (type == "meta") {
      ledger.algorithm = j.at("algorithm").get<std::string>();
      ledger.scenario = j.at("scenario").get<std::string>();
      ledger.model = j.at("model").get<std::string>();
      ledger.source = j.at("source").get<std::string>();
      ledger.b = j.at("b").get<int>();
      ledger.w = j.at("w").get<int>();
      ledger.delta = j.at("delta").get<double>();
      ledger.eta = j.at("eta").get<double>();
      ledger.eta_phi = j.at("eta_phi").get<double>();
      ledger.T = j.at("T").get<int>();
      ledger.seed = j.at("seed").get<uint64_t>();
      ledger.observed_grad_bound = j.at("observed_grad_bound").get<double>();
      ledger.skipped_meta_updates = j.value("skipped_meta_updates", 0);
    } else if (type == "round") {
      RoundRecord r;
      r.t = j.at("t").get<int>();
      r.theta = vec_from_json(j.at("theta"));
      r.grad_u_sq = num_from(j, "grad_u_sq");
      r.grad_u_train_sq = num_from(j, "grad_u_train_sq");
      r.resid_sq = num_from(j, "resid_sq");
      r.h = num_from(j, "h");
      r.forecast_err = num_from(j, "forecast_err");
      r.eval_loss = num_from(j, "eval_loss");
      r.eval_auc = num_from(j, "eval_auc");
      r.inner_iters = j.at("inner_iters").get<int>();
      r.snapshots = j.at("snapshots").get<int>();
      r.terminal_norm = num_from(j, "terminal_norm");
      r.stop = stop_reason_from_string(j.at("stop").get<std::string>());
      if (j.contains("h_gram")) {
        HRecord hr;
        hr.quad.gram = mat_from_json(j.at("h_gram"));
        hr.quad.cross = vec_from_json(j.at("h_cross"));
        hr.quad.target_sq = j.at("h_target_sq").get<double>();
        hr.phi = vec_from_json(j.at("phi"));
        hr.h = r.h;
        r.h_rec = std::move(hr);
      }
      ledger.rounds.push_back(std::move(r));
    } else if (type == "trace") {
      TraceRecord tr;
      tr.t = j.at("t").get<int>();
      tr.iter = j.at("iter").get<int>();
      tr.grad_sq = num_from(j, "grad_sq");
      tr.forecast_err = num_from(j, "forecast_err");
      ledger.traces.push_back(tr);
    }
  }
  return ledger;
}

double local_regret(const RegretLedger& ledger, int w) {
  if (w != ledger.w)
    throw PreconditionError("ledger was recorded with w=" + std::to_string(ledger.w) +
                            ", asked for w=" + std::to_string(w));
  ledger.require_complete();
  double sum = 0.0;
  for (const RoundRecord& r : ledger.rounds) {
    if (!std::isfinite(r.grad_u_sq)) throw PreconditionError("missing grad_u_sq record");
    sum += r.grad_u_sq;
  }
  return sum / ledger.T;
}

double gradient_variation_summand(const RoundGradOracle& oracle, const ProbeSet& probe, int w,
                                  int t) {
  if (probe.size() == 0) throw PreconditionError("empty probe set");
  double best = 0.0;
  for (const Vec& theta : probe.points) {
    const Vec g_now = oracle(t, theta);
    const Vec g_lag = t - w >= 1 ? oracle(t - w, theta) : Vec(Vec::Zero(g_now.size()));
    best = std::max(best, (g_now - g_lag).squaredNorm());
  }
  return best;
}

double gradient_variation(const RoundGradOracle& oracle, const ProbeSet& probe, int w, int T) {
  if (T < 1) throw PreconditionError("T must be >= 1");
  double sum = 0.0;
  for (int t = 1; t <= T; ++t) sum += gradient_variation_summand(oracle, probe, w, t);
  return sum / T;
}

double generator_error(const GeneratorOracle& generator, const RoundGradOracle& oracle,
                       const ProbeSet& probe, int T) {
  if (T < 1) throw PreconditionError("T must be >= 1");
  if (probe.size() == 0) throw PreconditionError("empty probe set");
  double sum = 0.0;
  for (int t = 1; t <= T; ++t) {
    double best = 0.0;
    for (const Vec& theta : probe.points) {
      const Vec diff = oracle(t, theta) - generator(t, theta);
      best = std::max(best, diff.squaredNorm());
    }
    sum += best;
  }
  return sum / T;
}

BoundReport bound_check_batch_update(const RegretLedger& ledger, double v_w, double delta) {
  if (ledger.algorithm != "bu" && ledger.algorithm != "iu")
    throw PreconditionError("batch-update bound check needs a BU/IU ledger, got '" + ledger.algorithm + "'");
  if (ledger.b != ledger.w)
    throw PreconditionError("batch-update bound check needs b == w (got b=" + std::to_string(ledger.b) +
                            ", w=" + std::to_string(ledger.w) + ")");
  ledger.require_complete();

  BoundReport report;
  const int w = ledger.w;
  report.lhs = local_regret(ledger, w);
  report.generalization_term = 2.0 * v_w / (w * w);
  report.optimization_term = 2.0 * delta * delta;
  report.rhs = report.optimization_term + report.generalization_term;
  report.slack = report.rhs - report.lhs;

  double train_sum = 0.0;
  for (const RoundRecord& r : ledger.rounds) {
    train_sum += std::isfinite(r.grad_u_train_sq) ? r.grad_u_train_sq : 0.0;
    if (r.stop == StopReason::iter_cap) report.cap_preempted = true;
  }
  report.rhs_tight = 2.0 * train_sum / ledger.T + report.generalization_term;
  report.slack_tight = report.rhs_tight - report.lhs;
  return report;
}

BoundReport bound_check_meta_regret(const RegretLedger& ledger, const Vec& phi_star, double eta_phi,
                             int b, double grad_bound) {
  ledger.require_complete();
  if (phi_star.size() != b) throw ShapeError("phi_star length != b");

  BoundReport report;
  double lhs = 0.0;
  Mat gram_total = Mat::Zero(b, b);
  Vec cross_total = Vec::Zero(b);
  for (const RoundRecord& r : ledger.rounds) {
    if (!r.h_rec) throw PreconditionError("round " + std::to_string(r.t) + " has no h record");
    lhs += r.h_rec->quad.eval_at(r.h_rec->phi) - r.h_rec->quad.eval_at(phi_star);
    gram_total += r.h_rec->quad.gram;
    cross_total += r.h_rec->quad.cross;
  }
  report.lhs = lhs;

  if (eta_phi <= 0.0) {
    report.degenerate = true;
    report.rhs = std::numeric_limits<double>::infinity();
    report.slack = std::numeric_limits<double>::infinity();
  } else {
    const double m4 = std::pow(grad_bound, 4);
    report.optimization_term = std::log(static_cast<double>(b)) / eta_phi;
    report.generalization_term = 32.0 * eta_phi * m4 * ledger.T;
    report.rhs = report.optimization_term + report.generalization_term;
    report.slack = report.rhs - report.lhs;
  }

  // stationarity certificate for the comparator: sum_t h_t is convex, so the
  // Frank-Wolfe gap <g, phi*> - min_i g_i vanishes exactly at a minimizer
  const auto total = [&](const Vec& phi) {
    return phi.dot(gram_total * phi) - 2.0 * cross_total.dot(phi);
  };
  const Vec g = 2.0 * (gram_total * phi_star - cross_total);
  const double gap = g.dot(phi_star) - g.minCoeff();
  const double scale = g.cwiseAbs().maxCoeff() + std::abs(total(phi_star)) + 1.0;
  if (gap > 1e-6 * scale) report.oracle_warning = true;
  return report;
}

namespace {

void grid_recurse(const std::function<double(const Vec&)>& objective, Vec& point, int coord,
                  int remaining, int steps, double& best_value, Vec& best_point) {
  if (coord == point.size() - 1) {
    point[coord] = static_cast<double>(remaining) / steps;
    const double value = objective(point);
    if (value < best_value) {
      best_value = value;
      best_point = point;
    }
    return;
  }
  for (int k = 0; k <= remaining; ++k) {
    point[coord] = static_cast<double>(k) / steps;
    grid_recurse(objective, point, coord + 1, remaining - k, steps, best_value, best_point);
  }
}

}  // namespace

Vec simplex_search(const std::function<double(const Vec&)>& objective, int b, int grid_steps,
                   int random_draws, uint64_t seed) {
  if (b < 1) throw ConfigError("simplex dimension must be >= 1");
  if (b == 1) return Vec::Ones(1);
  double best_value = std::numeric_limits<double>::infinity();
  Vec best_point = Vec::Constant(b, 1.0 / b);
  if (b <= 3) {
    if (grid_steps < 1) throw ConfigError("grid steps must be >= 1");
    Vec point(b);
    grid_recurse(objective, point, 0, grid_steps, grid_steps, best_value, best_point);
  } else {
    if (random_draws < 1) throw ConfigError("random draws must be >= 1");
    Rng rng(mix_seed(seed, 0x73696d70));
    Vec point(b);
    for (int it = 0; it < random_draws; ++it) {
      double sum = 0.0;
      for (int i = 0; i < b; ++i) {
        // -log U is Exp(1); normalized exponentials are uniform on the simplex
        double u = rng.uniform();
        while (u <= 0.0) u = rng.uniform();
        point[i] = -std::log(u);
        sum += point[i];
      }
      point /= sum;
      const double value = objective(point);
      if (value < best_value) {
        best_value = value;
        best_point = point;
      }
    }
  }
  return best_point;
}

Vec ledger_phi_star(const RegretLedger& ledger, uint64_t seed) {
  ledger.require_complete();
  const int b = ledger.b;
  Mat gram = Mat::Zero(b, b);
  Vec cross = Vec::Zero(b);
  for (const RoundRecord& r : ledger.rounds) {
    if (!r.h_rec) throw PreconditionError("round " + std::to_string(r.t) + " has no h record");
    gram += r.h_rec->quad.gram;
    cross += r.h_rec->quad.cross;
  }
  const auto objective = [&](const Vec& phi) {
    return phi.dot(gram * phi) - 2.0 * cross.dot(phi);
  };
  Vec phi = simplex_search(objective, b, 100, 100000, seed);
  if (b == 1) return phi;

  // polish: exponentiated-gradient descent on the convex quadratic
  const double curvature = gram.norm() + 1e-12;
  SimplexWeights point{phi.cwiseMax(kSimplexFloor)};
  point.a /= point.a.sum();
  double value = objective(point.a);
  for (int it = 0; it < 5000; ++it) {
    const Vec g = 2.0 * (gram * point.a - cross);
    const SimplexWeights next = eg_update(point, g, 1.0 / curvature);
    const double next_value = objective(next.a);
    if (next_value > value - 1e-15 * (std::abs(value) + 1.0)) break;
    point = next;
    value = next_value;
  }
  return value < objective(phi) ? point.a : phi;
}

double desk_auc(const Vec& scores, const Vec& labels) {
  if (scores.size() != labels.size()) throw ShapeError("scores/labels length mismatch");
  const int n = static_cast<int>(scores.size());
  int positives = 0;
  for (int i = 0; i < n; ++i) {
    if (labels[i] != 0.0 && labels[i] != 1.0) throw PreconditionError("labels must be 0/1");
    positives += labels[i] == 1.0;
  }
  const int negatives = n - positives;
  if (positives == 0 || negatives == 0)
    throw PreconditionError("AUC undefined: labels contain a single class");

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return scores[a] < scores[b]; });

  // average ranks over ties, then the Mann-Whitney statistic
  double rank_sum_pos = 0.0;
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * (i + j) + 1.0;  // ranks are 1-based
    for (int k = i; k <= j; ++k)
      if (labels[order[k]] == 1.0) rank_sum_pos += avg_rank;
    i = j + 1;
  }
  const double u = rank_sum_pos - 0.5 * positives * (positives + 1.0);
  return u / (static_cast<double>(positives) * negatives);
}

}  // namespace fgd

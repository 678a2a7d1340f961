#include "fgd/models.hpp"

#include <algorithm>
#include <cmath>

namespace fgd {

void DomainBatch::validate() const {
  if (n() < 1) throw ShapeError("DomainBatch needs at least one example");
  if (features.rows() != labels.size())
    throw ShapeError("feature rows (" + std::to_string(features.rows()) +
                     ") != label length (" + std::to_string(labels.size()) + ")");
  if (t < 1) throw PreconditionError("round index must be >= 1");
}

DomainBatch slice(const DomainBatch& batch, int begin, int count) {
  if (begin < 0 || begin >= batch.n() || count < 1)
    throw PreconditionError("bad slice bounds");
  const int m = std::min(count, batch.n() - begin);
  DomainBatch out;
  out.t = batch.t;
  out.features = batch.features.middleRows(begin, m);
  out.labels = batch.labels.segment(begin, m);
  return out;
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::linear_squared: return "linear_squared";
    case ModelKind::logistic: return "logistic";
    case ModelKind::mlp: return "mlp";
  }
  return "?";
}

int LossModelSpec::param_dim() const {
  switch (kind) {
    case ModelKind::linear_squared:
    case ModelKind::logistic: return d;
    case ModelKind::mlp: return hidden * d + 2 * hidden + 1;
  }
  return 0;
}

void LossModelSpec::validate() const {
  if (d < 1) throw ConfigError("model dimension d must be >= 1");
  if (kind == ModelKind::mlp && hidden < 1) throw ConfigError("mlp hidden width must be >= 1");
}

namespace {

void check_shapes(const LossModelSpec& spec, const Vec& theta, const DomainBatch& batch) {
  if (theta.size() != spec.param_dim())
    throw ShapeError("theta dimension " + std::to_string(theta.size()) + " != model param dim " +
                     std::to_string(spec.param_dim()));
  if (batch.dim() != spec.d)
    throw ShapeError("batch feature dim " + std::to_string(batch.dim()) + " != model d " +
                     std::to_string(spec.d));
}

// log(1 + exp(-|s|)) + max(s,0) - s*y, stable for large |s|
double logloss_of_score(double s, double y) {
  return std::log1p(std::exp(-std::abs(s))) + std::max(s, 0.0) - s * y;
}

double sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

struct MlpView {
  Eigen::Map<const Mat> w;   // hidden x d
  Eigen::Map<const Vec> b1;  // hidden
  Eigen::Map<const Vec> v;   // hidden
  double b2;
};

MlpView mlp_view(const LossModelSpec& spec, const Vec& theta) {
  const int h = spec.hidden;
  const int d = spec.d;
  const double* p = theta.data();
  return {Eigen::Map<const Mat>(p, h, d), Eigen::Map<const Vec>(p + h * d, h),
          Eigen::Map<const Vec>(p + h * d + h, h), p[h * d + 2 * h]};
}

}  // namespace

Vec predict(const LossModelSpec& spec, const Vec& theta, const DomainBatch& batch) {
  check_shapes(spec, theta, batch);
  switch (spec.kind) {
    case ModelKind::linear_squared:
      return batch.features * theta;
    case ModelKind::logistic: {
      Vec s = batch.features * theta;
      for (int i = 0; i < s.size(); ++i) s[i] = sigmoid(s[i]);
      return s;
    }
    case ModelKind::mlp: {
      const MlpView m = mlp_view(spec, theta);
      // pre-activations per example: rows of X * W^T + b1
      Mat u = (batch.features * m.w.transpose()).rowwise() + m.b1.transpose();
      return (u.array().tanh().matrix() * m.v).array() + m.b2;
    }
  }
  throw ConfigError("unknown model kind");
}

double loss(const LossModelSpec& spec, const Vec& theta, const DomainBatch& batch) {
  check_shapes(spec, theta, batch);
  double total = 0.0;
  switch (spec.kind) {
    case ModelKind::linear_squared:
    case ModelKind::mlp: {
      const Vec f = predict(spec, theta, batch);
      total = (f - batch.labels).squaredNorm();
      break;
    }
    case ModelKind::logistic: {
      const Vec s = batch.features * theta;
      for (int i = 0; i < s.size(); ++i) total += logloss_of_score(s[i], batch.labels[i]);
      break;
    }
  }
  const double mean = total / batch.n();
  if (!std::isfinite(mean)) throw NumericError("non-finite loss");
  return mean;
}

Vec grad(const LossModelSpec& spec, const Vec& theta, const DomainBatch& batch) {
  check_shapes(spec, theta, batch);
  const int n = batch.n();
  Vec g = Vec::Zero(theta.size());
  switch (spec.kind) {
    case ModelKind::linear_squared: {
      const Vec resid = batch.features * theta - batch.labels;
      g = 2.0 * (batch.features.transpose() * resid) / n;
      break;
    }
    case ModelKind::logistic: {
      Vec s = batch.features * theta;
      for (int i = 0; i < n; ++i) s[i] = sigmoid(s[i]) - batch.labels[i];
      g = (batch.features.transpose() * s) / n;
      break;
    }
    case ModelKind::mlp: {
      const MlpView m = mlp_view(spec, theta);
      const int h = spec.hidden;
      const int d = spec.d;
      Mat u = (batch.features * m.w.transpose()).rowwise() + m.b1.transpose();
      Mat a = u.array().tanh();                            // n x h
      Vec f = (a * m.v).array() + m.b2;                    // n
      Vec df = 2.0 * (f - batch.labels) / n;               // dloss/df per example
      // du = df * (v o (1 - a^2)) per example, n x h
      Mat du = (1.0 - a.array().square()).matrix();
      du = du.array().rowwise() * m.v.transpose().array();
      du = du.array().colwise() * df.array();
      Eigen::Map<Mat> gw(g.data(), h, d);
      Eigen::Map<Vec> gb1(g.data() + h * d, h);
      Eigen::Map<Vec> gv(g.data() + h * d + h, h);
      gw = du.transpose() * batch.features;
      gb1 = du.colwise().sum();
      gv = a.transpose() * df;
      g[h * d + 2 * h] = df.sum();
      break;
    }
  }
  if (!all_finite(g)) throw NumericError("non-finite gradient");
  return g;
}

Vec finite_diff_grad(const LossModelSpec& spec, const Vec& theta, const DomainBatch& batch,
                     double step) {
  if (step <= 0.0) throw PreconditionError("finite-difference step must be > 0");
  check_shapes(spec, theta, batch);
  Vec g(theta.size());
  Vec probe = theta;
  for (int i = 0; i < theta.size(); ++i) {
    probe[i] = theta[i] + step;
    const double up = loss(spec, probe, batch);
    probe[i] = theta[i] - step;
    const double down = loss(spec, probe, batch);
    probe[i] = theta[i];
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

Vec random_params(const LossModelSpec& spec, Rng& rng, double scale) {
  return scale * rng.gaussian_vec(spec.param_dim());
}

}  // namespace fgd

#include "fgd/neural_mfgg.hpp"

#include <cmath>

namespace fgd {

namespace {

Vec softmax(const Vec& logits) {
  const double shift = logits.maxCoeff();
  Vec e = (logits.array() - shift).exp();
  return e / e.sum();
}

// d(softmax)/dx applied to an upstream gradient: y o (g - <y, g>)
Vec softmax_backward(const Vec& y, const Vec& g) {
  return y.array() * (g.array() - y.dot(g));
}

}  // namespace

void NeuralMfggConfig::validate() const {
  if (b < 1) throw ConfigError("mfgg window b must be >= 1");
  if (d1 < 1 || d2 < 1 || mlp_hidden < 1) throw ConfigError("mfgg widths must be >= 1");
}

struct NeuralMfgg::ForwardCache {
  Mat e;       // d1 x b
  Mat q, k, v; // d2 x b
  Mat p;       // b x b, rowwise softmax
  Mat z;       // d2 x b
  Vec zvec;    // d2*b
  Vec hid;     // tanh activations
  Vec a;       // output coefficients
};

NeuralMfgg::NeuralMfgg(const NeuralMfggConfig& config) : config_(config) {
  config_.validate();
  Rng rng(mix_seed(config_.seed, 0x6e657572));
  const auto init = [&](int rows, int cols) {
    Mat m(rows, cols);
    for (int j = 0; j < cols; ++j)
      for (int i = 0; i < rows; ++i) m(i, j) = config_.init_scale * rng.gaussian();
    return m;
  };
  wq_ = init(config_.d2, config_.d1);
  wk_ = init(config_.d2, config_.d1);
  wv_ = init(config_.d2, config_.d1);
  w1_ = init(config_.mlp_hidden, config_.d2 * config_.b);
  c1_ = Vec::Zero(config_.mlp_hidden);
  w2_ = init(config_.b, config_.mlp_hidden);
  c2_ = Vec::Zero(config_.b);
}

void NeuralMfgg::run_forward(const std::vector<Vec>& summaries, ForwardCache& cache) const {
  const int b = config_.b;
  if (static_cast<int>(summaries.size()) != b)
    throw ShapeError("expected " + std::to_string(b) + " domain summaries, got " +
                     std::to_string(summaries.size()));
  cache.e.resize(config_.d1, b);
  for (int j = 0; j < b; ++j) {
    if (summaries[j].size() != config_.d1) throw ShapeError("summary width != d1");
    cache.e.col(j) = summaries[j];
  }
  cache.q = wq_ * cache.e;
  cache.k = wk_ * cache.e;
  cache.v = wv_ * cache.e;

  const double scale = 1.0 / std::sqrt(static_cast<double>(config_.d2));
  Mat scores = scale * (cache.q.transpose() * cache.k);  // b x b
  cache.p.resize(b, b);
  for (int j = 0; j < b; ++j)
    cache.p.row(j) = softmax(scores.row(j).transpose()).transpose();
  cache.z = cache.v * cache.p.transpose();

  cache.zvec = Eigen::Map<const Vec>(cache.z.data(), cache.z.size());
  cache.hid = (w1_ * cache.zvec + c1_).array().tanh();
  cache.a = softmax(w2_ * cache.hid + c2_);
}

SimplexWeights NeuralMfgg::forward(const std::vector<Vec>& summaries) const {
  ForwardCache cache;
  run_forward(summaries, cache);
  return {cache.a};
}

Vec NeuralMfgg::backward(const ForwardCache& cache, const Vec& grad_a) const {
  const int b = config_.b;
  const double scale = 1.0 / std::sqrt(static_cast<double>(config_.d2));

  const Vec dlogits = softmax_backward(cache.a, grad_a);
  const Mat dw2 = dlogits * cache.hid.transpose();
  const Vec dc2 = dlogits;
  const Vec dhid = w2_.transpose() * dlogits;
  const Vec du = dhid.array() * (1.0 - cache.hid.array().square());
  const Mat dw1 = du * cache.zvec.transpose();
  const Vec dc1 = du;
  const Vec dzvec = w1_.transpose() * du;
  const Mat dz = Eigen::Map<const Mat>(dzvec.data(), config_.d2, b);

  const Mat dv = dz * cache.p;
  const Mat dp = dz.transpose() * cache.v;
  Mat dscores(b, b);
  for (int j = 0; j < b; ++j) {
    const Vec prow = cache.p.row(j).transpose();
    dscores.row(j) = softmax_backward(prow, dp.row(j).transpose()).transpose();
  }
  const Mat dq = scale * (cache.k * dscores.transpose());
  const Mat dk = scale * (cache.q * dscores);

  const Mat dwq = dq * cache.e.transpose();
  const Mat dwk = dk * cache.e.transpose();
  const Mat dwv = dv * cache.e.transpose();

  Vec flat(weight_dim());
  double* p = flat.data();
  const auto put_mat = [&p](const Mat& m) {
    Eigen::Map<Mat>(p, m.rows(), m.cols()) = m;
    p += m.size();
  };
  const auto put_vec = [&p](const Vec& v) {
    Eigen::Map<Vec>(p, v.size()) = v;
    p += v.size();
  };
  put_mat(dwq);
  put_mat(dwk);
  put_mat(dwv);
  put_mat(dw1);
  put_vec(dc1);
  put_mat(dw2);
  put_vec(dc2);
  return flat;
}

double NeuralMfgg::meta_loss(const std::vector<Vec>& summaries,
                             const std::vector<MetaLoss>& buffer_quads) const {
  if (buffer_quads.empty()) throw PreconditionError("trajectory buffer is empty");
  ForwardCache cache;
  run_forward(summaries, cache);
  double total = 0.0;
  for (const MetaLoss& q : buffer_quads) total += q.eval_at(cache.a);
  return total / buffer_quads.size();
}

Vec NeuralMfgg::weight_grad(const std::vector<Vec>& summaries,
                            const std::vector<MetaLoss>& buffer_quads) const {
  if (buffer_quads.empty()) throw PreconditionError("trajectory buffer is empty");
  ForwardCache cache;
  run_forward(summaries, cache);
  Vec grad_a = Vec::Zero(config_.b);
  for (const MetaLoss& q : buffer_quads) grad_a += q.grad_at(cache.a);
  grad_a /= buffer_quads.size();
  return backward(cache, grad_a);
}

double NeuralMfgg::train_step(const std::vector<Vec>& summaries,
                              const std::vector<MetaLoss>& buffer_quads, double eta_phi) {
  if (eta_phi <= 0.0) throw ConfigError("meta learning rate must be > 0");
  const double before = meta_loss(summaries, buffer_quads);
  const Vec g = weight_grad(summaries, buffer_quads);
  set_weights(weights() - eta_phi * g);
  return before;
}

int NeuralMfgg::weight_dim() const {
  const int b = config_.b;
  return 3 * config_.d2 * config_.d1 + config_.mlp_hidden * (config_.d2 * b) +
         config_.mlp_hidden + b * config_.mlp_hidden + b;
}

Vec NeuralMfgg::weights() const {
  Vec flat(weight_dim());
  double* p = flat.data();
  const auto put_mat = [&p](const Mat& m) {
    Eigen::Map<Mat>(p, m.rows(), m.cols()) = m;
    p += m.size();
  };
  const auto put_vec = [&p](const Vec& v) {
    Eigen::Map<Vec>(p, v.size()) = v;
    p += v.size();
  };
  put_mat(wq_);
  put_mat(wk_);
  put_mat(wv_);
  put_mat(w1_);
  put_vec(c1_);
  put_mat(w2_);
  put_vec(c2_);
  return flat;
}

void NeuralMfgg::set_weights(const Vec& w) {
  if (w.size() != weight_dim()) throw ShapeError("flat weight vector has wrong length");
  if (!all_finite(w)) throw NumericError("non-finite weights");
  const double* p = w.data();
  const auto take_mat = [&p](Mat& m) {
    m = Eigen::Map<const Mat>(p, m.rows(), m.cols());
    p += m.size();
  };
  const auto take_vec = [&p](Vec& v) {
    v = Eigen::Map<const Vec>(p, v.size());
    p += v.size();
  };
  take_mat(wq_);
  take_mat(wk_);
  take_mat(wv_);
  take_mat(w1_);
  take_vec(c1_);
  take_mat(w2_);
  take_vec(c2_);
}

Vec domain_summary(const DomainBatch& batch) { return batch.features.colwise().sum(); }

std::vector<Vec> window_summaries(const LagWindow& window, int d) {
  std::vector<Vec> out;
  out.reserve(window.capacity());
  for (int i = 1; i <= window.capacity(); ++i) {
    const DomainBatch* b = window.lag(i);
    out.push_back(b ? domain_summary(*b) : Vec(Vec::Zero(d)));
  }
  return out;
}

SimplexWeights neural_forward(const NeuralMfgg& net, const LagWindow& window) {
  return net.forward(window_summaries(window, net.config().d1));
}

double neural_train_step(NeuralMfgg& net, const std::vector<Vec>& buffer_thetas,
                         const LagWindow& window, const DomainBatch& realized,
                         const LossModelSpec& model, double eta_phi) {
  if (buffer_thetas.empty()) throw PreconditionError("trajectory buffer is empty");
  std::vector<MetaLoss> quads;
  quads.reserve(buffer_thetas.size());
  for (const Vec& theta : buffer_thetas) {
    const Vec target = grad(model, theta, realized);
    quads.push_back(lag_quadratic(window.lag_grads(model, theta), target));
  }
  return net.train_step(window_summaries(window, net.config().d1), quads, eta_phi);
}

}  // namespace fgd

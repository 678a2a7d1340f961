#include "fgd/generators.hpp"

#include <cmath>

namespace fgd {

SimplexWeights SimplexWeights::uniform(int b) {
  if (b < 1) throw ConfigError("simplex dimension must be >= 1");
  return {Vec::Constant(b, 1.0 / b)};
}

SimplexWeights SimplexWeights::one_hot(int b, int lag) {
  if (b < 1 || lag < 1 || lag > b) throw ConfigError("one-hot lag outside 1..b");
  Vec a = Vec::Zero(b);
  a[lag - 1] = 1.0;
  return {a};
}

void SimplexWeights::validate() const {
  if (a.size() < 1) throw ConfigError("empty simplex point");
  double sum = 0.0;
  for (int i = 0; i < a.size(); ++i) {
    if (!(a[i] >= 0.0)) throw ConfigError("simplex entry negative or NaN");
    sum += a[i];
  }
  if (std::abs(sum - 1.0) > 1e-12) throw ConfigError("simplex entries do not sum to 1");
}

LagWindow::LagWindow(int capacity) : capacity_(capacity) {
  if (capacity < 1) throw ConfigError("lag window capacity must be >= 1");
}

void LagWindow::push(DomainBatch batch) {
  batch.validate();
  if (batch.t != newest_round_ + 1)
    throw PreconditionError("window rounds must advance one at a time (got " +
                            std::to_string(batch.t) + " after " + std::to_string(newest_round_) +
                            ")");
  newest_round_ = batch.t;
  batches_.push_front(std::move(batch));
  if (static_cast<int>(batches_.size()) > capacity_) batches_.pop_back();
}

const DomainBatch* LagWindow::lag(int i) const {
  if (i < 1 || i > capacity_) throw PreconditionError("lag outside 1..capacity");
  if (i > static_cast<int>(batches_.size())) return nullptr;
  const DomainBatch& b = batches_[i - 1];
  return b.t >= 1 ? &b : nullptr;
}

Vec LagWindow::lag_grad(int i, const LossModelSpec& model, const Vec& theta) const {
  const DomainBatch* b = lag(i);
  if (b == nullptr) return Vec::Zero(theta.size());
  return grad(model, theta, *b);
}

std::vector<Vec> LagWindow::lag_grads(const LossModelSpec& model, const Vec& theta) const {
  std::vector<Vec> gs;
  gs.reserve(capacity_);
  for (int i = 1; i <= capacity_; ++i) gs.push_back(lag_grad(i, model, theta));
  return gs;
}

Vec linear_combine(const SimplexWeights& phi, const std::vector<Vec>& lag_grads) {
  if (static_cast<int>(lag_grads.size()) != phi.size())
    throw ShapeError("phi length != number of lag gradients");
  if (lag_grads.empty()) throw ShapeError("no lag gradients");
  Vec m = Vec::Zero(lag_grads.front().size());
  for (int i = 0; i < phi.size(); ++i) {
    if (lag_grads[i].size() != m.size()) throw ShapeError("lag gradient dimensions differ");
    m += phi.a[i] * lag_grads[i];
  }
  return m;
}

Vec linear_forward(const SimplexWeights& phi, const LagWindow& window,
                   const LossModelSpec& model, const Vec& theta) {
  if (phi.size() != window.capacity())
    throw ShapeError("phi length != window capacity");
  return linear_combine(phi, window.lag_grads(model, theta));
}

MetaLoss lag_quadratic(const std::vector<Vec>& lag_grads, const Vec& target_grad) {
  const int b = static_cast<int>(lag_grads.size());
  if (b < 1) throw ShapeError("no lag gradients");
  for (const Vec& g : lag_grads)
    if (g.size() != target_grad.size()) throw ShapeError("gradient dimensions differ");

  MetaLoss out;
  out.gram.resize(b, b);
  out.cross.resize(b);
  for (int i = 0; i < b; ++i) {
    out.cross[i] = lag_grads[i].dot(target_grad);
    for (int j = 0; j <= i; ++j) {
      const double gij = lag_grads[i].dot(lag_grads[j]);
      out.gram(i, j) = gij;
      out.gram(j, i) = gij;
    }
  }
  out.target_sq = target_grad.squaredNorm();
  return out;
}

MetaLoss meta_loss_and_grad(const SimplexWeights& phi, const std::vector<Vec>& lag_grads,
                            const Vec& target_grad) {
  const int b = phi.size();
  if (static_cast<int>(lag_grads.size()) != b)
    throw ShapeError("phi length != number of lag gradients");

  MetaLoss out = lag_quadratic(lag_grads, target_grad);
  const Vec m = linear_combine(phi, lag_grads);
  const Vec resid = target_grad - m;
  out.h = resid.squaredNorm();
  out.grad.resize(b);
  for (int i = 0; i < b; ++i) out.grad[i] = -2.0 * lag_grads[i].dot(resid);
  return out;
}

MetaLoss meta_loss_and_grad(const SimplexWeights& phi, const LagWindow& window,
                            const Vec& target_grad, const LossModelSpec& model,
                            const Vec& theta) {
  return meta_loss_and_grad(phi, window.lag_grads(model, theta), target_grad);
}

SimplexWeights eg_update(const SimplexWeights& phi, const Vec& grad_h, double eta_phi) {
  if (eta_phi <= 0.0) throw ConfigError("eg_update learning rate must be > 0");
  if (grad_h.size() != phi.size()) throw ShapeError("grad_h length != phi length");
  phi.validate();
  for (int i = 0; i < phi.size(); ++i)
    if (phi.a[i] <= 0.0)
      throw ConfigError("eg_update needs strictly positive weights; coordinate " +
                        std::to_string(i) + " is dead");

  // shift exponents so the largest is 0; a uniform shift cancels in the
  // normalization, and this keeps exp() from overflowing
  Vec expo = -eta_phi * grad_h;
  const double shift = expo.maxCoeff();
  Vec next(phi.size());
  double sum = 0.0;
  for (int i = 0; i < phi.size(); ++i) {
    next[i] = phi.a[i] * std::exp(expo[i] - shift);
    sum += next[i];
  }
  if (!(sum > 0.0) || !std::isfinite(sum)) throw NumericError("eg_update underflowed");
  next /= sum;

  bool floored = false;
  for (int i = 0; i < next.size(); ++i) {
    if (next[i] < kSimplexFloor) {
      next[i] = kSimplexFloor;
      floored = true;
    }
  }
  if (floored) next /= next.sum();
  return {next};
}

Vec smoothed_generator(const Vec& m_value, const std::vector<Vec>& lag_grads, int w) {
  if (w < 1) throw ConfigError("smoothing window w must be >= 1");
  Vec total = m_value;
  for (int i = 1; i <= w - 1; ++i) {
    if (i <= static_cast<int>(lag_grads.size())) total += lag_grads[i - 1];
    // lags beyond the supplied list correspond to rounds <= 0 and add zero
  }
  return total / w;
}

Vec smoothed_generator(const Vec& m_value, const LagWindow& window, int w,
                       const LossModelSpec& model, const Vec& theta) {
  if (w < 1) throw ConfigError("smoothing window w must be >= 1");
  Vec total = m_value;
  for (int i = 1; i <= w - 1; ++i) {
    if (i <= window.capacity())
      total += window.lag_grad(i, model, theta);
    else if (window.target_round() - i >= 1)
      throw PreconditionError("window too short for smoothing width w");
  }
  return total / w;
}

double forecast_error(const Vec& m_value, const Vec& realized_grad) {
  if (m_value.size() != realized_grad.size()) throw ShapeError("forecast dimensions differ");
  const double denom = realized_grad.squaredNorm();
  if (denom == 0.0)
    throw NumericError("forecast error undefined: realized gradient is zero");
  return (m_value - realized_grad).squaredNorm() / denom;
}

}  // namespace fgd

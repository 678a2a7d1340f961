// Gradient generators m(theta; t): the linear functional autoregressive model
// with exponentiated-gradient meta-updates, the smoothed wrapper m_bar, and
// the normalized forecast-error diagnostic.
//
// Lag convention: the generator for target round t combines the gradients of
// rounds t-1 (lag 1, newest) .. t-b (lag b); gradients of rounds <= 0 are the
// zero vector.

#ifndef FGD_GENERATORS_HPP
#define FGD_GENERATORS_HPP

#include <deque>
#include <optional>
#include <vector>

#include "fgd/models.hpp"

namespace fgd {

// Point on the probability simplex S_b.
struct SimplexWeights {
  Vec a;

  static SimplexWeights uniform(int b);
  static SimplexWeights one_hot(int b, int lag);  // lag in 1..b
  int size() const { return static_cast<int>(a.size()); }
  void validate() const;  // nonneg entries, |sum - 1| <= 1e-12
};

// The last up-to-b observed batches, most recent first. target_round() is the
// round whose gradient the window forecasts.
class LagWindow {
 public:
  explicit LagWindow(int capacity);

  void push(DomainBatch batch);  // batch of round target_round(); advances the window
  int capacity() const { return capacity_; }
  int target_round() const { return newest_round_ + 1; }

  // Batch at lag i (i = 1 is the most recent); nullptr when that round is <= 0
  // or not yet observed.
  const DomainBatch* lag(int i) const;

  // grad of r_{target-i} at theta; zero vector for missing lags.
  Vec lag_grad(int i, const LossModelSpec& model, const Vec& theta) const;
  std::vector<Vec> lag_grads(const LossModelSpec& model, const Vec& theta) const;

 private:
  int capacity_;
  int newest_round_ = 0;
  std::deque<DomainBatch> batches_;  // front = most recent
};

// m = sum_i a_i g_i over precomputed lag gradients (core form).
Vec linear_combine(const SimplexWeights& phi, const std::vector<Vec>& lag_grads);

// m(theta; phi, t) over a window.
Vec linear_forward(const SimplexWeights& phi, const LagWindow& window,
                   const LossModelSpec& model, const Vec& theta);

// h(phi) = ||target - sum_i a_i g_i||^2 together with its phi-gradient
// grad_i = -2 <g_i, target - m>. The quadratic pieces (Gram matrix, cross
// vector, ||target||^2) let callers re-evaluate h at any other phi later.
struct MetaLoss {
  double h = 0.0;
  Vec grad;      // length b
  Mat gram;      // G_ij = <g_i, g_j>
  Vec cross;     // c_i  = <g_i, target>
  double target_sq = 0.0;

  double eval_at(const Vec& phi) const {
    return phi.dot(gram * phi) - 2.0 * cross.dot(phi) + target_sq;
  }
  Vec grad_at(const Vec& phi) const { return 2.0 * (gram * phi - cross); }
};

// Quadratic pieces alone (h/grad left empty); shared with the neural trainer.
MetaLoss lag_quadratic(const std::vector<Vec>& lag_grads, const Vec& target_grad);

MetaLoss meta_loss_and_grad(const SimplexWeights& phi, const std::vector<Vec>& lag_grads,
                            const Vec& target_grad);
MetaLoss meta_loss_and_grad(const SimplexWeights& phi, const LagWindow& window,
                            const Vec& target_grad, const LossModelSpec& model, const Vec& theta);

// One exponentiated-gradient step: phi' = phi o exp(-eta grad) / l1-norm, the
// Bregman-regularized argmin under the negative-entropy potential. Entries are
// floored at kSimplexFloor afterwards so no coordinate dies permanently.
inline constexpr double kSimplexFloor = 1e-12;

SimplexWeights eg_update(const SimplexWeights& phi, const Vec& grad_h, double eta_phi);

// m_bar(theta; t) = (1/w) (m + sum_{i=1}^{w-1} grad r_{t-i}(theta)).
Vec smoothed_generator(const Vec& m_value, const LagWindow& window, int w,
                       const LossModelSpec& model, const Vec& theta);
Vec smoothed_generator(const Vec& m_value, const std::vector<Vec>& lag_grads, int w);

// ||m - realized||^2 / ||realized||^2; throws on a zero realized gradient.
double forecast_error(const Vec& m_value, const Vec& realized_grad);

}  // namespace fgd

#endif  // FGD_GENERATORS_HPP

// Prediction models f_theta with per-batch loss and exact analytic gradients.
//
// Three kinds are supported:
//   linear_squared  f(x) = <theta, x>,        loss (f - y)^2
//   logistic        f(x) = sigmoid(<theta,x>), logloss, y in {0,1}
//   mlp             one tanh hidden layer, scalar output, squared loss
//
// Everything is a pure function of (spec, theta, batch) in double precision.

#ifndef FGD_MODELS_HPP
#define FGD_MODELS_HPP

#include <string>

#include "fgd/common.hpp"

namespace fgd {

// One round's labeled dataset.
struct DomainBatch {
  int t = 0;          // round index, >= 1
  Mat features;       // n x d
  Vec labels;         // n
  int n() const { return static_cast<int>(features.rows()); }
  int dim() const { return static_cast<int>(features.cols()); }
  void validate() const;
};

// Contiguous rows [begin, begin+count); count is clamped to the batch end.
DomainBatch slice(const DomainBatch& batch, int begin, int count);

enum class ModelKind { linear_squared, logistic, mlp };

std::string to_string(ModelKind kind);

struct LossModelSpec {
  ModelKind kind = ModelKind::linear_squared;
  int d = 1;       // input feature dimension
  int hidden = 8;  // mlp only

  static LossModelSpec linear_squared(int d) { return {ModelKind::linear_squared, d, 0}; }
  static LossModelSpec logistic(int d) { return {ModelKind::logistic, d, 0}; }
  static LossModelSpec mlp(int d, int hidden) { return {ModelKind::mlp, d, hidden}; }

  // mlp packs [W (hidden x d), b1 (hidden), v (hidden), b2 (1)], W column-major
  int param_dim() const;
  void validate() const;
};

double loss(const LossModelSpec& spec, const Vec& theta, const DomainBatch& batch);
Vec grad(const LossModelSpec& spec, const Vec& theta, const DomainBatch& batch);

// Central-difference estimate of grad(), one coordinate at a time.
Vec finite_diff_grad(const LossModelSpec& spec, const Vec& theta, const DomainBatch& batch,
                     double step);

// Model predictions (scores for logistic), one per batch row.
Vec predict(const LossModelSpec& spec, const Vec& theta, const DomainBatch& batch);

Vec random_params(const LossModelSpec& spec, Rng& rng, double scale);

}  // namespace fgd

#endif  // FGD_MODELS_HPP

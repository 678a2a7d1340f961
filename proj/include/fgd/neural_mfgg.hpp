// Neural meta future gradient generator.
//
// Maps the last b domain summaries to simplex coefficients a through
// single-head self-attention, a two-layer perceptron, and a softmax head:
//
//   e_j  = sum of example features of domain j        (identity embedder)
//   Q,K,V = Wq E, Wk E, Wv E                          (d2 x b)
//   P    = rowwise softmax(Q'K / sqrt(d2))
//   Z    = V P'
//   a    = softmax(W2 tanh(W1 vec(Z) + c1) + c2)
//
// The forecast itself is linear_combine(a, lag gradients); the coefficients do
// not depend on theta, so the theta-side gradient splits off exactly. All
// derivatives are hand-written reverse mode and checked against finite
// differences in the tests.
//
// Convention: summaries, coefficients, and lag gradients are all indexed by
// lag (position 0 = lag 1, the most recent round).

#ifndef FGD_NEURAL_MFGG_HPP
#define FGD_NEURAL_MFGG_HPP

#include <vector>

#include "fgd/generators.hpp"

namespace fgd {

struct NeuralMfggConfig {
  int b = 3;
  int d1 = 16;         // summary width (feature dim under the identity embedder)
  int d2 = 8;          // attention width
  int mlp_hidden = 16;
  double init_scale = 0.05;
  uint64_t seed = 1;
  void validate() const;
};

class NeuralMfgg {
 public:
  explicit NeuralMfgg(const NeuralMfggConfig& config);

  const NeuralMfggConfig& config() const { return config_; }

  // summaries.size() == b, zero vectors standing in for missing lags
  SimplexWeights forward(const std::vector<Vec>& summaries) const;

  // Mean squared forecast error over the buffer at the current weights.
  double meta_loss(const std::vector<Vec>& summaries,
                   const std::vector<MetaLoss>& buffer_quads) const;

  // Analytic gradient of meta_loss wrt the flat weight vector.
  Vec weight_grad(const std::vector<Vec>& summaries,
                  const std::vector<MetaLoss>& buffer_quads) const;

  // One full-batch gradient step; returns the loss before the step.
  double train_step(const std::vector<Vec>& summaries,
                    const std::vector<MetaLoss>& buffer_quads, double eta_phi);

  // flat layout: [Wq, Wk, Wv, W1, c1, W2, c2], matrices column-major
  int weight_dim() const;
  Vec weights() const;
  void set_weights(const Vec& w);

 private:
  struct ForwardCache;
  void run_forward(const std::vector<Vec>& summaries, ForwardCache& cache) const;
  Vec backward(const ForwardCache& cache, const Vec& grad_a) const;

  NeuralMfggConfig config_;
  Mat wq_, wk_, wv_;  // d2 x d1
  Mat w1_;            // hidden x (d2*b)
  Vec c1_;            // hidden
  Mat w2_;            // b x hidden
  Vec c2_;            // b
};

// e_j = sum of the batch's feature rows.
Vec domain_summary(const DomainBatch& batch);

// Summaries for every lag of the window, zero-padded where absent.
std::vector<Vec> window_summaries(const LagWindow& window, int d);

// Window-level wrapper: coefficients for the window's target round.
SimplexWeights neural_forward(const NeuralMfgg& net, const LagWindow& window);

// One training step against realized gradients: for each theta in the buffer
// the forecast built from the window is regressed onto grad r_target(theta),
// where `realized` is the target round's batch. Returns the pre-step loss.
double neural_train_step(NeuralMfgg& net, const std::vector<Vec>& buffer_thetas,
                         const LagWindow& window, const DomainBatch& realized,
                         const LossModelSpec& model, double eta_phi);

}  // namespace fgd

#endif  // FGD_NEURAL_MFGG_HPP

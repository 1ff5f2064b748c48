#pragma once

// Segmentation losses on soft per-pixel predictions. Every op returns its
// value together with the gradient with respect to its probability inputs;
// softmax_backward carries that gradient to the logits.

#include <cstdint>
#include <span>
#include <vector>

namespace srda {

/// Per-pixel class probabilities, laid out (K, H, W).
struct ProbMap {
  int k = 0;
  int h = 0;
  int w = 0;
  std::vector<double> values;

  ProbMap() = default;
  ProbMap(int k, int h, int w, double fill = 0.0)
      : k(k), h(h), w(w), values(static_cast<std::size_t>(k) * h * w, fill) {}

  std::size_t pixels() const { return static_cast<std::size_t>(h) * w; }
  double& at(int cls, std::size_t pixel) { return values[static_cast<std::size_t>(cls) * pixels() + pixel]; }
  double at(int cls, std::size_t pixel) const { return values[static_cast<std::size_t>(cls) * pixels() + pixel]; }
};

/// Hard per-pixel class indices, laid out (H, W).
struct LabelMask {
  int h = 0;
  int w = 0;
  std::vector<std::uint8_t> values;

  LabelMask() = default;
  LabelMask(int h, int w, std::uint8_t fill = 0)
      : h(h), w(w), values(static_cast<std::size_t>(h) * w, fill) {}

  std::size_t pixels() const { return values.size(); }
  std::uint8_t& at(int y, int x) { return values[static_cast<std::size_t>(y) * w + x]; }
  std::uint8_t at(int y, int x) const { return values[static_cast<std::size_t>(y) * w + x]; }
};

/// Region proportions on the K-simplex.
using ClassRatio = std::vector<double>;

inline constexpr double kLogEps = 1e-8;
inline constexpr double kSimplexTol = 1e-5;

struct LossTerms {
  double entropy = 0.0;
  double kl = 0.0;
  double ce = 0.0;
};

/// Loss value plus the gradient with respect to the probability input. For
/// kl_ratio the gradient is with respect to the predicted ratio instead.
struct LossValue {
  double value = 0.0;
  std::vector<double> grad;
  LossTerms terms;
};

struct PairLossValue {
  double value = 0.0;
  std::vector<double> source_grad;
  std::vector<double> target_grad;
  LossTerms terms;
};

void validate(const ProbMap& p);
void validate(const LabelMask& m, int k);
void validate(const ClassRatio& r);

ProbMap softmax(std::span<const float> logits, int k, int h, int w);
/// Gradient with respect to the logits given the gradient with respect to p.
std::vector<double> softmax_backward(const ProbMap& p, std::span<const double> grad_p);
ProbMap one_hot(const LabelMask& m, int k);

LossValue cross_entropy(const ProbMap& pred, const LabelMask& target);
LossValue entropy_loss(const ProbMap& pred);
ClassRatio predicted_ratio(const ProbMap& pred);
LossValue kl_ratio(const ClassRatio& prior, const ClassRatio& predicted);
LossValue adaptation_loss(const ProbMap& pred, const ClassRatio& prior, double lambda);
PairLossValue adasource_loss(const ProbMap& source_pred, const LabelMask& source_target,
                             const ProbMap& target_pred, const ClassRatio& prior, double lambda);

/// Batch means of the per-image losses. The gradient of image i is stored in
/// grads[i] and already carries the 1/B factor.
struct BatchLoss {
  double value = 0.0;
  LossTerms terms;
  std::vector<std::vector<double>> grads;
};

BatchLoss batch_cross_entropy(std::span<const ProbMap> preds, std::span<const LabelMask> targets);
BatchLoss batch_adaptation_loss(std::span<const ProbMap> preds, std::span<const ClassRatio> priors,
                                double lambda);
/// Mean over images of lambda * KL(prior || ratio(pred)), without the entropy term.
BatchLoss batch_kl_loss(std::span<const ProbMap> preds, std::span<const ClassRatio> priors,
                        double lambda);

}  // namespace srda

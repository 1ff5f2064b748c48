#include "srda/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "srda/errors.hpp"

namespace srda {
namespace {

double clamp_log(double p) { return std::log(std::max(p, kLogEps)); }

void check_same_shape(const ProbMap& p, const LabelMask& m) {
  if (p.h != m.h || p.w != m.w)
    throw ShapeError("prediction is " + std::to_string(p.h) + "x" + std::to_string(p.w) +
                     " but mask is " + std::to_string(m.h) + "x" + std::to_string(m.w));
}

}  // namespace

void validate(const ProbMap& p) {
  if (p.k < 2) throw ValueError("probability map needs at least two classes");
  if (p.h <= 0 || p.w <= 0) throw ShapeError("probability map is empty");
  if (p.values.size() != static_cast<std::size_t>(p.k) * p.pixels())
    throw ShapeError("probability map storage does not match its shape");
  for (std::size_t i = 0; i < p.pixels(); ++i) {
    double s = 0.0;
    for (int c = 0; c < p.k; ++c) {
      const double v = p.at(c, i);
      if (!(v >= -kSimplexTol && v <= 1.0 + kSimplexTol))
        throw ValueError("probability outside [0,1] at pixel " + std::to_string(i));
      s += v;
    }
    if (std::abs(s - 1.0) > kSimplexTol)
      throw ValueError("class probabilities at pixel " + std::to_string(i) + " sum to " +
                       std::to_string(s));
  }
}

void validate(const LabelMask& m, int k) {
  if (m.values.size() != static_cast<std::size_t>(m.h) * m.w)
    throw ShapeError("mask storage does not match its shape");
  for (std::uint8_t v : m.values)
    if (v >= k) throw ValueError("mask label " + std::to_string(v) + " is not below K=" + std::to_string(k));
}

void validate(const ClassRatio& r) {
  if (r.size() < 2) throw ValueError("class ratio needs at least two entries");
  double s = 0.0;
  for (double v : r) {
    if (!(v >= -kSimplexTol && v <= 1.0 + kSimplexTol)) throw ValueError("class ratio entry outside [0,1]");
    s += v;
  }
  if (std::abs(s - 1.0) > kSimplexTol) throw ValueError("class ratio does not sum to 1");
}

ProbMap softmax(std::span<const float> logits, int k, int h, int w) {
  ProbMap p(k, h, w);
  if (logits.size() != p.values.size()) throw ShapeError("softmax: logits size mismatch");
  const std::size_t n = p.pixels();
  for (std::size_t i = 0; i < n; ++i) {
    double mx = logits[i];
    for (int c = 1; c < k; ++c) mx = std::max(mx, static_cast<double>(logits[c * n + i]));
    double s = 0.0;
    for (int c = 0; c < k; ++c) {
      const double e = std::exp(static_cast<double>(logits[c * n + i]) - mx);
      p.at(c, i) = e;
      s += e;
    }
    for (int c = 0; c < k; ++c) p.at(c, i) /= s;
  }
  return p;
}

std::vector<double> softmax_backward(const ProbMap& p, std::span<const double> grad_p) {
  if (grad_p.size() != p.values.size()) throw ShapeError("softmax_backward: gradient size mismatch");
  std::vector<double> g(p.values.size());
  const std::size_t n = p.pixels();
  for (std::size_t i = 0; i < n; ++i) {
    double dot = 0.0;
    for (int c = 0; c < p.k; ++c) dot += p.at(c, i) * grad_p[c * n + i];
    for (int c = 0; c < p.k; ++c) g[c * n + i] = p.at(c, i) * (grad_p[c * n + i] - dot);
  }
  return g;
}

ProbMap one_hot(const LabelMask& m, int k) {
  validate(m, k);
  ProbMap p(k, m.h, m.w);
  for (std::size_t i = 0; i < m.pixels(); ++i) p.at(m.values[i], i) = 1.0;
  return p;
}

LossValue cross_entropy(const ProbMap& pred, const LabelMask& target) {
  validate(pred);
  check_same_shape(pred, target);
  validate(target, pred.k);
  LossValue out;
  out.grad.assign(pred.values.size(), 0.0);
  const std::size_t n = pred.pixels();
  const double inv = 1.0 / static_cast<double>(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = target.values[i];
    const double p = pred.at(y, i);
    sum -= clamp_log(p);
    if (p > kLogEps) out.grad[y * n + i] = -inv / p;
  }
  out.value = sum * inv;
  out.terms.ce = out.value;
  return out;
}

LossValue entropy_loss(const ProbMap& pred) {
  validate(pred);
  LossValue out;
  out.grad.assign(pred.values.size(), 0.0);
  const std::size_t n = pred.pixels();
  const double inv = 1.0 / static_cast<double>(n);
  double sum = 0.0;
  for (int c = 0; c < pred.k; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = pred.at(c, i);
      const double lp = clamp_log(p);
      sum -= p * lp;
      out.grad[c * n + i] = p > kLogEps ? -(lp + 1.0) * inv : -lp * inv;
    }
  }
  out.value = sum * inv;
  out.terms.entropy = out.value;
  return out;
}

ClassRatio predicted_ratio(const ProbMap& pred) {
  validate(pred);
  const std::size_t n = pred.pixels();
  ClassRatio r(static_cast<std::size_t>(pred.k), 0.0);
  for (int c = 0; c < pred.k; ++c) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += pred.at(c, i);
    r[static_cast<std::size_t>(c)] = s / static_cast<double>(n);
  }
  return r;
}

LossValue kl_ratio(const ClassRatio& prior, const ClassRatio& predicted) {
  if (prior.size() != predicted.size())
    throw ShapeError("kl_ratio: prior has " + std::to_string(prior.size()) + " classes, prediction " +
                     std::to_string(predicted.size()));
  validate(prior);
  validate(predicted);
  LossValue out;
  out.grad.assign(predicted.size(), 0.0);
  double sum = 0.0;
  for (std::size_t c = 0; c < prior.size(); ++c) {
    const double a = prior[c];
    if (a <= 0.0) continue;
    const double b = predicted[c];
    sum += a * (std::log(a) - clamp_log(b));
    if (b > kLogEps) out.grad[c] = -a / b;
  }
  out.value = sum;
  out.terms.kl = sum;
  return out;
}

LossValue adaptation_loss(const ProbMap& pred, const ClassRatio& prior, double lambda) {
  if (lambda < 0.0) throw ValueError("lambda must be non-negative");
  LossValue out = entropy_loss(pred);
  const LossValue kl = kl_ratio(prior, predicted_ratio(pred));
  out.terms.kl = kl.value;
  out.value = out.terms.entropy + lambda * kl.value;
  if (lambda > 0.0) {
    const std::size_t n = pred.pixels();
    const double inv = 1.0 / static_cast<double>(n);
    for (int c = 0; c < pred.k; ++c) {
      const double g = lambda * kl.grad[static_cast<std::size_t>(c)] * inv;
      for (std::size_t i = 0; i < n; ++i) out.grad[c * n + i] += g;
    }
  }
  return out;
}

PairLossValue adasource_loss(const ProbMap& source_pred, const LabelMask& source_target,
                             const ProbMap& target_pred, const ClassRatio& prior, double lambda) {
  if (lambda < 0.0) throw ValueError("lambda must be non-negative");
  const LossValue ce = cross_entropy(source_pred, source_target);
  const LossValue kl = kl_ratio(prior, predicted_ratio(target_pred));
  PairLossValue out;
  out.terms.ce = ce.value;
  out.terms.kl = kl.value;
  out.value = ce.value + lambda * kl.value;
  out.source_grad = ce.grad;
  out.target_grad.assign(target_pred.values.size(), 0.0);
  const std::size_t n = target_pred.pixels();
  for (int c = 0; c < target_pred.k; ++c) {
    const double g = lambda * kl.grad[static_cast<std::size_t>(c)] / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) out.target_grad[c * n + i] = g;
  }
  return out;
}

namespace {

BatchLoss finish(BatchLoss b, std::size_t count) {
  const double inv = 1.0 / static_cast<double>(count);
  b.value *= inv;
  b.terms.entropy *= inv;
  b.terms.kl *= inv;
  b.terms.ce *= inv;
  for (auto& g : b.grads)
    for (double& v : g) v *= inv;
  return b;
}

}  // namespace

BatchLoss batch_cross_entropy(std::span<const ProbMap> preds, std::span<const LabelMask> targets) {
  if (preds.empty() || preds.size() != targets.size()) throw ShapeError("batch_cross_entropy: batch size mismatch");
  BatchLoss b;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    LossValue l = cross_entropy(preds[i], targets[i]);
    b.value += l.value;
    b.terms.ce += l.terms.ce;
    b.grads.push_back(std::move(l.grad));
  }
  return finish(std::move(b), preds.size());
}

BatchLoss batch_adaptation_loss(std::span<const ProbMap> preds, std::span<const ClassRatio> priors,
                                double lambda) {
  if (preds.empty() || preds.size() != priors.size()) throw ShapeError("batch_adaptation_loss: batch size mismatch");
  BatchLoss b;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    LossValue l = adaptation_loss(preds[i], priors[i], lambda);
    b.value += l.value;
    b.terms.entropy += l.terms.entropy;
    b.terms.kl += l.terms.kl;
    b.grads.push_back(std::move(l.grad));
  }
  return finish(std::move(b), preds.size());
}

BatchLoss batch_kl_loss(std::span<const ProbMap> preds, std::span<const ClassRatio> priors,
                        double lambda) {
  if (lambda < 0.0) throw ValueError("lambda must be non-negative");
  if (preds.empty() || preds.size() != priors.size()) throw ShapeError("batch_kl_loss: batch size mismatch");
  BatchLoss b;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const ProbMap& p = preds[i];
    const LossValue kl = kl_ratio(priors[i], predicted_ratio(p));
    b.value += lambda * kl.value;
    b.terms.kl += kl.value;
    std::vector<double> g(p.values.size());
    const std::size_t n = p.pixels();
    for (int c = 0; c < p.k; ++c) {
      const double gc = lambda * kl.grad[static_cast<std::size_t>(c)] / static_cast<double>(n);
      for (std::size_t j = 0; j < n; ++j) g[c * n + j] = gc;
    }
    b.grads.push_back(std::move(g));
  }
  return finish(std::move(b), preds.size());
}

}  // namespace srda

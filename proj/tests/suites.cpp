#include "suites.hpp"

#include <cmath>
#include <functional>

#include "srda/losses.hpp"
#include "srda/metrics.hpp"
#include "srda/ratio_prior.hpp"
#include "srda/rng.hpp"

namespace srda::suites {
namespace {

ProbMap pixels(std::initializer_list<std::vector<double>> px) {
  const auto n = static_cast<int>(px.size());
  const auto k = static_cast<int>(px.begin()->size());
  ProbMap p(k, 1, n);
  int i = 0;
  for (const auto& v : px) {
    for (int c = 0; c < k; ++c) p.at(c, static_cast<std::size_t>(i)) = v[static_cast<std::size_t>(c)];
    ++i;
  }
  return p;
}

ProbMap constant(int k, int h, int w, std::vector<double> v) {
  ProbMap p(k, h, w);
  for (std::size_t i = 0; i < p.pixels(); ++i)
    for (int c = 0; c < k; ++c) p.at(c, i) = v[static_cast<std::size_t>(c)];
  return p;
}

LabelMask labels(int h, int w, std::initializer_list<int> v) {
  LabelMask m(h, w);
  std::size_t i = 0;
  for (int x : v) m.values[i++] = static_cast<std::uint8_t>(x);
  return m;
}

class FixedEstimator : public RatioEstimator {
 public:
  explicit FixedEstimator(std::vector<double> raw) : raw_(std::move(raw)) {}
  int classes() const override { return static_cast<int>(raw_.size()); }
  int input_height() const override { return 4; }
  int input_width() const override { return 4; }
  std::vector<double> predict_raw(const Tensor&) override { return raw_; }

 private:
  std::vector<double> raw_;
};

double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::max(std::sqrt(na), std::sqrt(nb));
  return scale < 1e-12 ? std::sqrt(diff) : std::sqrt(diff) / scale;
}

// Double-precision softmax so central differences stay accurate.
ProbMap softmax_of(const std::vector<double>& logits, int k, int h, int w) {
  ProbMap p(k, h, w);
  for (std::size_t i = 0; i < p.pixels(); ++i) {
    double mx = -1e300;
    for (int c = 0; c < k; ++c) mx = std::max(mx, logits[static_cast<std::size_t>(c) * p.pixels() + i]);
    double z = 0.0;
    for (int c = 0; c < k; ++c) z += std::exp(logits[static_cast<std::size_t>(c) * p.pixels() + i] - mx);
    for (int c = 0; c < k; ++c) p.at(c, i) = std::exp(logits[static_cast<std::size_t>(c) * p.pixels() + i] - mx) / z;
  }
  return p;
}

}  // namespace

std::vector<CaseResult> example_cases() {
  std::vector<CaseResult> out;
  auto add = [&](std::string name, double got, double expected, double tol = 1e-4) {
    out.push_back({std::move(name), got, expected, tol, std::abs(got - expected) <= tol});
  };
  const double ln2 = std::log(2.0);

  // cross_entropy
  add("cross_entropy perfect prediction", cross_entropy(pixels({{1, 0}, {0, 1}}), labels(1, 2, {0, 1})).value, 0.0);
  add("cross_entropy uniform target 0", cross_entropy(pixels({{0.5, 0.5}}), labels(1, 1, {0})).value, ln2);
  add("cross_entropy uniform target 1", cross_entropy(pixels({{0.5, 0.5}}), labels(1, 1, {1})).value, ln2);
  add("cross_entropy two pixels", cross_entropy(pixels({{0.9, 0.1}, {0.2, 0.8}}), labels(1, 2, {0, 1})).value,
      (-std::log(0.9) - std::log(0.8)) / 2.0);
  add("cross_entropy two pixels 0.1643", cross_entropy(pixels({{0.9, 0.1}, {0.2, 0.8}}), labels(1, 2, {0, 1})).value,
      0.1643);

  // entropy_loss
  add("entropy one-hot", entropy_loss(pixels({{1, 0}, {0, 1}, {1, 0}})).value, 0.0);
  add("entropy uniform K=2", entropy_loss(constant(2, 3, 3, {0.5, 0.5})).value, ln2);
  add("entropy uniform K=3", entropy_loss(constant(3, 2, 2, {1.0 / 3, 1.0 / 3, 1.0 / 3})).value, std::log(3.0));
  add("entropy (0.9,0.1)", entropy_loss(pixels({{0.9, 0.1}})).value, 0.3251);

  // predicted_ratio
  const ClassRatio half = predicted_ratio(constant(2, 4, 4, {0.5, 0.5}));
  add("predicted_ratio constant[0]", half[0], 0.5);
  add("predicted_ratio constant[1]", half[1], 0.5);
  const ClassRatio bg = predicted_ratio(constant(2, 4, 4, {1.0, 0.0}));
  add("predicted_ratio one-hot[0]", bg[0], 1.0);
  add("predicted_ratio one-hot[1]", bg[1], 0.0);
  const ClassRatio soft = predicted_ratio(pixels({{1, 0}, {1, 0}, {0, 1}, {0.5, 0.5}}));
  add("predicted_ratio soft[0]", soft[0], 0.625);
  add("predicted_ratio soft[1]", soft[1], 0.375);

  // kl_ratio
  add("kl identical", kl_ratio({0.3, 0.7}, {0.3, 0.7}).value, 0.0);
  add("kl (1,0)||(0.5,0.5)", kl_ratio({1.0, 0.0}, {0.5, 0.5}).value, ln2);
  add("kl (0.25,0.75)||(0.5,0.5)", kl_ratio({0.25, 0.75}, {0.5, 0.5}).value,
      0.25 * std::log(0.5) + 0.75 * std::log(1.5));
  add("kl (0.25,0.75)||(0.5,0.5) 0.1308", kl_ratio({0.25, 0.75}, {0.5, 0.5}).value, 0.1308);

  // adaptation_loss
  add("adaptation one-hot matching prior", adaptation_loss(constant(2, 2, 2, {1.0, 0.0}), {1.0, 0.0}, 0.5).value, 0.0);
  {
    const ProbMap p = pixels({{0.9, 0.1}, {0.3, 0.7}, {0.6, 0.4}});
    add("adaptation lambda=0 equals entropy", adaptation_loss(p, {0.2, 0.8}, 0.0).value, entropy_loss(p).value);
  }
  add("adaptation uniform prior (1,0)", adaptation_loss(constant(2, 3, 3, {0.5, 0.5}), {1.0, 0.0}, 0.01).value, 0.7001);

  // adasource_loss
  add("adasource perfect", adasource_loss(pixels({{1, 0}, {0, 1}}), labels(1, 2, {0, 1}), constant(2, 2, 2, {1.0, 0.0}),
                                          {1.0, 0.0}, 0.01).value, 0.0);
  {
    const ProbMap s = pixels({{0.9, 0.1}, {0.2, 0.8}});
    const LabelMask t = labels(1, 2, {0, 1});
    add("adasource lambda=0 equals cross_entropy",
        adasource_loss(s, t, pixels({{0.4, 0.6}}), {0.3, 0.7}, 0.0).value, cross_entropy(s, t).value);
  }
  add("adasource uniform", adasource_loss(constant(2, 2, 2, {0.5, 0.5}), labels(2, 2, {0, 1, 1, 0}),
                                          constant(2, 2, 2, {0.5, 0.5}), {1.0, 0.0}, 0.01).value, 0.7001);

  // gt_ratio
  {
    const ClassRatio r = gt_ratio(LabelMask(8, 8, 0), 2);
    add("gt_ratio background[0]", r[0], 1.0);
    add("gt_ratio background[1]", r[1], 0.0);
    LabelMask m(8, 8, 0);
    for (int i = 0; i < 16; ++i) m.values[static_cast<std::size_t>(i)] = 1;
    const ClassRatio q = gt_ratio(m, 2);
    add("gt_ratio 16 of 64[0]", q[0], 0.75);
    add("gt_ratio 16 of 64[1]", q[1], 0.25);
    LabelMask cb(8, 8, 0);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) cb.at(y, x) = static_cast<std::uint8_t>((x + y) % 2);
    const ClassRatio c = gt_ratio(cb, 2);
    add("gt_ratio checkerboard[0]", c[0], 0.5);
    add("gt_ratio checkerboard[1]", c[1], 0.5);
  }

  // estimate_prior
  {
    Tensor image(1, 1, 4, 4);
    FixedEstimator pass({0.7, 0.3});
    const ClassRatio tagged_off = estimate_prior(pass, image, false);
    add("estimate_prior no tag[0]", tagged_off[0], 1.0);
    add("estimate_prior no tag[1]", tagged_off[1], 0.0);
    const ClassRatio through = estimate_prior(pass, image, true);
    add("estimate_prior pass-through[0]", through[0], 0.7);
    add("estimate_prior pass-through[1]", through[1], 0.3);
    FixedEstimator over({0.8, 0.4});
    const ClassRatio norm = estimate_prior(over, image, true);
    add("estimate_prior normalised[0]", norm[0], 2.0 / 3.0);
    add("estimate_prior normalised[1]", norm[1], 1.0 / 3.0);
  }

  // argmax_mask
  {
    const LabelMask a = argmax_mask(pixels({{1, 0}, {0, 1}, {0.5, 0.5}, {0.4, 0.6}}));
    add("argmax one-hot 0", a.values[0], 0);
    add("argmax one-hot 1", a.values[1], 1);
    add("argmax tie goes to 0", a.values[2], 0);
    add("argmax (0.4,0.6)", a.values[3], 1);
  }

  // dice
  {
    LabelMask a(4, 4, 0);
    LabelMask b(4, 4, 0);
    for (int x = 0; x < 4; ++x) a.at(0, x) = 1;
    add("dice identical", dice(a, a, 1), 1.0);
    for (int x = 0; x < 4; ++x) b.at(3, x) = 1;
    add("dice disjoint", dice(a, b, 1), 0.0);
    LabelMask c(4, 4, 0);
    c.at(0, 0) = c.at(0, 1) = c.at(1, 0) = c.at(1, 1) = 1;
    add("dice overlap 2 of 4+4", dice(a, c, 1), 0.5);
    add("dice both empty", dice(LabelMask(4, 4, 0), LabelMask(4, 4, 0), 1), 1.0);
  }

  // hausdorff
  {
    LabelMask a(8, 8, 0);
    a.at(2, 3) = a.at(4, 4) = 1;
    add("hausdorff identical", hausdorff(a, a, 1), 0.0);
    LabelMask p(8, 8, 0);
    LabelMask q(8, 8, 0);
    p.at(0, 0) = 1;
    q.at(3, 4) = 1;
    add("hausdorff (0,0)-(3,4)", hausdorff(p, q, 1), 5.0);
    add("hausdorff both empty", hausdorff(LabelMask(8, 8, 0), LabelMask(8, 8, 0), 1), 0.0);
    add("hausdorff one empty", hausdorff(p, LabelMask(8, 8, 0), 1), std::hypot(8.0, 8.0));
  }

  // entropy_map
  {
    const std::vector<double> z = entropy_map(constant(2, 3, 3, {1.0, 0.0}));
    double mx = 0.0;
    for (double v : z) mx = std::max(mx, std::abs(v));
    add("entropy_map one-hot max", mx, 0.0);
    const std::vector<double> u = entropy_map(constant(2, 3, 3, {0.5, 0.5}));
    double mn = 1e9;
    for (double v : u) mn = std::min(mn, v);
    add("entropy_map uniform min", mn, ln2);
    const ProbMap p = pixels({{0.9, 0.1}, {0.3, 0.7}, {0.55, 0.45}});
    double mean = 0.0;
    for (double v : entropy_map(p)) mean += v / 3.0;
    add("entropy_map mean equals entropy_loss", mean, entropy_loss(p).value, 1e-6);
  }
  return out;
}

std::vector<GradientResult> gradient_suite(std::uint64_t seed, int instances) {
  constexpr int k = 2;
  constexpr int h = 3;
  constexpr int w = 3;
  constexpr double step = 1e-5;
  Rng rng(seed);

  using LossFn = std::function<LossValue(const ProbMap&)>;
  struct Op {
    std::string name;
    std::function<LossFn(Rng&)> make;
  };
  auto random_ratio = [](Rng& r) {
    const double a = r.uniform(0.05, 0.95);
    return ClassRatio{a, 1.0 - a};
  };
  const std::vector<Op> ops = {
      {"entropy_loss", [](Rng&) -> LossFn { return [](const ProbMap& p) { return entropy_loss(p); }; }},
      {"kl_ratio",
       [&](Rng& r) -> LossFn {
         const ClassRatio prior = random_ratio(r);
         return [prior](const ProbMap& p) {
           // chain the ratio gradient through the pixel mean
           LossValue kl = kl_ratio(prior, predicted_ratio(p));
           LossValue out;
           out.value = kl.value;
           out.grad.assign(p.values.size(), 0.0);
           for (int c = 0; c < p.k; ++c)
             for (std::size_t i = 0; i < p.pixels(); ++i)
               out.grad[static_cast<std::size_t>(c) * p.pixels() + i] =
                   kl.grad[static_cast<std::size_t>(c)] / static_cast<double>(p.pixels());
           return out;
         };
       }},
      {"adaptation_loss",
       [&](Rng& r) -> LossFn {
         const ClassRatio prior = random_ratio(r);
         const double lambda = r.uniform(0.0, 1.0);
         return [prior, lambda](const ProbMap& p) { return adaptation_loss(p, prior, lambda); };
       }},
  };

  std::vector<GradientResult> results;
  for (const Op& op : ops) {
    GradientResult res{op.name, 0, 0.0};
    for (int t = 0; t < instances; ++t) {
      std::vector<double> logits(static_cast<std::size_t>(k) * h * w);
      for (double& v : logits) v = rng.normal(0.0, 1.5);
      const LossFn f = op.make(rng);
      const ProbMap p = softmax_of(logits, k, h, w);
      const LossValue lv = f(p);
      const std::vector<double> analytic = softmax_backward(p, lv.grad);
      std::vector<double> numeric(logits.size());
      for (std::size_t i = 0; i < logits.size(); ++i) {
        std::vector<double> lp = logits;
        std::vector<double> lm = logits;
        lp[i] += step;
        lm[i] -= step;
        numeric[i] = (f(softmax_of(lp, k, h, w)).value - f(softmax_of(lm, k, h, w)).value) / (2.0 * step);
      }
      res.max_relative_error = std::max(res.max_relative_error, relative_error(analytic, numeric));
      ++res.instances;
    }
    results.push_back(res);
  }
  return results;
}

HausdorffResult hausdorff_suite(std::uint64_t seed, int pairs, int size) {
  Rng rng(seed);
  HausdorffResult r;
  for (int t = 0; t < pairs; ++t) {
    // Vary density so sparse, dense and empty sets all appear.
    const double da = t % 10 == 0 ? 0.0 : rng.uniform(0.0, 0.5);
    const double db = t % 7 == 0 ? 0.01 : rng.uniform(0.0, 0.5);
    LabelMask a(size, size, 0);
    LabelMask b(size, size, 0);
    for (auto& v : a.values) v = rng.uniform() < da ? 1 : 0;
    for (auto& v : b.values) v = rng.uniform() < db ? 1 : 0;
    ++r.pairs;
    if (hausdorff(a, b, 1) != hausdorff_brute_force(a, b, 1)) ++r.mismatches;
  }
  return r;
}

}  // namespace srda::suites

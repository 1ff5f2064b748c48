#include "srda/ratio_prior.hpp"

#include <algorithm>
#include <cmath>

#include "srda/errors.hpp"

namespace srda {

ClassRatio gt_ratio(const LabelMask& mask, int k) {
  if (mask.pixels() == 0) throw ValueError("gt_ratio: empty mask");
  validate(mask, k);
  std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
  for (std::uint8_t v : mask.values) ++counts[v];
  ClassRatio r(static_cast<std::size_t>(k));
  const auto n = static_cast<double>(mask.pixels());
  for (int c = 0; c < k; ++c) r[static_cast<std::size_t>(c)] = static_cast<double>(counts[static_cast<std::size_t>(c)]) / n;
  return r;
}

ClassRatio project_to_simplex(std::span<const double> raw) {
  if (raw.size() < 2) throw ValueError("ratio vector needs at least two entries");
  ClassRatio r(raw.begin(), raw.end());
  double s = 0.0;
  for (double& v : r) {
    v = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
    s += v;
  }
  if (s <= 0.0) {
    std::fill(r.begin(), r.end(), 0.0);
    r[0] = 1.0;
    return r;
  }
  for (double& v : r) v /= s;
  return r;
}

std::vector<std::vector<double>> RatioRegressor::predict_raw_batch(const Tensor& images) {
  if (images.h != input_h_ || images.w != input_w_ || images.c != 1)
    throw ShapeError("regressor expects (n,1," + std::to_string(input_h_) + "," + std::to_string(input_w_) +
                     ") input, got " + images.shape_string());
  const Tensor out = net_.forward(images);
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < out.n; ++i) rows.emplace_back(out.image(i), out.image(i) + out.c);
  return rows;
}

std::vector<double> RatioRegressor::predict_raw(const Tensor& image) {
  if (image.n != 1) throw ShapeError("predict_raw expects one image, got " + image.shape_string());
  return predict_raw_batch(image).front();
}

namespace {

void augment(float* img, int h, int w, Rng& rng) {
  const double g = std::exp(rng.uniform(std::log(0.6), std::log(1.6)));
  const double contrast = rng.uniform(0.6, 1.2);
  const std::vector<double> field = smooth_field(rng, h, w, rng.uniform(0.0, 0.35));
  const double sigma = rng.uniform(0.0, 0.05);
  const std::size_t n = static_cast<std::size_t>(h) * w;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = std::clamp(static_cast<double>(img[i]), 0.0, 1.0);
    const double y = std::pow(x, g) * (1.0 + field[i]) * contrast + rng.normal(0.0, sigma);
    img[i] = static_cast<float>(std::clamp(y, 0.0, 1.0));
  }
}

}  // namespace

double ratio_mse(RatioRegressor& regressor, std::span<const Tensor> images, std::span<const LabelMask> masks) {
  if (images.empty()) return 0.0;
  const int k = regressor.classes();
  double total = 0.0;
  const std::size_t chunk = 32;
  for (std::size_t start = 0; start < images.size(); start += chunk) {
    const std::size_t end = std::min(images.size(), start + chunk);
    const Tensor batch = stack(images.subspan(start, end - start));
    const auto raw = regressor.predict_raw_batch(batch);
    for (std::size_t i = start; i < end; ++i) {
      const ClassRatio p = project_to_simplex(raw[i - start]);
      const ClassRatio t = gt_ratio(masks[i], k);
      for (int c = 0; c < k; ++c) {
        const double d = p[static_cast<std::size_t>(c)] - t[static_cast<std::size_t>(c)];
        total += d * d;
      }
    }
  }
  return total / static_cast<double>(images.size());
}

RatioRegressor train_regressor(std::span<const Tensor> images, std::span<const LabelMask> masks,
                               const RegressorConfig& config, RegressorReport* report) {
  if (images.empty()) throw ValueError("train_regressor: empty dataset");
  if (images.size() != masks.size()) throw ShapeError("train_regressor: image and mask counts differ");
  if (config.epochs < 0 || config.batch_size < 1) throw ConfigError("train_regressor: invalid epochs or batch size");
  const int h = images.front().h;
  const int w = images.front().w;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].n != 1 || images[i].c != 1 || images[i].h != h || images[i].w != w)
      throw ShapeError("train_regressor: image " + std::to_string(i) + " has shape " + images[i].shape_string());
    if (masks[i].h != h || masks[i].w != w) throw ShapeError("train_regressor: mask " + std::to_string(i) + " shape mismatch");
  }
  const int k = config.classes;
  RatioRegressor reg(RatioNet(RatioNetConfig{k, config.width, config.seed}), h, w);

  const auto n = static_cast<int>(images.size());
  const int held = n >= 2 ? std::max(1, n / 10) : 0;
  const int n_train = n - held;
  const auto held_images = held > 0 ? images.subspan(static_cast<std::size_t>(n_train)) : images;
  const auto held_masks = held > 0 ? masks.subspan(static_cast<std::size_t>(n_train)) : masks;

  std::vector<ClassRatio> targets;
  for (int i = 0; i < n_train; ++i) targets.push_back(gt_ratio(masks[static_cast<std::size_t>(i)], k));

  RegressorReport rep;
  rep.train_images = n_train;
  rep.heldout_images = held;
  rep.initial_heldout_mse = ratio_mse(reg, held_images, held_masks);

  Rng root(config.seed);
  Rng order_rng = root.fork(1);
  Rng aug_rng = root.fork(2);
  auto params = reg.net().parameters();
  Sgd opt(params, config.lr, config.momentum);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<int> perm = order_rng.permutation(n_train);
    double epoch_loss = 0.0;
    int batches = 0;
    for (int start = 0; start < n_train; start += config.batch_size) {
      const int end = std::min(n_train, start + config.batch_size);
      const int b = end - start;
      Tensor batch(b, 1, h, w);
      for (int j = 0; j < b; ++j) {
        const Tensor& src = images[static_cast<std::size_t>(perm[static_cast<std::size_t>(start + j)])];
        std::copy(src.data.begin(), src.data.end(), batch.image(j));
        if (config.augment) augment(batch.image(j), h, w, aug_rng);
      }
      zero_grad(params);
      const Tensor out = reg.net().forward(batch);
      Tensor grad(b, k, 1, 1);
      double loss = 0.0;
      for (int j = 0; j < b; ++j) {
        const ClassRatio& t = targets[static_cast<std::size_t>(perm[static_cast<std::size_t>(start + j)])];
        for (int c = 0; c < k; ++c) {
          const double d = out.image(j)[c] - t[static_cast<std::size_t>(c)];
          loss += d * d;
          grad.image(j)[c] = static_cast<float>(2.0 * d / b);
        }
      }
      reg.net().backward(grad);
      opt.step();
      epoch_loss += loss / b;
      ++batches;
    }
    rep.epoch_loss.push_back(batches > 0 ? epoch_loss / batches : 0.0);
  }
  rep.final_heldout_mse = ratio_mse(reg, held_images, held_masks);
  if (report) *report = rep;
  return reg;
}

RatioRegressor train_regressor(std::span<const SliceSample> samples, const RegressorConfig& config,
                               RegressorReport* report) {
  std::vector<Tensor> images;
  std::vector<LabelMask> masks;
  for (const SliceSample& s : samples) {
    if (s.mask.pixels() == 0) throw ValueError("train_regressor: sample without a mask");
    images.push_back(s.image);
    masks.push_back(s.mask);
  }
  return train_regressor(images, masks, config, report);
}

ClassRatio estimate_prior(RatioEstimator& estimator, const Tensor& image, bool has_foreground) {
  if (image.n != 1 || image.c != 1 || image.h != estimator.input_height() || image.w != estimator.input_width())
    throw ShapeError("estimate_prior: image " + image.shape_string() + " does not match the regressor input");
  if (!has_foreground) {
    ClassRatio r(static_cast<std::size_t>(estimator.classes()), 0.0);
    r[0] = 1.0;
    return r;
  }
  return project_to_simplex(estimator.predict_raw(image));
}

std::vector<ClassRatio> estimate_priors(RatioRegressor& regressor, std::span<const SliceSample> samples) {
  std::vector<ClassRatio> priors(samples.size());
  std::vector<int> pending;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Tensor& img = samples[i].image;
    if (img.h != regressor.input_height() || img.w != regressor.input_width())
      throw ShapeError("estimate_priors: image " + img.shape_string() + " does not match the regressor input");
    if (samples[i].has_foreground) {
      pending.push_back(static_cast<int>(i));
    } else {
      priors[i].assign(static_cast<std::size_t>(regressor.classes()), 0.0);
      priors[i][0] = 1.0;
    }
  }
  const std::size_t chunk = 32;
  for (std::size_t start = 0; start < pending.size(); start += chunk) {
    const std::size_t end = std::min(pending.size(), start + chunk);
    const std::span<const int> ids(pending.data() + start, end - start);
    const auto raw = regressor.predict_raw_batch(stack_images(samples, ids));
    for (std::size_t j = 0; j < ids.size(); ++j)
      priors[static_cast<std::size_t>(ids[j])] = project_to_simplex(raw[j]);
  }
  return priors;
}

}  // namespace srda

#pragma once

// Class-ratio priors for target images: a regressor trained on source images
// against their true ratios, simplex projection of its output, and the
// image-tag override for images known to lack foreground.

#include <cstdint>
#include <span>
#include <vector>

#include "srda/data.hpp"
#include "srda/losses.hpp"
#include "srda/models.hpp"

namespace srda {

/// Exact per-class pixel fractions.
ClassRatio gt_ratio(const LabelMask& mask, int k);

/// Clamp to [0,1], then divide by the sum. An all-zero vector maps to (1,0,...).
ClassRatio project_to_simplex(std::span<const double> raw);

/// Anything that maps one image to a raw K-vector.
class RatioEstimator {
 public:
  virtual ~RatioEstimator() = default;
  virtual int classes() const = 0;
  virtual int input_height() const = 0;
  virtual int input_width() const = 0;
  virtual std::vector<double> predict_raw(const Tensor& image) = 0;
};

class RatioRegressor : public RatioEstimator {
 public:
  RatioRegressor(RatioNet net, int input_h, int input_w)
      : net_(std::move(net)), input_h_(input_h), input_w_(input_w) {}

  int classes() const override { return net_.config().classes; }
  int input_height() const override { return input_h_; }
  int input_width() const override { return input_w_; }
  std::vector<double> predict_raw(const Tensor& image) override;
  /// Raw outputs for a batch, one row per image.
  std::vector<std::vector<double>> predict_raw_batch(const Tensor& images);

  RatioNet& net() { return net_; }

 private:
  RatioNet net_;
  int input_h_;
  int input_w_;
};

struct RegressorConfig {
  int classes = 2;
  int width = 16;
  int epochs = 40;
  int batch_size = 12;
  double lr = 5e-6;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  /// Random gamma, contrast, bias field and noise on every training image.
  bool augment = true;
};

struct RegressorReport {
  double initial_heldout_mse = 0.0;
  double final_heldout_mse = 0.0;
  std::vector<double> epoch_loss;
  int train_images = 0;
  int heldout_images = 0;
};

/// Squared-L2 regression onto gt_ratio. The last 10% of images (by index,
/// at least one) are held out and scored before and after training.
RatioRegressor train_regressor(std::span<const Tensor> images, std::span<const LabelMask> masks,
                               const RegressorConfig& config, RegressorReport* report = nullptr);
RatioRegressor train_regressor(std::span<const SliceSample> samples, const RegressorConfig& config,
                               RegressorReport* report = nullptr);

/// Mean over images of the summed squared error between projected
/// prediction and true ratio.
double ratio_mse(RatioRegressor& regressor, std::span<const Tensor> images, std::span<const LabelMask> masks);

/// (1,0,...,0) when the tag says no foreground; the estimator is not called.
ClassRatio estimate_prior(RatioEstimator& estimator, const Tensor& image, bool has_foreground);

/// Priors for every sample, batching the regressor calls.
std::vector<ClassRatio> estimate_priors(RatioRegressor& regressor, std::span<const SliceSample> samples);

}  // namespace srda

#pragma once

// Layers with explicit forward/backward passes and the two optimizers used
// for training. Layers cache what their backward pass needs, so a layer
// instance serves one forward/backward pair at a time.

#include <cstdint>
#include <string>
#include <vector>

#include "srda/kernels.hpp"
#include "srda/rng.hpp"
#include "srda/tensor.hpp"

namespace srda {

enum class Mode { train, eval };

struct Param {
  std::string name;
  std::vector<float> value;
  std::vector<float> grad;

  Param() = default;
  Param(std::string n, std::size_t size) : name(std::move(n)), value(size, 0.0f), grad(size, 0.0f) {}
};

/// Non-trainable persistent state (batch-norm running statistics).
struct Buffer {
  std::string name;
  std::vector<float>* values;
};

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(const std::string& name, ConvShape shape);

  /// He-normal weights, zero bias.
  void init(Rng& rng);
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy, bool input_grad = true);

  ConvShape shape;
  Param weight;
  Param bias;

 private:
  Tensor input_;
};

class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  BatchNorm2d(const std::string& name, int channels);

  /// Train mode normalises with batch statistics and updates the running
  /// estimates; eval mode uses the running estimates only.
  Tensor forward(const Tensor& x, Mode mode);
  Tensor backward(const Tensor& dy);

  Param gamma;
  Param beta;
  std::vector<float> running_mean;
  std::vector<float> running_var;
  float momentum = 0.1f;
  float eps = 1e-5f;

 private:
  Mode cached_mode_ = Mode::eval;
  Tensor xhat_;
  BatchNormStats stats_;
};

/// conv3x3 -> batch norm -> relu
class ConvBlock {
 public:
  ConvBlock() = default;
  ConvBlock(const std::string& name, int in_channels, int out_channels);

  void init(Rng& rng) { conv.init(rng); }
  Tensor forward(const Tensor& x, Mode mode);
  Tensor backward(const Tensor& dy, bool input_grad = true);
  void collect(std::vector<Param*>& params, std::vector<Buffer>& buffers);

  Conv2d conv;
  BatchNorm2d bn;

 private:
  Tensor output_;
};

class MaxPool2 {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);

 private:
  int in_h_ = 0;
  int in_w_ = 0;
  std::vector<std::uint32_t> argmax_;
};

void zero_grad(const std::vector<Param*>& params);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(std::vector<Param*> params, AdamConfig config);
  void step();

  std::int64_t steps() const { return t_; }
  /// Flat optimizer state for checkpoints: step count, then m and v per parameter.
  std::vector<std::vector<float>> state() const;
  void load_state(const std::vector<std::vector<float>>& state);

 private:
  std::vector<Param*> params_;
  AdamConfig config_;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
  std::int64_t t_ = 0;
};

class Sgd {
 public:
  Sgd(std::vector<Param*> params, double lr, double momentum);
  void step();

 private:
  std::vector<Param*> params_;
  double lr_;
  double momentum_;
  std::vector<std::vector<float>> velocity_;
};

}  // namespace srda

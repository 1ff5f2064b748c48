#include "srda/nn.hpp"

#include <cmath>

#include "srda/errors.hpp"

namespace srda {

Conv2d::Conv2d(const std::string& name, ConvShape s)
    : shape(s),
      weight(name + ".weight", s.weight_size()),
      bias(name + ".bias", static_cast<std::size_t>(s.out_channels)) {}

void Conv2d::init(Rng& rng) {
  const double fan_in = static_cast<double>(shape.in_channels) * shape.kernel * shape.kernel;
  const double bound = 1.0 / std::sqrt(fan_in);
  for (float& v : weight.value) v = static_cast<float>(rng.uniform(-bound, bound));
  for (float& v : bias.value) v = static_cast<float>(rng.uniform(-bound, bound));
}

Tensor Conv2d::forward(const Tensor& x) {
  input_ = x;
  Tensor out;
  kernels::conv2d_forward(x, weight.value, bias.value, shape, out);
  return out;
}

Tensor Conv2d::backward(const Tensor& dy, bool input_grad) {
  Tensor dx;
  kernels::conv2d_backward(input_, weight.value, dy, shape, input_grad ? &dx : nullptr,
                           weight.grad, bias.grad);
  return dx;
}

BatchNorm2d::BatchNorm2d(const std::string& name, int channels)
    : gamma(name + ".gamma", static_cast<std::size_t>(channels)),
      beta(name + ".beta", static_cast<std::size_t>(channels)),
      running_mean(static_cast<std::size_t>(channels), 0.0f),
      running_var(static_cast<std::size_t>(channels), 1.0f) {
  std::fill(gamma.value.begin(), gamma.value.end(), 1.0f);
}

Tensor BatchNorm2d::forward(const Tensor& x, Mode mode) {
  Tensor out;
  cached_mode_ = mode;
  if (mode == Mode::eval) {
    kernels::batchnorm_forward_eval(x, gamma.value, beta.value, running_mean, running_var, eps, out);
    return out;
  }
  kernels::batchnorm_forward_train(x, gamma.value, beta.value, eps, out, xhat_, stats_);
  const double count = static_cast<double>(x.n) * x.plane();
  const double unbias = count > 1 ? count / (count - 1) : 1.0;
  for (std::size_t c = 0; c < running_mean.size(); ++c) {
    running_mean[c] = (1.0f - momentum) * running_mean[c] + momentum * stats_.mean[c];
    running_var[c] = (1.0f - momentum) * running_var[c] +
                     momentum * static_cast<float>(stats_.var[c] * unbias);
  }
  return out;
}

Tensor BatchNorm2d::backward(const Tensor& dy) {
  if (cached_mode_ != Mode::train)
    throw ValueError("batch norm backward requires a train-mode forward pass");
  Tensor dx;
  kernels::batchnorm_backward(dy, xhat_, gamma.value, stats_, dx, gamma.grad, beta.grad);
  return dx;
}

ConvBlock::ConvBlock(const std::string& name, int in_channels, int out_channels)
    : conv(name + ".conv", ConvShape{in_channels, out_channels, 3}), bn(name + ".bn", out_channels) {}

Tensor ConvBlock::forward(const Tensor& x, Mode mode) {
  output_ = bn.forward(conv.forward(x), mode);
  kernels::relu_inplace(output_);
  return output_;
}

Tensor ConvBlock::backward(const Tensor& dy, bool input_grad) {
  Tensor g = dy;
  kernels::relu_backward_inplace(output_, g);
  return conv.backward(bn.backward(g), input_grad);
}

void ConvBlock::collect(std::vector<Param*>& params, std::vector<Buffer>& buffers) {
  params.push_back(&conv.weight);
  params.push_back(&conv.bias);
  params.push_back(&bn.gamma);
  params.push_back(&bn.beta);
  const std::string base = bn.gamma.name.substr(0, bn.gamma.name.size() - 6);
  buffers.push_back({base + ".running_mean", &bn.running_mean});
  buffers.push_back({base + ".running_var", &bn.running_var});
}

Tensor MaxPool2::forward(const Tensor& x) {
  in_h_ = x.h;
  in_w_ = x.w;
  Tensor out;
  kernels::maxpool2_forward(x, out, argmax_);
  return out;
}

Tensor MaxPool2::backward(const Tensor& dy) {
  Tensor dx;
  kernels::maxpool2_backward(dy, argmax_, in_h_, in_w_, dx);
  return dx;
}

void zero_grad(const std::vector<Param*>& params) {
  for (Param* p : params) std::fill(p->grad.begin(), p->grad.end(), 0.0f);
}

Adam::Adam(std::vector<Param*> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  for (Param* p : params_) {
    m_.emplace_back(p->value.size(), 0.0f);
    v_.emplace_back(p->value.size(), 0.0f);
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  const auto b1 = static_cast<float>(config_.beta1);
  const auto b2 = static_cast<float>(config_.beta2);
  const auto step_size = static_cast<float>(config_.lr / bc1);
  const auto inv_bc2 = static_cast<float>(1.0 / std::sqrt(bc2));
  const auto eps = static_cast<float>(config_.eps);
  for (std::size_t j = 0; j < params_.size(); ++j) {
    std::vector<float>& w = params_[j]->value;
    const std::vector<float>& g = params_[j]->grad;
    std::vector<float>& m = m_[j];
    std::vector<float>& v = v_[j];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (1.0f - b1) * g[i];
      v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
      w[i] -= step_size * m[i] / (std::sqrt(v[i]) * inv_bc2 + eps);
    }
  }
}

std::vector<std::vector<float>> Adam::state() const {
  std::vector<std::vector<float>> s;
  s.push_back({static_cast<float>(t_)});
  for (std::size_t j = 0; j < m_.size(); ++j) {
    s.push_back(m_[j]);
    s.push_back(v_[j]);
  }
  return s;
}

void Adam::load_state(const std::vector<std::vector<float>>& s) {
  if (s.size() != 1 + 2 * m_.size() || s[0].size() != 1)
    throw ValueError("optimizer state does not match the parameter set");
  for (std::size_t j = 0; j < m_.size(); ++j) {
    if (s[1 + 2 * j].size() != m_[j].size() || s[2 + 2 * j].size() != v_[j].size())
      throw ValueError("optimizer state does not match the parameter set");
    m_[j] = s[1 + 2 * j];
    v_[j] = s[2 + 2 * j];
  }
  t_ = static_cast<std::int64_t>(s[0][0]);
}

Sgd::Sgd(std::vector<Param*> params, double lr, double momentum)
    : params_(std::move(params)), lr_(lr), momentum_(momentum) {
  for (Param* p : params_) velocity_.emplace_back(p->value.size(), 0.0f);
}

void Sgd::step() {
  const auto mu = static_cast<float>(momentum_);
  const auto lr = static_cast<float>(lr_);
  for (std::size_t j = 0; j < params_.size(); ++j) {
    std::vector<float>& w = params_[j]->value;
    const std::vector<float>& g = params_[j]->grad;
    std::vector<float>& vel = velocity_[j];
    for (std::size_t i = 0; i < w.size(); ++i) {
      vel[i] = mu * vel[i] + g[i];
      w[i] -= lr * vel[i];
    }
  }
}

}  // namespace srda

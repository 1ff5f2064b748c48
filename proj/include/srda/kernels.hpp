#pragma once

// Data-parallel building blocks for the segmentation and ratio networks.
//
// Every kernel in srda::kernels is OpenMP-parallel over batch images or
// channels. Reductions across images are written to per-image buffers and
// summed in image order, so results do not depend on the thread count.
// srda::reference holds direct serial loops with double accumulation; they
// are slow and exist to check the parallel kernels.

#include <cstdint>
#include <span>
#include <vector>

#include "srda/tensor.hpp"

namespace srda {

/// Stride-1 convolution with an odd square kernel and zero "same" padding.
struct ConvShape {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 3;

  std::size_t weight_size() const {
    return static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel;
  }
};

struct BatchNormStats {
  std::vector<float> mean;
  std::vector<float> var;      // biased batch variance
  std::vector<float> inv_std;  // 1 / sqrt(var + eps)
};

namespace kernels {

/// out is resized to (n, out_channels, h, w). Weight layout: [out][in][ky][kx].
void conv2d_forward(const Tensor& in, std::span<const float> weight, std::span<const float> bias,
                    const ConvShape& shape, Tensor& out);

/// Accumulates into dweight / dbias. din may be null (first layer).
void conv2d_backward(const Tensor& in, std::span<const float> weight, const Tensor& dout,
                     const ConvShape& shape, Tensor* din, std::span<float> dweight,
                     std::span<float> dbias);

/// 2x2 max pooling, stride 2. Odd trailing rows/columns are dropped.
void maxpool2_forward(const Tensor& in, Tensor& out, std::vector<std::uint32_t>& argmax);
void maxpool2_backward(const Tensor& dout, const std::vector<std::uint32_t>& argmax, int in_h,
                       int in_w, Tensor& din);

/// Nearest-neighbour 2x upsampling.
void upsample2_forward(const Tensor& in, Tensor& out);
void upsample2_backward(const Tensor& dout, Tensor& din);

void batchnorm_forward_train(const Tensor& in, std::span<const float> gamma,
                             std::span<const float> beta, float eps, Tensor& out, Tensor& xhat,
                             BatchNormStats& stats);
void batchnorm_forward_eval(const Tensor& in, std::span<const float> gamma,
                            std::span<const float> beta, std::span<const float> running_mean,
                            std::span<const float> running_var, float eps, Tensor& out);
void batchnorm_backward(const Tensor& dout, const Tensor& xhat, std::span<const float> gamma,
                        const BatchNormStats& stats, Tensor& din, std::span<float> dgamma,
                        std::span<float> dbeta);

void relu_inplace(Tensor& x);
/// Zeroes gradient entries where the forward output was not positive.
void relu_backward_inplace(const Tensor& y, Tensor& dy);

void concat_channels(const Tensor& a, const Tensor& b, Tensor& out);
void split_channels(const Tensor& d, int a_channels, Tensor& da, Tensor& db);

/// Per-image, per-channel spatial mean: (n, c, h, w) -> (n, c, 1, 1).
void global_avg_pool(const Tensor& in, Tensor& out);
void global_avg_pool_backward(const Tensor& dout, int h, int w, Tensor& din);

}  // namespace kernels

namespace reference {

void conv2d_forward(const Tensor& in, std::span<const float> weight, std::span<const float> bias,
                    const ConvShape& shape, Tensor& out);
void conv2d_backward(const Tensor& in, std::span<const float> weight, const Tensor& dout,
                     const ConvShape& shape, Tensor* din, std::span<float> dweight,
                     std::span<float> dbias);
void batchnorm_forward_train(const Tensor& in, std::span<const float> gamma,
                             std::span<const float> beta, float eps, Tensor& out, Tensor& xhat,
                             BatchNormStats& stats);
void batchnorm_backward(const Tensor& dout, const Tensor& xhat, std::span<const float> gamma,
                        const BatchNormStats& stats, Tensor& din, std::span<float> dgamma,
                        std::span<float> dbeta);

}  // namespace reference
}  // namespace srda

#include <cmath>

#include "srda/errors.hpp"
#include "srda/kernels.hpp"

namespace srda::reference {
namespace {

std::size_t widx(const ConvShape& s, int o, int c, int ky, int kx) {
  return ((static_cast<std::size_t>(o) * s.in_channels + c) * s.kernel + ky) * s.kernel + kx;
}

}  // namespace

void conv2d_forward(const Tensor& in, std::span<const float> weight, std::span<const float> bias,
                    const ConvShape& s, Tensor& out) {
  if (in.c != s.in_channels || weight.size() != s.weight_size())
    throw ShapeError("reference conv2d: shape mismatch");
  out = Tensor(in.n, s.out_channels, in.h, in.w);
  const int pad = s.kernel / 2;
  for (int i = 0; i < in.n; ++i)
    for (int o = 0; o < s.out_channels; ++o)
      for (int y = 0; y < in.h; ++y)
        for (int x = 0; x < in.w; ++x) {
          double acc = bias[static_cast<std::size_t>(o)];
          for (int c = 0; c < s.in_channels; ++c)
            for (int ky = 0; ky < s.kernel; ++ky) {
              const int sy = y + ky - pad;
              if (sy < 0 || sy >= in.h) continue;
              for (int kx = 0; kx < s.kernel; ++kx) {
                const int sx = x + kx - pad;
                if (sx < 0 || sx >= in.w) continue;
                acc += static_cast<double>(weight[widx(s, o, c, ky, kx)]) * in.at(i, c, sy, sx);
              }
            }
          out.at(i, o, y, x) = static_cast<float>(acc);
        }
}

void conv2d_backward(const Tensor& in, std::span<const float> weight, const Tensor& dout,
                     const ConvShape& s, Tensor* din, std::span<float> dweight,
                     std::span<float> dbias) {
  if (in.c != s.in_channels || weight.size() != s.weight_size() || dout.c != s.out_channels)
    throw ShapeError("reference conv2d_backward: shape mismatch");
  const int pad = s.kernel / 2;
  std::vector<double> dw(s.weight_size(), 0.0);
  std::vector<double> dx(in.size(), 0.0);
  for (int o = 0; o < s.out_channels; ++o) {
    double db = 0.0;
    for (int i = 0; i < in.n; ++i)
      for (int y = 0; y < in.h; ++y)
        for (int x = 0; x < in.w; ++x) db += dout.at(i, o, y, x);
    dbias[static_cast<std::size_t>(o)] += static_cast<float>(db);
  }
  for (int i = 0; i < in.n; ++i)
    for (int o = 0; o < s.out_channels; ++o)
      for (int y = 0; y < in.h; ++y)
        for (int x = 0; x < in.w; ++x) {
          const double g = dout.at(i, o, y, x);
          for (int c = 0; c < s.in_channels; ++c)
            for (int ky = 0; ky < s.kernel; ++ky) {
              const int sy = y + ky - pad;
              if (sy < 0 || sy >= in.h) continue;
              for (int kx = 0; kx < s.kernel; ++kx) {
                const int sx = x + kx - pad;
                if (sx < 0 || sx >= in.w) continue;
                dw[widx(s, o, c, ky, kx)] += g * in.at(i, c, sy, sx);
                const std::size_t xi =
                    ((static_cast<std::size_t>(i) * in.c + c) * in.h + sy) * in.w + sx;
                dx[xi] += g * weight[widx(s, o, c, ky, kx)];
              }
            }
        }
  for (std::size_t j = 0; j < dw.size(); ++j) dweight[j] += static_cast<float>(dw[j]);
  if (din) {
    *din = Tensor(in.n, in.c, in.h, in.w);
    for (std::size_t j = 0; j < dx.size(); ++j) din->data[j] = static_cast<float>(dx[j]);
  }
}

void batchnorm_forward_train(const Tensor& in, std::span<const float> gamma,
                             std::span<const float> beta, float eps, Tensor& out, Tensor& xhat,
                             BatchNormStats& stats) {
  const int C = in.c;
  out = Tensor(in.n, in.c, in.h, in.w);
  xhat = Tensor(in.n, in.c, in.h, in.w);
  stats.mean.assign(static_cast<std::size_t>(C), 0.0f);
  stats.var.assign(static_cast<std::size_t>(C), 0.0f);
  stats.inv_std.assign(static_cast<std::size_t>(C), 0.0f);
  for (int c = 0; c < C; ++c) {
    double sum = 0.0;
    double count = 0.0;
    for (int i = 0; i < in.n; ++i)
      for (int y = 0; y < in.h; ++y)
        for (int x = 0; x < in.w; ++x) {
          sum += in.at(i, c, y, x);
          count += 1.0;
        }
    const double mean = sum / count;
    double sq = 0.0;
    for (int i = 0; i < in.n; ++i)
      for (int y = 0; y < in.h; ++y)
        for (int x = 0; x < in.w; ++x) sq += (in.at(i, c, y, x) - mean) * (in.at(i, c, y, x) - mean);
    const double var = sq / count;
    const double inv = 1.0 / std::sqrt(var + eps);
    const auto cu = static_cast<std::size_t>(c);
    stats.mean[cu] = static_cast<float>(mean);
    stats.var[cu] = static_cast<float>(var);
    stats.inv_std[cu] = static_cast<float>(inv);
    for (int i = 0; i < in.n; ++i)
      for (int y = 0; y < in.h; ++y)
        for (int x = 0; x < in.w; ++x) {
          const double xh = (in.at(i, c, y, x) - mean) * inv;
          xhat.at(i, c, y, x) = static_cast<float>(xh);
          out.at(i, c, y, x) = static_cast<float>(gamma[cu] * xh + beta[cu]);
        }
  }
}

void batchnorm_backward(const Tensor& dout, const Tensor& xhat, std::span<const float> gamma,
                        const BatchNormStats& stats, Tensor& din, std::span<float> dgamma,
                        std::span<float> dbeta) {
  din = Tensor(dout.n, dout.c, dout.h, dout.w);
  for (int c = 0; c < dout.c; ++c) {
    const auto cu = static_cast<std::size_t>(c);
    double sdy = 0.0;
    double sdyx = 0.0;
    double count = 0.0;
    for (int i = 0; i < dout.n; ++i)
      for (int y = 0; y < dout.h; ++y)
        for (int x = 0; x < dout.w; ++x) {
          sdy += dout.at(i, c, y, x);
          sdyx += static_cast<double>(dout.at(i, c, y, x)) * xhat.at(i, c, y, x);
          count += 1.0;
        }
    dgamma[cu] += static_cast<float>(sdyx);
    dbeta[cu] += static_cast<float>(sdy);
    for (int i = 0; i < dout.n; ++i)
      for (int y = 0; y < dout.h; ++y)
        for (int x = 0; x < dout.w; ++x) {
          const double g = dout.at(i, c, y, x) - sdy / count - xhat.at(i, c, y, x) * sdyx / count;
          din.at(i, c, y, x) = static_cast<float>(gamma[cu] * stats.inv_std[cu] * g);
        }
  }
}

}  // namespace srda::reference

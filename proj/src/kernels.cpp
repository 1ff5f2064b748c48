#include "srda/kernels.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "srda/errors.hpp"

namespace srda::kernels {
namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

void check_conv(const Tensor& in, std::span<const float> weight, const ConvShape& s) {
  if (in.c != s.in_channels)
    throw ShapeError("conv2d: input has " + std::to_string(in.c) + " channels, expected " +
                     std::to_string(s.in_channels));
  if (weight.size() != s.weight_size()) throw ShapeError("conv2d: weight size mismatch");
  if (s.kernel % 2 == 0) throw ShapeError("conv2d: kernel size must be odd");
}

// cols is (in_channels * k * k) x (h * w), row-major.
void im2col(const float* img, int channels, int h, int w, int k, float* cols) {
  const int pad = k / 2;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int c = 0; c < channels; ++c) {
    const float* plane = img + hw * c;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        float* row = cols + hw * ((static_cast<std::size_t>(c) * k + ky) * k + kx);
        const int dx = kx - pad;
        const int x0 = std::max(0, -dx);
        const int x1 = std::min(w, w - dx);
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - pad;
          float* dst = row + static_cast<std::size_t>(y) * w;
          if (sy < 0 || sy >= h) {
            std::fill(dst, dst + w, 0.0f);
            continue;
          }
          const float* src = plane + static_cast<std::size_t>(sy) * w;
          std::fill(dst, dst + x0, 0.0f);
          std::copy(src + x0 + dx, src + x1 + dx, dst + x0);
          std::fill(dst + x1, dst + w, 0.0f);
        }
      }
    }
  }
}

// Per-thread scratch reused across calls; grows to the largest request.
float* workspace(int slot, std::size_t count) {
  thread_local std::vector<float> buffers[2];
  std::vector<float>& b = buffers[slot];
  if (b.size() < count) b.resize(count);
  return b.data();
}


// Plane reductions with a fixed lane layout, so results do not depend on buffer alignment.
constexpr std::size_t kLanes = 16;

template <class F>
double lane_reduce(std::size_t n, F term) {
  float acc[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    for (std::size_t j = 0; j < kLanes; ++j) acc[j] += term(i + j);
  double total = 0.0;
  for (; i < n; ++i) total += term(i);
  for (float a : acc) total += a;
  return total;
}
}  // namespace

void conv2d_forward(const Tensor& in, std::span<const float> weight, std::span<const float> bias,
                    const ConvShape& s, Tensor& out) {
  check_conv(in, weight, s);
  if (static_cast<int>(bias.size()) != s.out_channels) throw ShapeError("conv2d: bias size mismatch");
  if (out.n != in.n || out.c != s.out_channels || out.h != in.h || out.w != in.w)
    out = Tensor(in.n, s.out_channels, in.h, in.w);
  const int hw = in.h * in.w;
  const int ck = s.in_channels * s.kernel * s.kernel;
  ConstMatMap wmat(weight.data(), s.out_channels, ck);

#pragma omp parallel for schedule(static)
  for (int i = 0; i < in.n; ++i) {
    MatMap omat(out.image(i), s.out_channels, hw);
    if (s.kernel == 1) {
      ConstMatMap x(in.image(i), ck, hw);
      omat.noalias() = wmat * x;
    } else {
      float* cols = workspace(0, static_cast<std::size_t>(ck) * hw);
      im2col(in.image(i), in.c, in.h, in.w, s.kernel, cols);
      ConstMatMap x(cols, ck, hw);
      omat.noalias() = wmat * x;
    }
    for (int o = 0; o < s.out_channels; ++o) omat.row(o).array() += bias[static_cast<std::size_t>(o)];
  }
}

void conv2d_backward(const Tensor& in, std::span<const float> weight, const Tensor& dout,
                     const ConvShape& s, Tensor* din, std::span<float> dweight,
                     std::span<float> dbias) {
  check_conv(in, weight, s);
  if (dout.n != in.n || dout.c != s.out_channels || dout.h != in.h || dout.w != in.w)
    throw ShapeError("conv2d_backward: gradient shape " + dout.shape_string());
  if (dweight.size() != s.weight_size() || static_cast<int>(dbias.size()) != s.out_channels)
    throw ShapeError("conv2d_backward: gradient buffer size mismatch");
  const int hw = in.h * in.w;
  const int ck = s.in_channels * s.kernel * s.kernel;
  const std::size_t wsize = s.weight_size();
  ConstMatMap wmat(weight.data(), s.out_channels, ck);
  if (din && !din->same_shape(in)) *din = Tensor(in.n, in.c, in.h, in.w);

  std::vector<float> partial_w(wsize * static_cast<std::size_t>(in.n));
  std::vector<float> partial_b(static_cast<std::size_t>(s.out_channels) * in.n);

  // The input gradient of a stride-1 "same" convolution is itself a "same"
  // convolution of dout with the spatially flipped, channel-transposed kernel.
  const int k2 = s.kernel * s.kernel;
  const int fk = s.out_channels * k2;
  RowMatrix flipped;
  if (din && s.kernel != 1) {
    flipped.resize(s.in_channels, fk);
    for (int o = 0; o < s.out_channels; ++o)
      for (int c = 0; c < s.in_channels; ++c)
        for (int t = 0; t < k2; ++t)
          flipped(c, o * k2 + (k2 - 1 - t)) = weight[(static_cast<std::size_t>(o) * s.in_channels + c) * k2 + t];
  }

#pragma omp parallel for schedule(static)
  for (int i = 0; i < in.n; ++i) {
    ConstMatMap dy(dout.image(i), s.out_channels, hw);
    MatMap dw(partial_w.data() + wsize * i, s.out_channels, ck);
    const float* xcols = in.image(i);
    if (s.kernel != 1) {
      float* cols = workspace(0, static_cast<std::size_t>(ck) * hw);
      im2col(in.image(i), in.c, in.h, in.w, s.kernel, cols);
      xcols = cols;
    }
    ConstMatMap x(xcols, ck, hw);
    dw.noalias() = dy * x.transpose();
    for (int o = 0; o < s.out_channels; ++o) {
      const float* row = dout.image(i) + hw * o;
      partial_b[static_cast<std::size_t>(i) * s.out_channels + o] =
          static_cast<float>(lane_reduce(hw, [row](std::size_t j) { return row[j]; }));
    }
    if (din) {
      MatMap dx(din->image(i), s.in_channels, hw);
      if (s.kernel == 1) {
        dx.noalias() = wmat.transpose() * dy;
      } else {
        float* dcols = workspace(1, static_cast<std::size_t>(fk) * hw);
        im2col(dout.image(i), s.out_channels, in.h, in.w, s.kernel, dcols);
        dx.noalias() = flipped * ConstMatMap(dcols, fk, hw);
      }
    }
  }

  // Fixed-order reduction over images.
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(wsize); ++j) {
    float acc = 0.0f;
    for (int i = 0; i < in.n; ++i) acc += partial_w[wsize * i + static_cast<std::size_t>(j)];
    dweight[static_cast<std::size_t>(j)] += acc;
  }
  for (int o = 0; o < s.out_channels; ++o) {
    float acc = 0.0f;
    for (int i = 0; i < in.n; ++i) acc += partial_b[static_cast<std::size_t>(i) * s.out_channels + o];
    dbias[static_cast<std::size_t>(o)] += acc;
  }
}

void maxpool2_forward(const Tensor& in, Tensor& out, std::vector<std::uint32_t>& argmax) {
  const int oh = in.h / 2;
  const int ow = in.w / 2;
  if (oh == 0 || ow == 0) throw ShapeError("maxpool2: input too small " + in.shape_string());
  out = Tensor(in.n, in.c, oh, ow);
  argmax.assign(out.size(), 0);
  const int planes = in.n * in.c;
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const float* src = in.data.data() + in.plane() * p;
    float* dst = out.data.data() + out.plane() * p;
    std::uint32_t* idx = argmax.data() + out.plane() * p;
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        std::uint32_t best = static_cast<std::uint32_t>((2 * y) * in.w + 2 * x);
        float bv = src[best];
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const auto k = static_cast<std::uint32_t>((2 * y + dy) * in.w + 2 * x + dx);
            if (src[k] > bv) {
              bv = src[k];
              best = k;
            }
          }
        }
        dst[y * ow + x] = bv;
        idx[y * ow + x] = best;
      }
    }
  }
}

void maxpool2_backward(const Tensor& dout, const std::vector<std::uint32_t>& argmax, int in_h,
                       int in_w, Tensor& din) {
  if (argmax.size() != dout.size()) throw ShapeError("maxpool2_backward: argmax size mismatch");
  din = Tensor(dout.n, dout.c, in_h, in_w);
  const int planes = dout.n * dout.c;
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const float* g = dout.data.data() + dout.plane() * p;
    const std::uint32_t* idx = argmax.data() + dout.plane() * p;
    float* dst = din.data.data() + din.plane() * p;
    for (std::size_t j = 0; j < dout.plane(); ++j) dst[idx[j]] += g[j];
  }
}

void upsample2_forward(const Tensor& in, Tensor& out) {
  out = Tensor(in.n, in.c, in.h * 2, in.w * 2);
  const int planes = in.n * in.c;
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const float* src = in.data.data() + in.plane() * p;
    float* dst = out.data.data() + out.plane() * p;
    for (int y = 0; y < out.h; ++y) {
      const float* row = src + static_cast<std::size_t>(y / 2) * in.w;
      float* drow = dst + static_cast<std::size_t>(y) * out.w;
      for (int x = 0; x < out.w; ++x) drow[x] = row[x / 2];
    }
  }
}

void upsample2_backward(const Tensor& dout, Tensor& din) {
  if (dout.h % 2 != 0 || dout.w % 2 != 0) throw ShapeError("upsample2_backward: odd gradient size");
  din = Tensor(dout.n, dout.c, dout.h / 2, dout.w / 2);
  const int planes = dout.n * dout.c;
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const float* src = dout.data.data() + dout.plane() * p;
    float* dst = din.data.data() + din.plane() * p;
    for (int y = 0; y < din.h; ++y) {
      for (int x = 0; x < din.w; ++x) {
        const std::size_t a = static_cast<std::size_t>(2 * y) * dout.w + 2 * x;
        dst[static_cast<std::size_t>(y) * din.w + x] =
            src[a] + src[a + 1] + src[a + dout.w] + src[a + dout.w + 1];
      }
    }
  }
}

void batchnorm_forward_train(const Tensor& in, std::span<const float> gamma,
                             std::span<const float> beta, float eps, Tensor& out, Tensor& xhat,
                             BatchNormStats& stats) {
  const int C = in.c;
  if (static_cast<int>(gamma.size()) != C || static_cast<int>(beta.size()) != C)
    throw ShapeError("batchnorm: parameter size mismatch");
  out = Tensor(in.n, in.c, in.h, in.w);
  xhat = Tensor(in.n, in.c, in.h, in.w);
  stats.mean.assign(static_cast<std::size_t>(C), 0.0f);
  stats.var.assign(static_cast<std::size_t>(C), 0.0f);
  stats.inv_std.assign(static_cast<std::size_t>(C), 0.0f);
  const std::size_t hw = in.plane();
  const double count = static_cast<double>(hw) * in.n;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < C; ++c) {
    double sum = 0.0;
    for (int i = 0; i < in.n; ++i) {
      const float* p = in.channel(i, c);
      sum += lane_reduce(hw, [p](std::size_t j) { return p[j]; });
    }
    const double mean = sum / count;
    const auto m = static_cast<float>(mean);
    double sq = 0.0;
    for (int i = 0; i < in.n; ++i) {
      const float* p = in.channel(i, c);
      sq += lane_reduce(hw, [p, m](std::size_t j) { return (p[j] - m) * (p[j] - m); });
    }
    const double var = sq / count;
    const auto inv = static_cast<float>(1.0 / std::sqrt(var + eps));
    stats.mean[static_cast<std::size_t>(c)] = m;
    stats.var[static_cast<std::size_t>(c)] = static_cast<float>(var);
    stats.inv_std[static_cast<std::size_t>(c)] = inv;
    const float g = gamma[static_cast<std::size_t>(c)];
    const float b = beta[static_cast<std::size_t>(c)];
    for (int i = 0; i < in.n; ++i) {
      const float* p = in.channel(i, c);
      float* xh = xhat.channel(i, c);
      float* o = out.channel(i, c);
      for (std::size_t j = 0; j < hw; ++j) {
        xh[j] = (p[j] - m) * inv;
        o[j] = g * xh[j] + b;
      }
    }
  }
}

void batchnorm_forward_eval(const Tensor& in, std::span<const float> gamma,
                            std::span<const float> beta, std::span<const float> running_mean,
                            std::span<const float> running_var, float eps, Tensor& out) {
  const int C = in.c;
  if (static_cast<int>(gamma.size()) != C || static_cast<int>(running_mean.size()) != C)
    throw ShapeError("batchnorm: parameter size mismatch");
  out = Tensor(in.n, in.c, in.h, in.w);
  const std::size_t hw = in.plane();
  const int planes = in.n * C;
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const auto c = static_cast<std::size_t>(p % C);
    const float inv = 1.0f / std::sqrt(running_var[c] + eps);
    const float scale = gamma[c] * inv;
    const float shift = beta[c] - running_mean[c] * scale;
    const float* src = in.data.data() + hw * p;
    float* dst = out.data.data() + hw * p;
    for (std::size_t j = 0; j < hw; ++j) dst[j] = src[j] * scale + shift;
  }
}

void batchnorm_backward(const Tensor& dout, const Tensor& xhat, std::span<const float> gamma,
                        const BatchNormStats& stats, Tensor& din, std::span<float> dgamma,
                        std::span<float> dbeta) {
  if (!dout.same_shape(xhat)) throw ShapeError("batchnorm_backward: shape mismatch");
  const int C = dout.c;
  din = Tensor(dout.n, dout.c, dout.h, dout.w);
  const std::size_t hw = dout.plane();
  const double count = static_cast<double>(hw) * dout.n;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < C; ++c) {
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (int i = 0; i < dout.n; ++i) {
      const float* g = dout.channel(i, c);
      const float* xh = xhat.channel(i, c);
      sum_dy += lane_reduce(hw, [g](std::size_t j) { return g[j]; });
      sum_dy_xhat += lane_reduce(hw, [g, xh](std::size_t j) { return g[j] * xh[j]; });
    }
    dgamma[static_cast<std::size_t>(c)] += static_cast<float>(sum_dy_xhat);
    dbeta[static_cast<std::size_t>(c)] += static_cast<float>(sum_dy);
    const auto k = static_cast<float>(static_cast<double>(gamma[static_cast<std::size_t>(c)]) *
                                      stats.inv_std[static_cast<std::size_t>(c)] / count);
    const auto fcount = static_cast<float>(count);
    const auto mean_dy = static_cast<float>(sum_dy);
    const auto mean_dy_xhat = static_cast<float>(sum_dy_xhat);
    for (int i = 0; i < dout.n; ++i) {
      const float* g = dout.channel(i, c);
      const float* xh = xhat.channel(i, c);
      float* dx = din.channel(i, c);
      for (std::size_t j = 0; j < hw; ++j) dx[j] = k * (fcount * g[j] - mean_dy - xh[j] * mean_dy_xhat);
    }
  }
}

void relu_inplace(Tensor& x) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  float* d = x.data.data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) d[i] = d[i] > 0.0f ? d[i] : 0.0f;
}

void relu_backward_inplace(const Tensor& y, Tensor& dy) {
  if (!y.same_shape(dy)) throw ShapeError("relu_backward: shape mismatch");
  const auto n = static_cast<std::ptrdiff_t>(y.size());
  const float* a = y.data.data();
  float* g = dy.data.data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    g[i] = a[i] > 0.0f ? g[i] : 0.0f;
}

void concat_channels(const Tensor& a, const Tensor& b, Tensor& out) {
  if (a.n != b.n || a.h != b.h || a.w != b.w)
    throw ShapeError("concat: " + a.shape_string() + " vs " + b.shape_string());
  out = Tensor(a.n, a.c + b.c, a.h, a.w);
  for (int i = 0; i < a.n; ++i) {
    std::copy(a.image(i), a.image(i) + a.image_size(), out.image(i));
    std::copy(b.image(i), b.image(i) + b.image_size(), out.image(i) + a.image_size());
  }
}

void split_channels(const Tensor& d, int a_channels, Tensor& da, Tensor& db) {
  da = Tensor(d.n, a_channels, d.h, d.w);
  db = Tensor(d.n, d.c - a_channels, d.h, d.w);
  for (int i = 0; i < d.n; ++i) {
    std::copy(d.image(i), d.image(i) + da.image_size(), da.image(i));
    std::copy(d.image(i) + da.image_size(), d.image(i) + d.image_size(), db.image(i));
  }
}

void global_avg_pool(const Tensor& in, Tensor& out) {
  out = Tensor(in.n, in.c, 1, 1);
  const int planes = in.n * in.c;
  const std::size_t hw = in.plane();
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const float* src = in.data.data() + hw * p;
    double s = 0.0;
    for (std::size_t j = 0; j < hw; ++j) s += src[j];
    out.data[static_cast<std::size_t>(p)] = static_cast<float>(s / static_cast<double>(hw));
  }
}

void global_avg_pool_backward(const Tensor& dout, int h, int w, Tensor& din) {
  din = Tensor(dout.n, dout.c, h, w);
  const std::size_t hw = din.plane();
  const int planes = dout.n * dout.c;
  const float scale = 1.0f / static_cast<float>(hw);
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    float* dst = din.data.data() + hw * p;
    std::fill(dst, dst + hw, dout.data[static_cast<std::size_t>(p)] * scale);
  }
}

}  // namespace srda::kernels

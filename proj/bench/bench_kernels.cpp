// Parallel kernels against the serial reference on shapes from the width-16 network.
#include <benchmark/benchmark.h>

#include "srda/kernels.hpp"
#include "srda/rng.hpp"

using namespace srda;

namespace {

Tensor random_tensor(int n, int c, int h, int w, std::uint64_t seed) {
  Tensor t(n, c, h, w);
  Rng rng(seed);
  for (float& v : t.data) v = static_cast<float>(rng.normal(0.0, 1.0));
  return t;
}

std::vector<float> random_vector(std::size_t n, std::uint64_t seed) {
  std::vector<float> v(n);
  Rng rng(seed);
  for (float& x : v) x = static_cast<float>(rng.normal(0.0, 0.1));
  return v;
}

// Args: batch, in channels, out channels, spatial size.
struct ConvCase {
  Tensor in, dout, out, din;
  ConvShape shape;
  std::vector<float> weight, bias, dweight, dbias;

  explicit ConvCase(const benchmark::State& st) {
    const int n = static_cast<int>(st.range(0));
    const int size = static_cast<int>(st.range(3));
    shape = ConvShape{static_cast<int>(st.range(1)), static_cast<int>(st.range(2)), 3};
    in = random_tensor(n, shape.in_channels, size, size, 1);
    dout = random_tensor(n, shape.out_channels, size, size, 2);
    weight = random_vector(shape.weight_size(), 3);
    bias = random_vector(static_cast<std::size_t>(shape.out_channels), 4);
    dweight.assign(weight.size(), 0.0f);
    dbias.assign(bias.size(), 0.0f);
  }
};

template <bool Parallel>
void conv_forward(benchmark::State& st) {
  ConvCase c(st);
  for (auto _ : st) {
    if constexpr (Parallel) kernels::conv2d_forward(c.in, c.weight, c.bias, c.shape, c.out);
    else reference::conv2d_forward(c.in, c.weight, c.bias, c.shape, c.out);
    benchmark::DoNotOptimize(c.out.data.data());
  }
}

template <bool Parallel>
void conv_backward(benchmark::State& st) {
  ConvCase c(st);
  for (auto _ : st) {
    if constexpr (Parallel) kernels::conv2d_backward(c.in, c.weight, c.dout, c.shape, &c.din, c.dweight, c.dbias);
    else reference::conv2d_backward(c.in, c.weight, c.dout, c.shape, &c.din, c.dweight, c.dbias);
    benchmark::DoNotOptimize(c.din.data.data());
  }
}

// Args: batch, channels, spatial size.
template <bool Parallel>
void batchnorm_train(benchmark::State& st) {
  const int c = static_cast<int>(st.range(1));
  const int size = static_cast<int>(st.range(2));
  const Tensor in = random_tensor(static_cast<int>(st.range(0)), c, size, size, 5);
  const Tensor dout = random_tensor(in.n, c, size, size, 6);
  const std::vector<float> gamma(static_cast<std::size_t>(c), 1.0f), beta(static_cast<std::size_t>(c), 0.0f);
  std::vector<float> dgamma(gamma.size()), dbeta(gamma.size());
  Tensor out, xhat, din;
  BatchNormStats stats;
  for (auto _ : st) {
    if constexpr (Parallel) {
      kernels::batchnorm_forward_train(in, gamma, beta, 1e-5f, out, xhat, stats);
      kernels::batchnorm_backward(dout, xhat, gamma, stats, din, dgamma, dbeta);
    } else {
      reference::batchnorm_forward_train(in, gamma, beta, 1e-5f, out, xhat, stats);
      reference::batchnorm_backward(dout, xhat, gamma, stats, din, dgamma, dbeta);
    }
    benchmark::DoNotOptimize(din.data.data());
  }
}

void conv_args(benchmark::internal::Benchmark* b) {
  b->Args({12, 1, 16, 64})->Args({12, 16, 16, 64})->Args({12, 48, 16, 64})->Args({12, 64, 64, 16})->Args({12, 128, 128, 8});
  b->Unit(benchmark::kMillisecond);
}

void bn_args(benchmark::internal::Benchmark* b) {
  b->Args({12, 16, 64})->Args({12, 128, 8});
  b->Unit(benchmark::kMicrosecond);
}

}  // namespace

BENCHMARK(conv_forward<false>)->Name("conv_forward/reference")->Apply(conv_args);
BENCHMARK(conv_forward<true>)->Name("conv_forward/parallel")->Apply(conv_args);
BENCHMARK(conv_backward<false>)->Name("conv_backward/reference")->Apply(conv_args);
BENCHMARK(conv_backward<true>)->Name("conv_backward/parallel")->Apply(conv_args);
BENCHMARK(batchnorm_train<false>)->Name("batchnorm_train/reference")->Apply(bn_args);
BENCHMARK(batchnorm_train<true>)->Name("batchnorm_train/parallel")->Apply(bn_args);

BENCHMARK_MAIN();

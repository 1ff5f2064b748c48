#include <doctest.h>

#include <cmath>

#include "srda/kernels.hpp"
#include "srda/models.hpp"
#include "srda/nn.hpp"
#include "srda/rng.hpp"

using namespace srda;

namespace {

Tensor random_tensor(Rng& rng, int n, int c, int h, int w) {
  Tensor t(n, c, h, w);
  for (float& v : t.data) v = static_cast<float>(rng.normal(0.0, 1.0));
  return t;
}

std::vector<float> random_vec(Rng& rng, std::size_t n) {
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(rng.normal(0.0, 0.5));
  return v;
}

double max_abs_diff(std::span<const float> a, std::span<const float> b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

double dot(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

}  // namespace

TEST_CASE("parallel convolution matches the serial reference") {
  Rng rng(21);
  struct Case {
    int n, cin, cout, k, h, w;
  };
  for (const Case c : {Case{3, 1, 4, 3, 8, 8}, Case{2, 5, 3, 3, 6, 10}, Case{4, 6, 2, 1, 5, 5}, Case{1, 3, 3, 5, 7, 7}}) {
    const ConvShape s{c.cin, c.cout, c.k};
    const Tensor x = random_tensor(rng, c.n, c.cin, c.h, c.w);
    const auto w = random_vec(rng, s.weight_size());
    const auto b = random_vec(rng, static_cast<std::size_t>(c.cout));
    Tensor fast;
    Tensor slow;
    kernels::conv2d_forward(x, w, b, s, fast);
    reference::conv2d_forward(x, w, b, s, slow);
    CHECK(max_abs_diff(fast.data, slow.data) < 1e-4);

    const Tensor dy = random_tensor(rng, c.n, c.cout, c.h, c.w);
    Tensor dx_fast;
    Tensor dx_slow;
    std::vector<float> dw_fast(w.size(), 0.5f);
    std::vector<float> dw_slow(w.size(), 0.5f);
    std::vector<float> db_fast(b.size(), 0.0f);
    std::vector<float> db_slow(b.size(), 0.0f);
    kernels::conv2d_backward(x, w, dy, s, &dx_fast, dw_fast, db_fast);
    reference::conv2d_backward(x, w, dy, s, &dx_slow, dw_slow, db_slow);
    CHECK(max_abs_diff(dx_fast.data, dx_slow.data) < 1e-4);
    CHECK(max_abs_diff(dw_fast, dw_slow) < 1e-3);
    CHECK(max_abs_diff(db_fast, db_slow) < 1e-4);
  }
}

TEST_CASE("convolution backward is the adjoint of forward") {
  Rng rng(22);
  const ConvShape s{3, 4, 3};
  const Tensor x = random_tensor(rng, 2, 3, 6, 5);
  const auto w = random_vec(rng, s.weight_size());
  const std::vector<float> zero_bias(4, 0.0f);
  Tensor y;
  kernels::conv2d_forward(x, w, zero_bias, s, y);
  const Tensor g = random_tensor(rng, 2, 4, 6, 5);
  Tensor dx;
  std::vector<float> dw(w.size(), 0.0f);
  std::vector<float> db(4, 0.0f);
  kernels::conv2d_backward(x, w, g, s, &dx, dw, db);
  CHECK(dot(y.data, g.data) == doctest::Approx(dot(x.data, dx.data)).epsilon(1e-4));
  CHECK(dot(y.data, g.data) == doctest::Approx(dot(w, dw)).epsilon(1e-4));
}

TEST_CASE("batch norm matches the serial reference") {
  Rng rng(23);
  const Tensor x = random_tensor(rng, 4, 3, 5, 6);
  const auto gamma = random_vec(rng, 3);
  const auto beta = random_vec(rng, 3);
  Tensor out_f, out_s, xh_f, xh_s;
  BatchNormStats st_f, st_s;
  kernels::batchnorm_forward_train(x, gamma, beta, 1e-5f, out_f, xh_f, st_f);
  reference::batchnorm_forward_train(x, gamma, beta, 1e-5f, out_s, xh_s, st_s);
  CHECK(max_abs_diff(out_f.data, out_s.data) < 1e-5);
  CHECK(max_abs_diff(st_f.var, st_s.var) < 1e-5);
  const Tensor dy = random_tensor(rng, 4, 3, 5, 6);
  Tensor dx_f, dx_s;
  std::vector<float> dg_f(3, 0.0f), dg_s(3, 0.0f), db_f(3, 0.0f), db_s(3, 0.0f);
  kernels::batchnorm_backward(dy, xh_f, gamma, st_f, dx_f, dg_f, db_f);
  reference::batchnorm_backward(dy, xh_s, gamma, st_s, dx_s, dg_s, db_s);
  CHECK(max_abs_diff(dx_f.data, dx_s.data) < 1e-5);
  CHECK(max_abs_diff(dg_f, dg_s) < 1e-4);
  CHECK(max_abs_diff(db_f, db_s) < 1e-4);
}

TEST_CASE("pooling, upsampling and channel ops are adjoint pairs") {
  Rng rng(24);
  const Tensor x = random_tensor(rng, 2, 3, 6, 8);

  Tensor up;
  kernels::upsample2_forward(x, up);
  CHECK(up.h == 12);
  const Tensor gu = random_tensor(rng, 2, 3, 12, 16);
  Tensor du;
  kernels::upsample2_backward(gu, du);
  CHECK(dot(up.data, gu.data) == doctest::Approx(dot(x.data, du.data)).epsilon(1e-5));

  Tensor pooled;
  std::vector<std::uint32_t> argmax;
  kernels::maxpool2_forward(x, pooled, argmax);
  const Tensor gp = random_tensor(rng, 2, 3, 3, 4);
  Tensor dp;
  kernels::maxpool2_backward(gp, argmax, 6, 8, dp);
  CHECK(dot(pooled.data, gp.data) == doctest::Approx(dot(x.data, dp.data)).epsilon(1e-5));

  const Tensor y = random_tensor(rng, 2, 2, 6, 8);
  Tensor cat;
  kernels::concat_channels(x, y, cat);
  Tensor a, b;
  kernels::split_channels(cat, 3, a, b);
  CHECK(a.data == x.data);
  CHECK(b.data == y.data);

  Tensor gap;
  kernels::global_avg_pool(x, gap);
  const Tensor gg = random_tensor(rng, 2, 3, 1, 1);
  Tensor dg;
  kernels::global_avg_pool_backward(gg, 6, 8, dg);
  CHECK(dot(gap.data, gg.data) == doctest::Approx(dot(x.data, dg.data)).epsilon(1e-5));
}

TEST_CASE("segmentation network gradient integrates to the loss change") {
  // Small network, loss = <g, logits>; batch norm runs on batch statistics.
  // The loss is continuous but ReLU and max-pool make it only piecewise
  // smooth, so central differences along a whole tensor cross kinks. Instead
  // the analytic directional derivative is integrated along the segment
  // [-h, h] and compared with the loss difference at its ends.
  SegModel model = build_seg_model(2, 4, 5, 2);
  Rng rng(25);
  const Tensor x = random_tensor(rng, 3, 1, 16, 16);
  const Tensor g = random_tensor(rng, 3, 2, 16, 16);
  auto params = model.parameters();
  auto loss = [&] { return dot(model.forward(x, Mode::train).data, g.data); };
  const double h = 1e-2;
  const int steps = 64;
  for (Param* p : params) {
    std::vector<double> dir(p->value.size());
    double norm = 0.0;
    for (double& d : dir) {
      d = rng.normal(0.0, 1.0);
      norm += d * d;
    }
    for (double& d : dir) d /= std::sqrt(norm);
    const std::vector<float> saved = p->value;
    auto move_to = [&](double t) {
      for (std::size_t i = 0; i < dir.size(); ++i) p->value[i] = static_cast<float>(saved[i] + t * dir[i]);
    };
    move_to(h);
    const double up = loss();
    move_to(-h);
    const double down = loss();
    double integral = 0.0;
    for (int k = 0; k <= steps; ++k) {
      move_to(-h + 2.0 * h * k / steps);
      zero_grad(params);
      model.forward(x, Mode::train);
      model.backward(g);
      double slope = 0.0;
      for (std::size_t i = 0; i < dir.size(); ++i) slope += dir[i] * p->grad[i];
      integral += (k == 0 || k == steps ? 0.5 : 1.0) * slope * (2.0 * h / steps);
    }
    p->value = saved;
    INFO(p->name, ": loss change ", up - down, ", integrated gradient ", integral);
    // 2e-5 absorbs float32 rounding of a loss of magnitude ~10.
    CHECK(std::abs((up - down) - integral) <= 2e-2 * std::abs(up - down) + 2e-5);
  }
  CHECK(params.size() > 20);
}

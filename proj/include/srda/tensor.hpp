#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace srda {

/// Dense float tensor laid out as (batch, channel, height, width).
struct Tensor {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;
  std::vector<float> data;

  Tensor() = default;
  Tensor(int n, int c, int h, int w, float fill = 0.0f);

  std::size_t size() const { return data.size(); }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  std::size_t image_size() const { return plane() * c; }

  float* image(int i) { return data.data() + image_size() * i; }
  const float* image(int i) const { return data.data() + image_size() * i; }
  float* channel(int i, int ch) { return image(i) + plane() * ch; }
  const float* channel(int i, int ch) const { return image(i) + plane() * ch; }

  float& at(int i, int ch, int y, int x) { return channel(i, ch)[static_cast<std::size_t>(y) * w + x]; }
  float at(int i, int ch, int y, int x) const { return channel(i, ch)[static_cast<std::size_t>(y) * w + x]; }

  bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
  std::string shape_string() const;
  void fill(float v);
};

/// Stack single-image tensors (n == 1) along the batch axis.
Tensor stack(std::span<const Tensor> images);

}  // namespace srda

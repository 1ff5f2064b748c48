#include "srda/tensor.hpp"

#include <algorithm>

#include "srda/errors.hpp"

namespace srda {

Tensor::Tensor(int n_, int c_, int h_, int w_, float fill_value)
    : n(n_), c(c_), h(h_), w(w_) {
  if (n < 0 || c < 0 || h < 0 || w < 0) throw ShapeError("negative tensor dimension");
  data.assign(static_cast<std::size_t>(n) * c * h * w, fill_value);
}

std::string Tensor::shape_string() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
         std::to_string(w) + ")";
}

void Tensor::fill(float v) { std::fill(data.begin(), data.end(), v); }

Tensor stack(std::span<const Tensor> images) {
  if (images.empty()) return {};
  const Tensor& first = images.front();
  Tensor out(static_cast<int>(images.size()), first.c, first.h, first.w);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const Tensor& t = images[i];
    if (t.n != 1 || t.c != first.c || t.h != first.h || t.w != first.w)
      throw ShapeError("stack: image " + std::to_string(i) + " has shape " + t.shape_string());
    std::copy(t.data.begin(), t.data.end(), out.image(static_cast<int>(i)));
  }
  return out;
}

}  // namespace srda

#include "srda/raster.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "font_data.hpp"
#include "srda/errors.hpp"

namespace srda {

Canvas::Canvas(int width, int height, Rgb background) : width_(width), height_(height) {
  if (width <= 0 || height <= 0) throw ValueError("canvas dimensions must be positive");
  rgb_.resize(static_cast<std::size_t>(width) * height * 3);
  for (std::size_t i = 0; i < rgb_.size(); i += 3) std::copy(background.begin(), background.end(), rgb_.begin() + static_cast<std::ptrdiff_t>(i));
}

Rgb Canvas::pixel(int x, int y) const {
  const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
  return {rgb_[i], rgb_[i + 1], rgb_[i + 2]};
}

void Canvas::set(int x, int y, Rgb c) {
  if (x < 0 || y < 0 || x >= width_ || y >= height_) return;
  const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
  rgb_[i] = c[0];
  rgb_[i + 1] = c[1];
  rgb_[i + 2] = c[2];
}

void Canvas::fill_rect(int x, int y, int w, int h, Rgb c) {
  for (int yy = y; yy < y + h; ++yy)
    for (int xx = x; xx < x + w; ++xx) set(xx, yy, c);
}

void Canvas::stroke_rect(int x, int y, int w, int h, Rgb c) {
  fill_rect(x, y, w, 1, c);
  fill_rect(x, y + h - 1, w, 1, c);
  fill_rect(x, y, 1, h, c);
  fill_rect(x + w - 1, y, 1, h, c);
}

void Canvas::line(double x0, double y0, double x1, double y1, Rgb c, int thickness) {
  const double len = std::max(std::abs(x1 - x0), std::abs(y1 - y0));
  const int steps = std::max(1, static_cast<int>(std::ceil(len * 2)));
  const int r0 = -(thickness - 1) / 2;
  const int r1 = thickness / 2;
  for (int s = 0; s <= steps; ++s) {
    const double t = static_cast<double>(s) / steps;
    const int x = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
    const int y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
    for (int dy = r0; dy <= r1; ++dy)
      for (int dx = r0; dx <= r1; ++dx) set(x + dx, y + dy, c);
  }
}

int Canvas::text_width(const std::string& s, int scale) { return static_cast<int>(s.size()) * font::kGlyphWidth * scale; }

void Canvas::text(int x, int y, const std::string& s, Rgb c, int scale) {
  for (std::size_t k = 0; k < s.size(); ++k) {
    const int ch = static_cast<unsigned char>(s[k]);
    if (ch < 32 || ch > 126) continue;
    const auto& g = font::kGlyphs[static_cast<std::size_t>(ch - 32)];
    const int gx = x + static_cast<int>(k) * font::kGlyphWidth * scale;
    for (int row = 0; row < font::kGlyphHeight; ++row)
      for (int col = 0; col < font::kGlyphWidth; ++col)
        if (g[static_cast<std::size_t>(row)] & (1 << (font::kGlyphWidth - 1 - col)))
          fill_rect(gx + col * scale, y + row * scale, scale, scale, c);
  }
}

Rgb colormap(Colormap map, double t) {
  t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0);
  if (map == Colormap::gray) {
    const auto v = static_cast<std::uint8_t>(std::lround(t * 255));
    return {v, v, v};
  }
  // black -> purple -> orange -> pale yellow
  static const double stops[4][3] = {{0, 0, 4}, {120, 28, 109}, {237, 105, 37}, {252, 253, 191}};
  const double p = t * 3.0;
  const int i = std::min(2, static_cast<int>(p));
  const double f = p - i;
  Rgb out{};
  for (int ch = 0; ch < 3; ++ch)
    out[static_cast<std::size_t>(ch)] = static_cast<std::uint8_t>(std::lround(stops[i][ch] + f * (stops[i + 1][ch] - stops[i][ch])));
  return out;
}

void Canvas::blit(int x, int y, std::span<const double> values, int h, int w, double lo, double hi, Colormap map, int zoom) {
  if (values.size() != static_cast<std::size_t>(h) * w) throw ShapeError("blit: field size mismatch");
  const double span = hi > lo ? hi - lo : 1.0;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      fill_rect(x + c * zoom, y + r * zoom, zoom, zoom,
                colormap(map, (values[static_cast<std::size_t>(r) * w + c] - lo) / span));
}

void Canvas::overlay(int x, int y, std::span<const std::uint8_t> mask, int h, int w, Rgb c, double alpha, int zoom) {
  if (mask.size() != static_cast<std::size_t>(h) * w) throw ShapeError("overlay: mask size mismatch");
  for (int r = 0; r < h; ++r)
    for (int col = 0; col < w; ++col) {
      if (!mask[static_cast<std::size_t>(r) * w + col]) continue;
      for (int dy = 0; dy < zoom; ++dy)
        for (int dx = 0; dx < zoom; ++dx) {
          const int px = x + col * zoom + dx;
          const int py = y + r * zoom + dy;
          if (px < 0 || py < 0 || px >= width_ || py >= height_) continue;
          Rgb p = pixel(px, py);
          for (int ch = 0; ch < 3; ++ch)
            p[static_cast<std::size_t>(ch)] = static_cast<std::uint8_t>(
                std::lround((1 - alpha) * p[static_cast<std::size_t>(ch)] + alpha * c[static_cast<std::size_t>(ch)]));
          set(px, py, p);
        }
    }
}

void Canvas::write_png(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) throw IoError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    std::fclose(fp);
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError("PNG encoding failed: " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width_), static_cast<png_uint_32>(height_), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height_; ++y)
    png_write_row(png, const_cast<png_bytep>(rgb_.data() + static_cast<std::size_t>(y) * width_ * 3));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

}  // namespace srda

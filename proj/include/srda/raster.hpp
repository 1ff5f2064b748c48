#pragma once

// Small RGB canvas for report figures: lines, rectangles, bitmap text,
// scalar-field blits, and PNG output.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace srda {

using Rgb = std::array<std::uint8_t, 3>;

enum class Colormap { gray, heat };

class Canvas {
 public:
  Canvas(int width, int height, Rgb background = {255, 255, 255});

  int width() const { return width_; }
  int height() const { return height_; }
  Rgb pixel(int x, int y) const;
  void set(int x, int y, Rgb c);

  void fill_rect(int x, int y, int w, int h, Rgb c);
  void stroke_rect(int x, int y, int w, int h, Rgb c);
  void line(double x0, double y0, double x1, double y1, Rgb c, int thickness = 1);
  /// Top-left anchored; scale multiplies the 6x11 glyph size.
  void text(int x, int y, const std::string& s, Rgb c, int scale = 1);
  static int text_width(const std::string& s, int scale = 1);
  /// Draws an (h, w) field at (x, y), each value mapped from [lo, hi], each
  /// pixel enlarged to zoom x zoom.
  void blit(int x, int y, std::span<const double> values, int h, int w, double lo, double hi, Colormap map, int zoom = 1);
  /// Tints pixels where mask != 0.
  void overlay(int x, int y, std::span<const std::uint8_t> mask, int h, int w, Rgb c, double alpha, int zoom = 1);

  void write_png(const std::filesystem::path& path) const;

 private:
  int width_;
  int height_;
  std::vector<std::uint8_t> rgb_;
};

Rgb colormap(Colormap map, double t);

}  // namespace srda

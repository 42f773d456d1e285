#pragma once

#include <cstddef>

namespace signbench {

/// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct PixelRect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const noexcept { return x1 - x0; }
  int height() const noexcept { return y1 - y0; }
  long area() const noexcept { return width() > 0 && height() > 0 ? static_cast<long>(width()) * height() : 0; }
  bool contains(int x, int y) const noexcept { return x >= x0 && x < x1 && y >= y0 && y < y1; }
  bool within(int image_width, int image_height) const noexcept {
    return x0 >= 0 && y0 >= 0 && x1 <= image_width && y1 <= image_height && x0 < x1 && y0 < y1;
  }

  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

}  // namespace signbench

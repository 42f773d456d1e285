#include "signbench/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fmt/format.h>
#include <memory>
#include <numbers>

#include "signbench/error.hpp"

namespace signbench {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

RawImage read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw DataError("cannot open image: " + path.string());
  unsigned char sig[8];
  if (std::fread(sig, 1, sizeof(sig), file.get()) != sizeof(sig) || png_sig_cmp(sig, 0, sizeof(sig)) != 0) {
    throw DataError("not a PNG file: " + path.string());
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("libpng initialisation failed");
  }
  RawImage image;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("corrupt PNG: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, sizeof(sig));
  png_read_info(png, info);
  const auto color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  image.width = static_cast<int>(png_get_image_width(png, info));
  image.height = static_cast<int>(png_get_image_height(png, info));
  image.channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  image.pixels.resize(stride * static_cast<std::size_t>(image.height));
  rows.resize(static_cast<std::size_t>(image.height));
  for (std::size_t y = 0; y < rows.size(); ++y) rows[y] = image.pixels.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

void write_png(const RawImage& image, const std::filesystem::path& path) {
  if (image.channels != 1 && image.channels != 3) throw StorageError("write_png supports 1 or 3 channels");
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw StorageError("cannot create image: " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw StorageError("libpng initialisation failed");
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(image.height));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw StorageError("failed writing PNG: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  const std::size_t stride = static_cast<std::size_t>(image.width) * static_cast<std::size_t>(image.channels);
  for (std::size_t y = 0; y < rows.size(); ++y) {
    rows[y] = const_cast<png_bytep>(image.pixels.data() + y * stride);
  }
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

RawImage to_raw(const Tensor& image) {
  require_rank(image, 3, "to_raw image");
  if (image.dim(0) != 3) throw ShapeError("to_raw expects a 3-channel image");
  RawImage raw;
  raw.height = static_cast<int>(image.dim(1));
  raw.width = static_cast<int>(image.dim(2));
  raw.channels = 3;
  const std::size_t plane = image.dim(1) * image.dim(2);
  raw.pixels.resize(plane * 3);
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      const double v = std::clamp(image[c * plane + i], 0.0, 1.0);
      raw.pixels[i * 3 + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  }
  return raw;
}

void PreprocessConfig::validate() const {
  if (target_size <= 0 || target_size % 8 != 0) {
    throw ConfigError(fmt::format("target size {} must be a positive multiple of 8", target_size));
  }
  if (!(rotation_range_deg >= 0.0 && rotation_range_deg <= 180.0)) {
    throw ConfigError(fmt::format("rotation range {} outside [0, 180]", rotation_range_deg));
  }
}

Tensor preprocess(const RawImage& image, const PreprocessConfig& config) {
  config.validate();
  if (image.channels != 3) {
    throw DataError(fmt::format("expected an RGB image, got {} channel(s)", image.channels));
  }
  if (image.width <= 0 || image.height <= 0) throw DataError("empty image");
  const auto size = static_cast<std::size_t>(config.target_size);
  Tensor out({3, size, size});
  // Align pixel centers: src = (dst + 0.5) * scale - 0.5, clamped to the frame.
  const double sx = static_cast<double>(image.width) / static_cast<double>(size);
  const double sy = static_cast<double>(image.height) / static_cast<double>(size);
  for (std::size_t y = 0; y < size; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, image.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - y0;
    for (std::size_t x = 0; x < size; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, image.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = image.at(x0, y0, c) + wx * (image.at(x1, y0, c) - image.at(x0, y0, c));
        const double bottom = image.at(x0, y1, c) + wx * (image.at(x1, y1, c) - image.at(x0, y1, c));
        out[(static_cast<std::size_t>(c) * size + y) * size + x] = (top + wy * (bottom - top)) / 255.0;
      }
    }
  }
  return out;
}

Tensor rotate(const Tensor& image, double angle_deg) {
  require_rank(image, 3, "rotate image");
  const std::size_t channels = image.dim(0), height = image.dim(1), width = image.dim(2);
  Tensor out = Tensor::zeros_like(image);
  const double theta = angle_deg * std::numbers::pi / 180.0;
  const double cos_t = std::cos(theta), sin_t = std::sin(theta);
  const double cx = 0.5 * (static_cast<double>(width) - 1.0), cy = 0.5 * (static_cast<double>(height) - 1.0);
  const double max_x = static_cast<double>(width) - 1.0, max_y = static_cast<double>(height) - 1.0;
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
      // Inverse map of a counter-clockwise rotation in y-down screen coordinates.
      const double sx = std::clamp(cx + dx * cos_t - dy * sin_t, 0.0, max_x);
      const double sy = std::clamp(cy + dx * sin_t + dy * cos_t, 0.0, max_y);
      const auto x0 = static_cast<std::size_t>(sx), y0 = static_cast<std::size_t>(sy);
      const std::size_t x1 = std::min(x0 + 1, width - 1), y1 = std::min(y0 + 1, height - 1);
      const double wx = sx - static_cast<double>(x0), wy = sy - static_cast<double>(y0);
      for (std::size_t c = 0; c < channels; ++c) {
        const double* plane = image.data().data() + c * height * width;
        const double top = plane[y0 * width + x0] + wx * (plane[y0 * width + x1] - plane[y0 * width + x0]);
        const double bottom = plane[y1 * width + x0] + wx * (plane[y1 * width + x1] - plane[y1 * width + x0]);
        out[(c * height + y) * width + x] = top + wy * (bottom - top);
      }
    }
  }
  return out;
}

Tensor random_rotation(const Tensor& image, SplitMix64& rng, double range_deg) {
  return rotate(image, rng.uniform(-range_deg, range_deg));
}

}  // namespace signbench

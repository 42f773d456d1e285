#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "signbench/rng.hpp"
#include "signbench/tensor.hpp"

namespace signbench {

/// Interleaved 8-bit image as decoded from disk.
struct RawImage {
  int width = 0;
  int height = 0;
  int channels = 0;  ///< 1 (gray) or 3 (RGB)
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(int x, int y, int c) const {
    return pixels[(static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) *
                      static_cast<std::size_t>(channels) +
                  static_cast<std::size_t>(c)];
  }
};

/// Decodes a PNG. Palette images are expanded to RGB, 16-bit samples are
/// reduced to 8 bits, and alpha is dropped. Throws DataError on failure.
RawImage read_png(const std::filesystem::path& path);

/// Writes an 8-bit gray or RGB PNG. Throws StorageError on failure.
void write_png(const RawImage& image, const std::filesystem::path& path);

/// Converts a [3,H,W] tensor in [0,1] to RGB8 (round to nearest).
RawImage to_raw(const Tensor& image);

struct PreprocessConfig {
  int target_size = 64;
  double rotation_range_deg = 90.0;
  bool rotate_train = true;
  bool rotate_eval = false;

  /// Throws ConfigError unless target_size is a positive multiple of 8.
  void validate() const;
};

/// Bilinear resize to target_size x target_size, then divide by 255.
/// Throws DataError for non-RGB input.
Tensor preprocess(const RawImage& image, const PreprocessConfig& config);

/// Rotates every channel of a [C,H,W] image by the same angle (degrees,
/// counter-clockwise on screen) about the image center. Bilinear sampling;
/// samples outside the frame replicate the nearest edge pixel.
Tensor rotate(const Tensor& image, double angle_deg);

/// rotate() with an angle drawn uniformly from [-range, +range].
Tensor random_rotation(const Tensor& image, SplitMix64& rng, double range_deg = 90.0);

}  // namespace signbench

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "signbench/geometry.hpp"
#include "signbench/tensor.hpp"

namespace signbench {

enum class AttackKind { tape, graffiti, illumination };

std::string_view to_string(AttackKind kind);
/// Throws ConfigError for unknown names.
AttackKind parse_attack_kind(std::string_view name);

/// One physical overlay attack instance.
struct AttackSpec {
  AttackKind kind = AttackKind::tape;
  std::uint64_t seed = 0;
  /// Target fraction of region pixels altered, in [0, 0.5].
  double coverage = 0.0;
  /// Region the attack may touch; nullopt means the whole image.
  std::optional<PixelRect> region;
  /// Peak glare for illumination, in [0, 1]. Unused by tape and graffiti.
  double intensity = 0.6;

  friend bool operator==(const AttackSpec&, const AttackSpec&) = default;
};

struct AttackReport {
  long pixels_altered = 0;
  /// pixels_altered / region area
  double achieved_coverage = 0.0;
  /// Every sampled parameter, in draw order.
  std::vector<std::pair<std::string, double>> params_drawn;
};

struct AttackOutput {
  Tensor image;
  AttackReport report;
};

// All generators take an image [3,H,W] with values in [0,1], are pure
// functions of (image, spec), only touch pixels inside spec.region, and clamp
// their output to [0,1]. A region smaller than 16 pixels is rejected.

/// 1-3 light-gray rotated strips, each 10-20% of the region's shorter side
/// wide, grown until the target coverage is reached.
AttackOutput apply_tape(const Tensor& image, const AttackSpec& spec);

/// 1-4 quadratic Bezier strokes rasterized by stamping discs, near-black or
/// a saturated hue; thickness 3-8% of the shorter side.
AttackOutput apply_graffiti(const Tensor& image, const AttackSpec& spec);

/// Axis-aligned elliptical glare: pixel += intensity * (1 - r^2) inside the
/// ellipse, r the normalized elliptical radius. Ellipse area = coverage * region.
AttackOutput apply_illumination(const Tensor& image, const AttackSpec& spec);

/// Dispatches on spec.kind.
AttackOutput apply_attack(const Tensor& image, const AttackSpec& spec);

}  // namespace signbench

#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace signbench {

enum class LabelDomain { signs, shapes };

std::string_view to_string(LabelDomain domain);
LabelDomain parse_domain(std::string_view name);

/// A class in one of the two 4-class label sets. Indices line up across the
/// sets: octagon<->stop, circle<->speed_limit, triangle<->crosswalk,
/// square<->traffic_light.
struct ClassLabel {
  LabelDomain domain = LabelDomain::signs;
  int index = 0;

  std::string_view name() const;
  friend bool operator==(const ClassLabel&, const ClassLabel&) = default;
};

inline constexpr std::array<std::string_view, 4> kSignNames{"stop", "speed_limit", "crosswalk", "traffic_light"};
inline constexpr std::array<std::string_view, 4> kShapeNames{"octagon", "circle", "triangle", "square"};

/// Canonical names plus the spellings used by common public annotation sets
/// ("speedlimit", "trafficlight", ...). Case-insensitive.
std::optional<ClassLabel> parse_class_label(std::string_view name);

/// Shape -> sign; identity on signs.
ClassLabel to_sign(ClassLabel label);
/// Sign -> shape; identity on shapes.
ClassLabel to_shape(ClassLabel label);

}  // namespace signbench

#include "signbench/labels.hpp"

#include <algorithm>
#include <cctype>
#include <fmt/format.h>
#include <string>

#include "signbench/error.hpp"

namespace signbench {

std::string_view to_string(LabelDomain domain) { return domain == LabelDomain::signs ? "signs" : "shapes"; }

LabelDomain parse_domain(std::string_view name) {
  if (name == "signs") return LabelDomain::signs;
  if (name == "shapes") return LabelDomain::shapes;
  throw ConfigError(fmt::format("unknown dataset kind '{}' (expected signs or shapes)", name));
}

std::string_view ClassLabel::name() const {
  const auto& names = domain == LabelDomain::signs ? kSignNames : kShapeNames;
  return names.at(static_cast<std::size_t>(index));
}

std::optional<ClassLabel> parse_class_label(std::string_view name) {
  std::string key;
  for (char c : name) {
    if (c == ' ' || c == '-' || c == '_') continue;
    key += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  struct Alias {
    std::string_view key;
    LabelDomain domain;
    int index;
  };
  static constexpr Alias kAliases[] = {
      {"stop", LabelDomain::signs, 0},          {"stopsign", LabelDomain::signs, 0},
      {"speedlimit", LabelDomain::signs, 1},    {"speedlimitsign", LabelDomain::signs, 1},
      {"crosswalk", LabelDomain::signs, 2},     {"crosswalksign", LabelDomain::signs, 2},
      {"trafficlight", LabelDomain::signs, 3},  {"octagon", LabelDomain::shapes, 0},
      {"circle", LabelDomain::shapes, 1},       {"triangle", LabelDomain::shapes, 2},
      {"square", LabelDomain::shapes, 3},
  };
  for (const auto& alias : kAliases) {
    if (alias.key == key) return ClassLabel{alias.domain, alias.index};
  }
  return std::nullopt;
}

ClassLabel to_sign(ClassLabel label) { return {LabelDomain::signs, label.index}; }
ClassLabel to_shape(ClassLabel label) { return {LabelDomain::shapes, label.index}; }

}  // namespace signbench

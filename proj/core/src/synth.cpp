#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <functional>
#include <numbers>

#include "signbench/dataset.hpp"
#include "signbench/error.hpp"

namespace signbench {

namespace fs = std::filesystem;

namespace {

struct Color {
  double r, g, b;
};

struct Layer {
  std::function<bool(double, double)> inside;
  Color color;
};

// Regular n-gon with circumradius `radius`, rotated by `phase`.
std::function<bool(double, double)> polygon(double cx, double cy, double radius, int sides, double phase) {
  const double apothem = radius * std::cos(std::numbers::pi / sides);
  return [=](double x, double y) {
    const double dx = x - cx, dy = y - cy;
    for (int k = 0; k < sides; ++k) {
      const double a = phase + (2 * k + 1) * std::numbers::pi / sides;
      if (dx * std::cos(a) + dy * std::sin(a) > apothem) return false;
    }
    return true;
  };
}

std::function<bool(double, double)> disc(double cx, double cy, double radius) {
  return [=](double x, double y) { return (x - cx) * (x - cx) + (y - cy) * (y - cy) <= radius * radius; };
}

std::function<bool(double, double)> box(double cx, double cy, double half_w, double half_h) {
  return [=](double x, double y) { return std::abs(x - cx) <= half_w && std::abs(y - cy) <= half_h; };
}

Color jitter(Color c, SplitMix64& rng, double amount) {
  return {std::clamp(c.r + rng.uniform(-amount, amount), 0.0, 1.0),
          std::clamp(c.g + rng.uniform(-amount, amount), 0.0, 1.0),
          std::clamp(c.b + rng.uniform(-amount, amount), 0.0, 1.0)};
}

Color hsv(double h, double s, double v) {
  const double h6 = std::fmod(h, 1.0) * 6.0;
  const int sector = static_cast<int>(h6) % 6;
  const double f = h6 - std::floor(h6);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (sector) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

// Layers of a road-sign archetype; layer 0 is the sign's silhouette.
std::vector<Layer> sign_layers(int cls, double cx, double cy, double r, SplitMix64& rng) {
  const double tilt = rng.uniform(-0.15, 0.15);
  const Color white = jitter({0.95, 0.95, 0.95}, rng, 0.04);
  const Color dark = jitter({0.08, 0.08, 0.08}, rng, 0.04);
  switch (cls) {
    case 0: {  // stop: red octagon with white rim and legend bar
      const Color red = jitter({0.80, 0.08, 0.10}, rng, 0.05);
      return {{polygon(cx, cy, r, 8, std::numbers::pi / 8 + tilt), white},
              {polygon(cx, cy, 0.88 * r, 8, std::numbers::pi / 8 + tilt), red},
              {box(cx, cy, 0.55 * r, 0.14 * r), white}};
    }
    case 1: {  // speed limit: white disc with red ring and two digits
      const Color red = jitter({0.80, 0.08, 0.10}, rng, 0.05);
      return {{disc(cx, cy, r), red},
              {disc(cx, cy, 0.76 * r), white},
              {box(cx - 0.22 * r, cy, 0.13 * r, 0.30 * r), dark},
              {box(cx + 0.22 * r, cy, 0.13 * r, 0.30 * r), dark},
              {box(cx - 0.22 * r, cy, 0.05 * r, 0.20 * r), white},
              {box(cx + 0.22 * r, cy, 0.05 * r, 0.20 * r), white}};
    }
    case 2: {  // crosswalk: yellow triangle with dark border and pedestrian
      const Color yellow = jitter({0.96, 0.80, 0.10}, rng, 0.05);
      const double phase = -std::numbers::pi / 2 + tilt;
      return {{polygon(cx, cy, r, 3, phase), dark},
              {polygon(cx, cy, 0.80 * r, 3, phase), yellow},
              {disc(cx, cy - 0.05 * r, 0.09 * r), dark},
              {box(cx, cy + 0.20 * r, 0.06 * r, 0.17 * r), dark}};
    }
    default: {  // traffic light: dark square with red/amber/green lamps
      const double half = r / std::numbers::sqrt2;
      return {{polygon(cx, cy, r, 4, std::numbers::pi / 4 + 0.3 * tilt), dark},
              {disc(cx, cy - 0.58 * half, 0.22 * half), jitter({0.90, 0.10, 0.10}, rng, 0.05)},
              {disc(cx, cy, 0.22 * half), jitter({0.95, 0.75, 0.10}, rng, 0.05)},
              {disc(cx, cy + 0.58 * half, 0.22 * half), jitter({0.10, 0.80, 0.25}, rng, 0.05)}};
    }
  }
}

std::vector<Layer> shape_layers(int cls, double cx, double cy, double r, SplitMix64& rng) {
  const Color fill = hsv(rng.uniform(), rng.uniform(0.5, 1.0), rng.uniform(0.4, 0.95));
  switch (cls) {
    case 0:
      return {{polygon(cx, cy, r, 8, rng.uniform(0.0, std::numbers::pi / 4)), fill}};
    case 1:
      return {{disc(cx, cy, r), fill}};
    case 2:
      return {{polygon(cx, cy, r, 3, rng.uniform(0.0, 2 * std::numbers::pi / 3)), fill}};
    default:
      return {{polygon(cx, cy, r, 4, rng.uniform(0.0, std::numbers::pi / 2)), fill}};
  }
}

struct Rendered {
  RawImage image;
  PixelRect bbox;
};

Rendered render(LabelDomain kind, int cls, int size, SplitMix64& rng) {
  const double s = size;
  Color base, tint;
  if (kind == LabelDomain::signs) {
    base = {rng.uniform(0.15, 0.75), rng.uniform(0.15, 0.75), rng.uniform(0.15, 0.75)};
    tint = {rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1)};
  } else {
    const double v = rng.uniform(0.85, 1.0);
    base = {v, v, v};
    tint = {0, 0, 0};
  }
  const double noise = kind == LabelDomain::signs ? 0.06 : 0.03;
  const double radius = s * rng.uniform(0.25, 0.40);
  const double cx = rng.uniform(radius + 1, s - radius - 1);
  const double cy = rng.uniform(radius + 1, s - radius - 1);
  const auto layers = kind == LabelDomain::signs ? sign_layers(cls, cx, cy, radius, rng)
                                                 : shape_layers(cls, cx, cy, radius, rng);

  Rendered out;
  out.image = {size, size, 3, std::vector<std::uint8_t>(static_cast<std::size_t>(size * size * 3))};
  int min_x = size, min_y = size, max_x = -1, max_y = -1;
  constexpr int kSuper = 3;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double shade = (y / s - 0.5);
      Color bg{base.r + tint.r * shade + rng.uniform(-noise, noise), base.g + tint.g * shade + rng.uniform(-noise, noise),
               base.b + tint.b * shade + rng.uniform(-noise, noise)};
      Color acc{0, 0, 0};
      int silhouette = 0;
      for (int sy = 0; sy < kSuper; ++sy) {
        for (int sx = 0; sx < kSuper; ++sx) {
          const double px = x + (sx + 0.5) / kSuper, py = y + (sy + 0.5) / kSuper;
          Color c = bg;
          for (std::size_t l = 0; l < layers.size(); ++l) {
            if (layers[l].inside(px, py)) {
              c = layers[l].color;
              if (l == 0) ++silhouette;
            }
          }
          acc.r += c.r;
          acc.g += c.g;
          acc.b += c.b;
        }
      }
      constexpr double inv = 1.0 / (kSuper * kSuper);
      const std::size_t o = (static_cast<std::size_t>(y) * static_cast<std::size_t>(size) + static_cast<std::size_t>(x)) * 3;
      out.image.pixels[o + 0] = static_cast<std::uint8_t>(std::lround(std::clamp(acc.r * inv, 0.0, 1.0) * 255));
      out.image.pixels[o + 1] = static_cast<std::uint8_t>(std::lround(std::clamp(acc.g * inv, 0.0, 1.0) * 255));
      out.image.pixels[o + 2] = static_cast<std::uint8_t>(std::lround(std::clamp(acc.b * inv, 0.0, 1.0) * 255));
      if (2 * silhouette >= kSuper * kSuper) {
        min_x = std::min(min_x, x);
        min_y = std::min(min_y, y);
        max_x = std::max(max_x, x);
        max_y = std::max(max_y, y);
      }
    }
  }
  out.bbox = {min_x, min_y, max_x + 1, max_y + 1};
  return out;
}

}  // namespace

DatasetManifest synth_generate(const fs::path& out_dir, const SynthOptions& options) {
  if (options.per_class < 1) throw ConfigError("per-class count must be at least 1");
  if (options.image_size < 16) throw ConfigError("synthetic image size must be at least 16");
  fs::create_directories(out_dir / "images");
  fs::create_directories(out_dir / "annotations");

  DatasetManifest manifest;
  manifest.domain = options.kind;
  manifest.root = out_dir;
  SplitMix64 rng(options.seed);
  for (int cls = 0; cls < 4; ++cls) {
    const ClassLabel label{options.kind, cls};
    for (int i = 0; i < options.per_class; ++i) {
      SplitMix64 sample_rng = rng.split();
      const Rendered r = render(options.kind, cls, options.image_size, sample_rng);
      const std::string stem = fmt::format("{}_{:04d}", label.name(), i);
      const std::string filename = stem + ".png";
      write_png(r.image, out_dir / "images" / filename);
      write_annotation(out_dir / "annotations" / (stem + ".xml"), filename, options.image_size, options.image_size,
                       label.name(), r.bbox);
      manifest.samples.push_back({stem, fs::path("images") / filename, label, r.bbox, options.image_size,
                                  options.image_size});
    }
  }
  std::sort(manifest.samples.begin(), manifest.samples.end(),
            [](const auto& a, const auto& b) { return a.source_id < b.source_id; });
  return manifest;
}

}  // namespace signbench

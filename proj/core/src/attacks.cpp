#include "signbench/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numbers>

#include "signbench/error.hpp"
#include "signbench/rng.hpp"

namespace signbench {

std::string_view to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::tape:
      return "tape";
    case AttackKind::graffiti:
      return "graffiti";
    case AttackKind::illumination:
      return "illumination";
  }
  return "unknown";
}

AttackKind parse_attack_kind(std::string_view name) {
  if (name == "tape") return AttackKind::tape;
  if (name == "graffiti") return AttackKind::graffiti;
  if (name == "illumination") return AttackKind::illumination;
  throw ConfigError(fmt::format("unknown attack kind '{}'", name));
}

namespace {

constexpr long kMinRegionArea = 16;
constexpr double kMaxCoverage = 0.5;

struct Rgb {
  double r, g, b;
};

// Working state shared by the three generators.
class Canvas {
 public:
  Canvas(const Tensor& image, const AttackSpec& spec) : out_(image) {
    require_rank(image, 3, "attack image");
    if (image.dim(0) != 3) throw ShapeError(fmt::format("attack image must have 3 channels, got {}", image.dim(0)));
    height_ = static_cast<int>(image.dim(1));
    width_ = static_cast<int>(image.dim(2));
    if (!(spec.coverage >= 0.0 && spec.coverage <= kMaxCoverage)) {
      throw ConfigError(fmt::format("attack coverage {} outside [0, 0.5]", spec.coverage));
    }
    if (!(spec.intensity >= 0.0 && spec.intensity <= 1.0)) {
      throw ConfigError(fmt::format("attack intensity {} outside [0, 1]", spec.intensity));
    }
    region_ = spec.region.value_or(PixelRect{0, 0, width_, height_});
    if (!region_.within(width_, height_)) {
      throw ConfigError(fmt::format("attack region [{},{})x[{},{}) outside {}x{} image", region_.x0, region_.x1,
                                    region_.y0, region_.y1, width_, height_));
    }
    if (region_.area() < kMinRegionArea) {
      throw ConfigError(fmt::format("attack region area {} below minimum {}", region_.area(), kMinRegionArea));
    }
    mask_.assign(static_cast<std::size_t>(region_.area()), 0);
    const double cap = std::floor(kMaxCoverage * static_cast<double>(region_.area()));
    target_ = std::min(static_cast<long>(std::lround(spec.coverage * static_cast<double>(region_.area()))),
                       static_cast<long>(cap));
  }

  const PixelRect& region() const { return region_; }
  long target() const { return target_; }
  long marked() const { return marked_; }
  double shorter_side() const { return std::min(region_.width(), region_.height()); }

  std::size_t local(int x, int y) const {
    return static_cast<std::size_t>(y - region_.y0) * static_cast<std::size_t>(region_.width()) +
           static_cast<std::size_t>(x - region_.x0);
  }
  bool is_marked(int x, int y) const { return mask_[local(x, y)] != 0; }

  void paint(int x, int y, Rgb color) {
    mask_[local(x, y)] = 1;
    ++marked_;
    set(0, x, y, color.r);
    set(1, x, y, color.g);
    set(2, x, y, color.b);
  }

  double get(int c, int x, int y) const { return out_[index(c, x, y)]; }
  void set(int c, int x, int y, double v) { out_[index(c, x, y)] = std::clamp(v, 0.0, 1.0); }

  void reset(const Tensor& image) {
    out_ = image;
    std::fill(mask_.begin(), mask_.end(), 0);
    marked_ = 0;
  }

  AttackOutput finish(const Tensor& original, std::vector<std::pair<std::string, double>> params) && {
    AttackReport report;
    for (int y = region_.y0; y < region_.y1; ++y) {
      for (int x = region_.x0; x < region_.x1; ++x) {
        for (int c = 0; c < 3; ++c) {
          if (out_[index(c, x, y)] != original[index(c, x, y)]) {
            ++report.pixels_altered;
            break;
          }
        }
      }
    }
    report.achieved_coverage = static_cast<double>(report.pixels_altered) / static_cast<double>(region_.area());
    report.params_drawn = std::move(params);
    return {std::move(out_), std::move(report)};
  }

 private:
  std::size_t index(int c, int x, int y) const {
    return (static_cast<std::size_t>(c) * static_cast<std::size_t>(height_) + static_cast<std::size_t>(y)) *
               static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  Tensor out_;
  int height_ = 0;
  int width_ = 0;
  PixelRect region_;
  std::vector<unsigned char> mask_;
  long target_ = 0;
  long marked_ = 0;
};

struct Vec2 {
  double x, y;
};

Rgb hsv_to_rgb(double hue, double sat, double val) {
  const double h6 = hue * 6.0;
  const int sector = static_cast<int>(std::floor(h6)) % 6;
  const double f = h6 - std::floor(h6);
  const double p = val * (1 - sat), q = val * (1 - sat * f), t = val * (1 - sat * (1 - f));
  switch (sector) {
    case 0:
      return {val, t, p};
    case 1:
      return {q, val, p};
    case 2:
      return {p, val, t};
    case 3:
      return {p, q, val};
    case 4:
      return {t, p, val};
    default:
      return {val, p, q};
  }
}

// Strips are laid side by side: slot 0 on the centerline, then alternating
// sides one strip-width apart.
double slot_offset(int slot, double spacing) {
  if (slot == 0) return 0.0;
  const int step = (slot + 1) / 2;
  return (slot % 2 == 1 ? 1.0 : -1.0) * step * spacing;
}

struct StripGeometry {
  double angle;
  double along_jitter;
  double gray;
};

}  // namespace

AttackOutput apply_tape(const Tensor& image, const AttackSpec& spec) {
  Canvas canvas(image, spec);
  if (canvas.target() == 0) return std::move(canvas).finish(image, {});

  SplitMix64 rng(spec.seed);
  const PixelRect& r = canvas.region();
  const int planned = static_cast<int>(rng.between(1, 3));
  const double width_frac = rng.uniform(0.10, 0.20);
  const double base_angle = rng.uniform(-std::numbers::pi / 2, std::numbers::pi / 2);
  const double cx = 0.5 * (r.x0 + r.x1) + rng.uniform(-0.1, 0.1) * r.width();
  const double cy = 0.5 * (r.y0 + r.y1) + rng.uniform(-0.1, 0.1) * r.height();
  std::vector<StripGeometry> strips;
  for (int i = 0; i < 3; ++i) {
    strips.push_back({base_angle + rng.uniform(-0.15, 0.15), rng.uniform(-0.2, 0.2) * canvas.shorter_side(),
                      0.82 + rng.uniform(-0.05, 0.05)});
  }

  // Strips too narrow to reach the target (high coverage on a clipped band)
  // are widened in 25% steps; the recorded width is the one actually used.
  double width = width_frac * canvas.shorter_side();
  int used = planned;
  for (int attempt = 0; attempt < 12; ++attempt) {
    canvas.reset(image);
    long remaining = canvas.target();
    used = planned;
    for (int s = 0; s < 3 && remaining > 0; ++s) {
      if (s >= planned) used = s + 1;
      const int strips_left = std::max(1, planned - s);
      const long quota = (remaining + strips_left - 1) / strips_left;
      const auto& g = strips[static_cast<std::size_t>(s)];
      const Vec2 dir{std::cos(g.angle), std::sin(g.angle)};
      const Vec2 normal{-dir.y, dir.x};
      const double offset = slot_offset(s, 1.05 * width);
      const Vec2 center{cx + normal.x * offset + dir.x * g.along_jitter, cy + normal.y * offset + dir.y * g.along_jitter};

      std::vector<std::pair<double, std::pair<int, int>>> band;
      for (int y = r.y0; y < r.y1; ++y) {
        for (int x = r.x0; x < r.x1; ++x) {
          if (canvas.is_marked(x, y)) continue;
          const double px = x + 0.5 - center.x, py = y + 0.5 - center.y;
          if (std::abs(px * normal.x + py * normal.y) > 0.5 * width) continue;
          band.push_back({std::abs(px * dir.x + py * dir.y), {x, y}});
        }
      }
      std::stable_sort(band.begin(), band.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      const long take = std::min<long>(quota, static_cast<long>(band.size()));
      for (long i = 0; i < take; ++i) {
        const auto [x, y] = band[static_cast<std::size_t>(i)].second;
        canvas.paint(x, y, {g.gray, g.gray, g.gray});
      }
      remaining -= take;
    }
    if (remaining == 0) break;
    width *= 1.25;
  }

  std::vector<std::pair<std::string, double>> params{
      {"strips", used}, {"width_px", width}, {"base_angle", base_angle}, {"center_x", cx}, {"center_y", cy}};
  for (int s = 0; s < used; ++s) {
    params.emplace_back(fmt::format("strip{}_angle", s), strips[static_cast<std::size_t>(s)].angle);
    params.emplace_back(fmt::format("strip{}_gray", s), strips[static_cast<std::size_t>(s)].gray);
  }
  return std::move(canvas).finish(image, std::move(params));
}

namespace {

struct Stroke {
  Vec2 p0, p1, p2;
  Rgb color;
  bool dark;
};

Stroke draw_stroke(SplitMix64& rng, const PixelRect& r) {
  auto point = [&] { return Vec2{rng.uniform(r.x0, r.x1), rng.uniform(r.y0, r.y1)}; };
  Stroke s{point(), point(), point(), {}, false};
  s.dark = rng.uniform() < 0.5;
  if (s.dark) {
    const double v = rng.uniform(0.0, 0.08);
    s.color = {v, v, v};
  } else {
    s.color = hsv_to_rgb(rng.uniform(), 1.0, rng.uniform(0.85, 1.0));
  }
  return s;
}

Vec2 bezier(const Stroke& s, double t) {
  const double u = 1.0 - t;
  return {u * u * s.p0.x + 2 * u * t * s.p1.x + t * t * s.p2.x, u * u * s.p0.y + 2 * u * t * s.p1.y + t * t * s.p2.y};
}

// Stamps discs along the stroke until `quota` new pixels are painted or the
// curve ends. Returns the number painted.
long stamp_stroke(Canvas& canvas, const Stroke& s, double radius, long quota) {
  const PixelRect& r = canvas.region();
  const double length = std::hypot(s.p1.x - s.p0.x, s.p1.y - s.p0.y) + std::hypot(s.p2.x - s.p1.x, s.p2.y - s.p1.y);
  const int steps = std::max(2, static_cast<int>(std::ceil(length / std::max(0.25, 0.5 * radius))));
  long painted = 0;
  for (int i = 0; i <= steps && painted < quota; ++i) {
    const Vec2 c = bezier(s, static_cast<double>(i) / steps);
    const int ylo = std::max(r.y0, static_cast<int>(std::floor(c.y - radius)));
    const int yhi = std::min(r.y1 - 1, static_cast<int>(std::ceil(c.y + radius)));
    const int xlo = std::max(r.x0, static_cast<int>(std::floor(c.x - radius)));
    const int xhi = std::min(r.x1 - 1, static_cast<int>(std::ceil(c.x + radius)));
    for (int y = ylo; y <= yhi && painted < quota; ++y) {
      for (int x = xlo; x <= xhi && painted < quota; ++x) {
        if (canvas.is_marked(x, y)) continue;
        const double dx = x + 0.5 - c.x, dy = y + 0.5 - c.y;
        if (dx * dx + dy * dy > radius * radius) continue;
        canvas.paint(x, y, s.color);
        ++painted;
      }
    }
  }
  return painted;
}

}  // namespace

AttackOutput apply_graffiti(const Tensor& image, const AttackSpec& spec) {
  Canvas canvas(image, spec);
  if (canvas.target() == 0) return std::move(canvas).finish(image, {});

  SplitMix64 rng(spec.seed);
  const PixelRect& r = canvas.region();
  const int planned = static_cast<int>(rng.between(1, 4));
  const double thickness_frac = rng.uniform(0.03, 0.08);
  std::vector<Stroke> strokes;
  for (int i = 0; i < 4; ++i) strokes.push_back(draw_stroke(rng, r));

  // Thin strokes cannot reach high coverage; thickness grows by 30% per
  // attempt until the target fits.
  double thickness = std::max(1.0, thickness_frac * canvas.shorter_side());
  int used = planned;
  for (int attempt = 0; attempt < 16; ++attempt) {
    canvas.reset(image);
    long remaining = canvas.target();
    used = planned;
    for (int s = 0; s < 4 && remaining > 0; ++s) {
      if (s >= planned) used = s + 1;
      const int strokes_left = std::max(1, planned - s);
      const long quota = (remaining + strokes_left - 1) / strokes_left;
      remaining -= stamp_stroke(canvas, strokes[static_cast<std::size_t>(s)], 0.5 * thickness, quota);
    }
    if (remaining == 0) break;
    thickness *= 1.3;
  }

  std::vector<std::pair<std::string, double>> params{{"strokes", used}, {"thickness_px", thickness}};
  for (int s = 0; s < used; ++s) {
    const auto& st = strokes[static_cast<std::size_t>(s)];
    params.emplace_back(fmt::format("stroke{}_x0", s), st.p0.x);
    params.emplace_back(fmt::format("stroke{}_y0", s), st.p0.y);
    params.emplace_back(fmt::format("stroke{}_x1", s), st.p1.x);
    params.emplace_back(fmt::format("stroke{}_y1", s), st.p1.y);
    params.emplace_back(fmt::format("stroke{}_x2", s), st.p2.x);
    params.emplace_back(fmt::format("stroke{}_y2", s), st.p2.y);
    params.emplace_back(fmt::format("stroke{}_dark", s), st.dark ? 1.0 : 0.0);
  }
  return std::move(canvas).finish(image, std::move(params));
}

AttackOutput apply_illumination(const Tensor& image, const AttackSpec& spec) {
  Canvas canvas(image, spec);
  if (canvas.target() == 0 || spec.intensity == 0.0) return std::move(canvas).finish(image, {});

  SplitMix64 rng(spec.seed);
  const PixelRect& r = canvas.region();
  const double patch_area = static_cast<double>(canvas.target());
  const double half_w = 0.5 * r.width(), half_h = 0.5 * r.height();
  double ratio = rng.uniform(0.6, 1.0);
  if (rng.uniform() < 0.5) ratio = 1.0 / ratio;
  double semi_x = std::sqrt(patch_area / (std::numbers::pi * ratio));
  double semi_y = ratio * semi_x;
  if (semi_x > half_w) {
    semi_x = half_w;
    semi_y = patch_area / (std::numbers::pi * semi_x);
  }
  if (semi_y > half_h) {
    semi_y = half_h;
    semi_x = std::min(half_w, patch_area / (std::numbers::pi * semi_y));
  }
  // Center snapped to a pixel center so the peak pixel gets exactly +intensity.
  auto place = [&rng](int lo, int hi, double semi) {
    const double min_c = lo + semi, max_c = hi - semi;
    const double c = min_c < max_c ? rng.uniform(min_c, max_c) : 0.5 * (lo + hi);
    return std::clamp(std::floor(c) + 0.5, lo + 0.5, hi - 0.5);
  };
  const double cx = place(r.x0, r.x1, semi_x);
  const double cy = place(r.y0, r.y1, semi_y);

  auto inside_count = [&](double ax, double ay) {
    long n = 0;
    for (int y = r.y0; y < r.y1; ++y) {
      for (int x = r.x0; x < r.x1; ++x) {
        const double u = (x + 0.5 - cx) / ax, v = (y + 0.5 - cy) / ay;
        if (u * u + v * v < 1.0) ++n;
      }
    }
    return n;
  };
  const long cap = static_cast<long>(std::floor(kMaxCoverage * static_cast<double>(r.area())));
  while (inside_count(semi_x, semi_y) > cap) {
    semi_x *= 0.99;
    semi_y *= 0.99;
  }

  for (int y = r.y0; y < r.y1; ++y) {
    for (int x = r.x0; x < r.x1; ++x) {
      const double u = (x + 0.5 - cx) / semi_x, v = (y + 0.5 - cy) / semi_y;
      const double r2 = u * u + v * v;
      if (r2 >= 1.0) continue;
      const double boost = spec.intensity * (1.0 - r2);
      for (int c = 0; c < 3; ++c) canvas.set(c, x, y, canvas.get(c, x, y) + boost);
    }
  }
  return std::move(canvas).finish(image, {{"center_x", cx},
                                          {"center_y", cy},
                                          {"semi_x", semi_x},
                                          {"semi_y", semi_y},
                                          {"intensity", spec.intensity}});
}

AttackOutput apply_attack(const Tensor& image, const AttackSpec& spec) {
  switch (spec.kind) {
    case AttackKind::tape:
      return apply_tape(image, spec);
    case AttackKind::graffiti:
      return apply_graffiti(image, spec);
    case AttackKind::illumination:
      return apply_illumination(image, spec);
  }
  throw ConfigError("unknown attack kind");
}

}  // namespace signbench

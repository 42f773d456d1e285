#pragma once

// Pixel-diff oracle for the overlay attacks, shared by the unit tests and the
// acceptance binary.

#include <cmath>
#include <string>

#include "oracles.hpp"
#include "signbench/attacks.hpp"

namespace oracle {

struct AttackCase {
  signbench::AttackSpec spec;
  long pixels_changed = 0;       ///< counted here, independently of the report
  long changed_outside = 0;      ///< pixels changed outside spec.region
  bool in_range = true;          ///< every output value in [0, 1]
  bool deterministic = true;     ///< a second call is bit identical
  bool report_consistent = true; ///< report agrees with the pixel diff
  double achieved = 0.0;
};

inline AttackCase run_attack_case(const signbench::Tensor& image, const signbench::AttackSpec& spec) {
  using namespace signbench;
  AttackCase c;
  c.spec = spec;
  const AttackOutput a = apply_attack(image, spec);
  const AttackOutput b = apply_attack(image, spec);
  c.deterministic = a.image == b.image;
  const auto h = static_cast<int>(image.dim(1)), w = static_cast<int>(image.dim(2));
  const PixelRect region = spec.region.value_or(PixelRect{0, 0, w, h});
  for (double v : a.image.data()) c.in_range = c.in_range && v >= 0.0 && v <= 1.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool changed = false;
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const std::size_t i = (ch * static_cast<std::size_t>(h) + static_cast<std::size_t>(y)) * static_cast<std::size_t>(w) +
                              static_cast<std::size_t>(x);
        changed = changed || a.image[i] != image[i];
      }
      if (!changed) continue;
      if (region.contains(x, y)) {
        ++c.pixels_changed;
      } else {
        ++c.changed_outside;
      }
    }
  }
  c.achieved = static_cast<double>(c.pixels_changed) / static_cast<double>(region.area());
  c.report_consistent = a.report.pixels_altered == c.pixels_changed &&
                        std::abs(a.report.achieved_coverage - c.achieved) < 1e-12 && !a.report.params_drawn.empty();
  return c;
}

/// Random 64x64 noise image, random coverage in [0.05, 0.5], and (every other
/// case) a random sub-region instead of the whole frame.
inline AttackCase random_attack_case(signbench::AttackKind kind, SplitMix64& rng) {
  using namespace signbench;
  const Tensor image = random_tensor({3, 64, 64}, rng, 0.0, 1.0);
  AttackSpec spec;
  spec.kind = kind;
  spec.seed = rng.next();
  spec.coverage = rng.uniform(0.05, 0.5);
  spec.intensity = rng.uniform(0.3, 0.9);
  if (rng.next() & 1) {
    const int x0 = static_cast<int>(rng.below(24)), y0 = static_cast<int>(rng.below(24));
    const int x1 = x0 + 24 + static_cast<int>(rng.below(static_cast<std::uint64_t>(64 - x0 - 23)));
    const int y1 = y0 + 24 + static_cast<int>(rng.below(static_cast<std::uint64_t>(64 - y0 - 23)));
    spec.region = PixelRect{x0, y0, x1, y1};
  }
  return run_attack_case(image, spec);
}

inline double coverage_tolerance(signbench::AttackKind kind) {
  return kind == signbench::AttackKind::tape ? 0.03 : 0.05;
}

}  // namespace oracle

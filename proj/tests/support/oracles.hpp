#pragma once

// Independent reference implementations used as test oracles. These are
// deliberately naive: direct formula evaluation with explicit bounds checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "signbench/layers.hpp"
#include "signbench/rng.hpp"
#include "signbench/tensor.hpp"

namespace oracle {

using signbench::Shape;
using signbench::SplitMix64;
using signbench::Tensor;

inline Tensor random_tensor(Shape shape, SplitMix64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

/// Values bounded away from zero (so relu has no kink within +-eps).
inline Tensor away_from_zero(Shape shape, SplitMix64& rng, double gap = 0.05) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) {
    const double m = rng.uniform(gap, 1.0);
    v = rng.next() & 1 ? m : -m;
  }
  return t;
}

/// Distinct values on a coarse grid (so every pooling window has a unique
/// maximum that eps-perturbations cannot change).
inline Tensor distinct_values(Shape shape, SplitMix64& rng) {
  Tensor t(std::move(shape));
  std::vector<double> grid(t.size());
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = 0.01 * static_cast<double>(i) - 0.5;
  signbench::shuffle(std::span<double>(grid), rng);
  std::copy(grid.begin(), grid.end(), t.data().begin());
  return t;
}

/// out[n,co,y,x] = b[co] + sum_{ci,dy,dx} w[co,ci,dy,dx] * in[n,ci,y+dy-1,x+dx-1] (zero outside).
inline Tensor naive_conv(const Tensor& in, const Tensor& w, const Tensor& b) {
  const auto N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3), K = w.dim(0);
  Tensor out({N, K, H, W});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
          double s = b[k];
          for (std::size_t c = 0; c < C; ++c)
            for (int dy = 0; dy < 3; ++dy)
              for (int dx = 0; dx < 3; ++dx) {
                const long yy = static_cast<long>(y) + dy - 1, xx = static_cast<long>(x) + dx - 1;
                if (yy < 0 || xx < 0 || yy >= static_cast<long>(H) || xx >= static_cast<long>(W)) continue;
                s += w.at({k, c, static_cast<std::size_t>(dy), static_cast<std::size_t>(dx)}) *
                     in.at({n, c, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx)});
              }
          out.at({n, k, y, x}) = s;
        }
  return out;
}

inline Tensor naive_maxpool(const Tensor& in) {
  const auto N = in.dim(0), C = in.dim(1), H = in.dim(2) / 2, W = in.dim(3) / 2;
  Tensor out({N, C, H, W});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
          double m = -INFINITY;
          for (std::size_t dy = 0; dy < 2; ++dy)
            for (std::size_t dx = 0; dx < 2; ++dx) m = std::max(m, in.at({n, c, 2 * y + dy, 2 * x + dx}));
          out.at({n, c, y, x}) = m;
        }
  return out;
}

inline Tensor naive_dense(const Tensor& in, const Tensor& w, const Tensor& b) {
  const auto N = in.dim(0), K = in.dim(1), M = w.dim(1);
  Tensor out({N, M});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t m = 0; m < M; ++m) {
      double s = b[m];
      for (std::size_t k = 0; k < K; ++k) s += in.at({n, k}) * w.at({k, m});
      out.at({n, m}) = s;
    }
  return out;
}

/// Mean cross-entropy computed as -log(exp(z_y) / sum exp(z)) in long double.
inline double naive_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  long double total = 0;
  for (std::size_t n = 0; n < logits.dim(0); ++n) {
    long double denom = 0;
    for (std::size_t c = 0; c < logits.dim(1); ++c) denom += std::exp(static_cast<long double>(logits.at({n, c})));
    total += -std::log(std::exp(static_cast<long double>(logits.at({n, static_cast<std::size_t>(labels[n])}))) / denom);
  }
  return static_cast<double>(total / static_cast<long double>(logits.dim(0)));
}

inline double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Relative error used by every gradient check: |a - n| / max(|a|, |n|, floor).
inline double relative_error(double analytic, double numeric, double floor = 1e-4) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Worst relative error between `analytic` and central differences of `loss`
/// with respect to `param` (perturbed in place, restored afterwards).
inline double check_gradient(Tensor& param, const Tensor& analytic, const std::function<double()>& loss,
                             double eps = 1e-5) {
  double worst = 0.0;
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double saved = param[i];
    param[i] = saved + eps;
    const double plus = loss();
    param[i] = saved - eps;
    const double minus = loss();
    param[i] = saved;
    worst = std::max(worst, relative_error(analytic[i], (plus - minus) / (2 * eps)));
  }
  return worst;
}

struct GradientCase {
  std::string layer;
  std::string shape;
  double worst = 0.0;
};

/// One randomized finite-difference check per layer kind for `cases` shapes.
inline std::vector<GradientCase> gradient_suite(int cases, std::uint64_t seed) {
  using namespace signbench;
  std::vector<GradientCase> out;
  SplitMix64 rng(seed);
  for (int c = 0; c < cases; ++c) {
    const std::size_t n = 1 + rng.below(3), ci = 1 + rng.below(4), co = 1 + rng.below(4);
    const std::size_t h = 1 + rng.below(7), w = 1 + rng.below(7);
    const std::string shape = to_string(Shape{n, ci, h, w}) + "->" + std::to_string(co);

    {  // conv2d
      Tensor x = random_tensor({n, ci, h, w}, rng), k = random_tensor({co, ci, 3, 3}, rng), b = random_tensor({co}, rng);
      const Tensor up = random_tensor({n, co, h, w}, rng);
      const auto g = conv2d_backward(x, k, up);
      auto loss = [&] { return dot(conv2d_forward(x, k, b), up); };
      double worst = check_gradient(x, g.input, loss);
      worst = std::max(worst, check_gradient(k, g.weights, loss));
      worst = std::max(worst, check_gradient(b, g.bias, loss));
      out.push_back({"conv2d", shape, worst});
    }
    {  // maxpool (even extents)
      const std::size_t ph = 2 * (1 + rng.below(4)), pw = 2 * (1 + rng.below(4));
      Tensor x = distinct_values({n, ci, ph, pw}, rng);
      const auto fwd = maxpool_forward(x);
      const Tensor up = random_tensor(fwd.output.shape(), rng);
      const Tensor g = maxpool_backward(up, fwd.argmax, x.shape());
      auto loss = [&] { return dot(maxpool_forward(x).output, up); };
      out.push_back({"maxpool", to_string(x.shape()), check_gradient(x, g, loss)});
    }
    {  // relu
      Tensor x = away_from_zero({n, ci, h, w}, rng);
      const Tensor up = random_tensor(x.shape(), rng);
      const Tensor g = relu_backward(x, up);
      auto loss = [&] { return dot(relu_forward(x), up); };
      out.push_back({"relu", to_string(x.shape()), check_gradient(x, g, loss)});
    }
    {  // dense
      const std::size_t k_in = 1 + rng.below(12), m = 1 + rng.below(8);
      Tensor x = random_tensor({n, k_in}, rng), wt = random_tensor({k_in, m}, rng), b = random_tensor({m}, rng);
      const Tensor up = random_tensor({n, m}, rng);
      const auto g = dense_backward(x, wt, up);
      auto loss = [&] { return dot(dense_forward(x, wt, b), up); };
      double worst = check_gradient(x, g.input, loss);
      worst = std::max(worst, check_gradient(wt, g.weights, loss));
      worst = std::max(worst, check_gradient(b, g.bias, loss));
      out.push_back({"dense", to_string(x.shape()) + "x" + std::to_string(m), worst});
    }
    {  // softmax cross-entropy
      const std::size_t classes = 2 + rng.below(5);
      Tensor z = random_tensor({n, classes}, rng, -3.0, 3.0);
      std::vector<int> labels(n);
      for (auto& l : labels) l = static_cast<int>(rng.below(classes));
      const Tensor g = softmax_cross_entropy(z, labels).grad_logits;
      auto loss = [&] { return softmax_cross_entropy(z, labels).loss; };
      out.push_back({"softmax_cross_entropy", to_string(z.shape()), check_gradient(z, g, loss)});
    }
  }
  return out;
}

}  // namespace oracle

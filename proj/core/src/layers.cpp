#include "signbench/layers.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "signbench/error.hpp"

namespace signbench {

namespace {

constexpr std::size_t kKernel = 3;

void check_conv_shapes(const Tensor& input, const Tensor& weights) {
  require_rank(input, 4, "conv2d input");
  require_rank(weights, 4, "conv2d weights");
  if (weights.dim(2) != kKernel || weights.dim(3) != kKernel) {
    throw ShapeError(fmt::format("conv2d: kernel must be 3x3, got {}x{}", weights.dim(2), weights.dim(3)));
  }
  if (weights.dim(1) != input.dim(1)) {
    throw ShapeError(fmt::format("conv2d: input has {} channels but weights expect Cin={}", input.dim(1),
                                 weights.dim(1)));
  }
}

// Output rows/cols o for which o + k - 1 lies inside [0, extent).
struct TapRange {
  std::size_t begin;
  std::size_t end;
};

TapRange valid_range(std::size_t k, std::size_t extent) {
  // input index = o + k - 1
  const std::size_t begin = k == 0 ? 1 : 0;
  const std::size_t end = k == 2 ? extent - 1 : extent;
  return {std::min(begin, extent), std::max(std::min(begin, extent), end)};
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  check_conv_shapes(input, weights);
  require_rank(bias, 1, "conv2d bias");
  const std::size_t n_batch = input.dim(0), c_in = input.dim(1), height = input.dim(2), width = input.dim(3);
  const std::size_t c_out = weights.dim(0);
  if (bias.dim(0) != c_out) {
    throw ShapeError(fmt::format("conv2d: bias has {} entries but Cout={}", bias.dim(0), c_out));
  }

  Tensor out({n_batch, c_out, height, width});
  const std::size_t plane = height * width;
  const double* in = input.data().data();
  const double* w = weights.data().data();
  double* o = out.data().data();

  for (std::size_t n = 0; n < n_batch; ++n) {
    for (std::size_t co = 0; co < c_out; ++co) {
      double* out_plane = o + (n * c_out + co) * plane;
      std::fill(out_plane, out_plane + plane, bias[co]);
      for (std::size_t ci = 0; ci < c_in; ++ci) {
        const double* in_plane = in + (n * c_in + ci) * plane;
        const double* kernel = w + (co * c_in + ci) * kKernel * kKernel;
        for (std::size_t kh = 0; kh < kKernel; ++kh) {
          const auto rows = valid_range(kh, height);
          for (std::size_t kw = 0; kw < kKernel; ++kw) {
            const double tap = kernel[kh * kKernel + kw];
            const auto cols = valid_range(kw, width);
            for (std::size_t oh = rows.begin; oh < rows.end; ++oh) {
              const double* src = in_plane + (oh + kh - 1) * width;
              double* dst = out_plane + oh * width;
              for (std::size_t ow = cols.begin; ow < cols.end; ++ow) dst[ow] += tap * src[ow + kw - 1];
            }
          }
        }
      }
    }
  }
  return out;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& weights, const Tensor& upstream) {
  check_conv_shapes(input, weights);
  require_rank(upstream, 4, "conv2d upstream");
  const std::size_t n_batch = input.dim(0), c_in = input.dim(1), height = input.dim(2), width = input.dim(3);
  const std::size_t c_out = weights.dim(0);
  if (upstream.shape() != Shape{n_batch, c_out, height, width}) {
    throw ShapeError(fmt::format("conv2d backward: upstream shape {} does not match output shape {}",
                                 to_string(upstream.shape()), to_string({n_batch, c_out, height, width})));
  }

  Conv2dGrads grads{Tensor::zeros_like(input), Tensor::zeros_like(weights), Tensor({c_out})};
  const std::size_t plane = height * width;
  const double* in = input.data().data();
  const double* w = weights.data().data();
  const double* up = upstream.data().data();
  double* gi = grads.input.data().data();
  double* gw = grads.weights.data().data();

  for (std::size_t n = 0; n < n_batch; ++n) {
    for (std::size_t co = 0; co < c_out; ++co) {
      const double* up_plane = up + (n * c_out + co) * plane;
      double bias_sum = 0.0;
      for (std::size_t i = 0; i < plane; ++i) bias_sum += up_plane[i];
      grads.bias[co] += bias_sum;

      for (std::size_t ci = 0; ci < c_in; ++ci) {
        const double* in_plane = in + (n * c_in + ci) * plane;
        double* gi_plane = gi + (n * c_in + ci) * plane;
        const double* kernel = w + (co * c_in + ci) * kKernel * kKernel;
        double* gkernel = gw + (co * c_in + ci) * kKernel * kKernel;
        for (std::size_t kh = 0; kh < kKernel; ++kh) {
          const auto rows = valid_range(kh, height);
          for (std::size_t kw = 0; kw < kKernel; ++kw) {
            const double tap = kernel[kh * kKernel + kw];
            const auto cols = valid_range(kw, width);
            double acc = 0.0;
            for (std::size_t oh = rows.begin; oh < rows.end; ++oh) {
              const std::size_t row = (oh + kh - 1) * width;
              const double* src = in_plane + row;
              double* dst = gi_plane + row;
              const double* g = up_plane + oh * width;
              for (std::size_t ow = cols.begin; ow < cols.end; ++ow) {
                acc += g[ow] * src[ow + kw - 1];
                dst[ow + kw - 1] += tap * g[ow];
              }
            }
            gkernel[kh * kKernel + kw] += acc;
          }
        }
      }
    }
  }
  return grads;
}

PoolResult maxpool_forward(const Tensor& input) {
  require_rank(input, 4, "maxpool input");
  const std::size_t n_batch = input.dim(0), channels = input.dim(1), height = input.dim(2), width = input.dim(3);
  if (height % 2 != 0 || width % 2 != 0) {
    throw ShapeError(fmt::format("maxpool: spatial extents must be even, got {}x{}", height, width));
  }
  const std::size_t out_h = height / 2, out_w = width / 2;
  PoolResult result{Tensor({n_batch, channels, out_h, out_w}), {}};
  result.argmax.resize(result.output.size());

  std::size_t k = 0;
  for (std::size_t nc = 0; nc < n_batch * channels; ++nc) {
    const std::size_t base = nc * height * width;
    for (std::size_t oh = 0; oh < out_h; ++oh) {
      for (std::size_t ow = 0; ow < out_w; ++ow, ++k) {
        std::size_t best = base + (2 * oh) * width + 2 * ow;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = base + (2 * oh + dy) * width + 2 * ow + dx;
            if (input[idx] > input[best]) best = idx;
          }
        }
        result.output[k] = input[best];
        result.argmax[k] = best;
      }
    }
  }
  return result;
}

Tensor maxpool_backward(const Tensor& upstream, std::span<const std::size_t> argmax, const Shape& input_shape) {
  if (upstream.size() != argmax.size()) {
    throw ShapeError(fmt::format("maxpool backward: {} upstream values for {} argmax entries", upstream.size(),
                                 argmax.size()));
  }
  Tensor grad(input_shape);
  for (std::size_t k = 0; k < argmax.size(); ++k) {
    if (argmax[k] >= grad.size()) throw ShapeError("maxpool backward: argmax index outside input");
    grad[argmax[k]] += upstream[k];
  }
  return grad;
}

Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  require_rank(input, 2, "dense input");
  require_rank(weights, 2, "dense weights");
  require_rank(bias, 1, "dense bias");
  const std::size_t n_batch = input.dim(0), k_in = input.dim(1), m_out = weights.dim(1);
  if (weights.dim(0) != k_in) {
    throw ShapeError(fmt::format("dense: input has K={} features but weights are {}", k_in,
                                 to_string(weights.shape())));
  }
  if (bias.dim(0) != m_out) {
    throw ShapeError(fmt::format("dense: bias has {} entries but M={}", bias.dim(0), m_out));
  }
  Tensor out({n_batch, m_out});
  for (std::size_t n = 0; n < n_batch; ++n) {
    double* row = out.data().data() + n * m_out;
    std::copy(bias.data().begin(), bias.data().end(), row);
    for (std::size_t k = 0; k < k_in; ++k) {
      const double x = input[n * k_in + k];
      const double* wrow = weights.data().data() + k * m_out;
      for (std::size_t m = 0; m < m_out; ++m) row[m] += x * wrow[m];
    }
  }
  return out;
}

DenseGrads dense_backward(const Tensor& input, const Tensor& weights, const Tensor& upstream) {
  require_rank(input, 2, "dense input");
  require_rank(weights, 2, "dense weights");
  require_rank(upstream, 2, "dense upstream");
  const std::size_t n_batch = input.dim(0), k_in = input.dim(1), m_out = weights.dim(1);
  if (weights.dim(0) != k_in || upstream.dim(0) != n_batch || upstream.dim(1) != m_out) {
    throw ShapeError(fmt::format("dense backward: input {}, weights {}, upstream {} are inconsistent",
                                 to_string(input.shape()), to_string(weights.shape()),
                                 to_string(upstream.shape())));
  }
  DenseGrads grads{Tensor::zeros_like(input), Tensor::zeros_like(weights), Tensor({m_out})};
  for (std::size_t n = 0; n < n_batch; ++n) {
    const double* g = upstream.data().data() + n * m_out;
    for (std::size_t m = 0; m < m_out; ++m) grads.bias[m] += g[m];
    for (std::size_t k = 0; k < k_in; ++k) {
      const double x = input[n * k_in + k];
      const double* wrow = weights.data().data() + k * m_out;
      double* gwrow = grads.weights.data().data() + k * m_out;
      double acc = 0.0;
      for (std::size_t m = 0; m < m_out; ++m) {
        gwrow[m] += x * g[m];
        acc += wrow[m] * g[m];
      }
      grads.input[n * k_in + k] = acc;
    }
  }
  return grads;
}

Tensor relu_forward(const Tensor& input) {
  Tensor out = input;
  for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& upstream) {
  if (input.shape() != upstream.shape()) {
    throw ShapeError(fmt::format("relu backward: input {} vs upstream {}", to_string(input.shape()),
                                 to_string(upstream.shape())));
  }
  Tensor grad = upstream;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(input[i] > 0.0)) grad[i] = 0.0;
  }
  return grad;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> probs(logits.begin(), logits.end());
  if (probs.empty()) return probs;
  const double peak = *std::max_element(probs.begin(), probs.end());
  double total = 0.0;
  for (auto& p : probs) {
    p = std::exp(p - peak);
    total += p;
  }
  for (auto& p : probs) p /= total;
  return probs;
}

LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require_rank(logits, 2, "softmax_cross_entropy logits");
  require_finite(logits, "logits");
  const std::size_t n_batch = logits.dim(0), classes = logits.dim(1);
  if (labels.size() != n_batch) {
    throw ShapeError(fmt::format("softmax_cross_entropy: {} labels for {} rows", labels.size(), n_batch));
  }
  LossResult result{0.0, Tensor::zeros_like(logits)};
  const double inv_n = 1.0 / static_cast<double>(n_batch);
  for (std::size_t n = 0; n < n_batch; ++n) {
    const int label = labels[n];
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw ConfigError(fmt::format("label {} out of range [0,{})", label, classes));
    }
    const std::span<const double> row = logits.data().subspan(n * classes, classes);
    const double peak = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (double z : row) total += std::exp(z - peak);
    const double log_total = std::log(total);
    result.loss += (log_total - (row[static_cast<std::size_t>(label)] - peak)) * inv_n;
    for (std::size_t c = 0; c < classes; ++c) {
      const double p = std::exp(row[c] - peak - log_total);
      result.grad_logits[n * classes + c] = (p - (static_cast<std::size_t>(label) == c ? 1.0 : 0.0)) * inv_n;
    }
  }
  return result;
}

}  // namespace signbench

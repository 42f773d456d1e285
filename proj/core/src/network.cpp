#include "signbench/network.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fmt/format.h>
#include <fstream>

#include "signbench/error.hpp"
#include "signbench/layers.hpp"
#include "signbench/rng.hpp"

namespace signbench {

void NetworkSpec::validate() const {
  if (channels == 0 || height == 0 || width == 0) throw ConfigError("network input extents must be positive");
  if (height % 8 != 0 || width % 8 != 0) {
    throw ConfigError(fmt::format("input {}x{} must be divisible by 8 for three 2x2 pools", height, width));
  }
  if (classes != kNumClasses) throw ConfigError(fmt::format("classifier must have {} outputs", kNumClasses));
  for (auto c : conv_channels) {
    if (c == 0) throw ConfigError("conv channel counts must be positive");
  }
  for (auto d : dense_widths) {
    if (d == 0) throw ConfigError("dense widths must be positive");
  }
}

std::size_t NetworkSpec::flat_features() const { return conv_channels[2] * (height / 8) * (width / 8); }

const Tensor& NetworkParams::get(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return tensors[i];
  }
  throw ConfigError(fmt::format("no parameter named '{}'", name));
}

namespace {

std::vector<std::pair<std::string, Shape>> layout(const NetworkSpec& spec) {
  std::vector<std::pair<std::string, Shape>> out;
  std::size_t c_in = spec.channels;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto c_out = spec.conv_channels[i];
    out.emplace_back(fmt::format("conv{}.weight", i + 1), Shape{c_out, c_in, 3, 3});
    out.emplace_back(fmt::format("conv{}.bias", i + 1), Shape{c_out});
    c_in = c_out;
  }
  std::size_t k = spec.flat_features();
  for (std::size_t i = 0; i < 2; ++i) {
    const auto m = spec.dense_widths[i];
    out.emplace_back(fmt::format("dense{}.weight", i + 1), Shape{k, m});
    out.emplace_back(fmt::format("dense{}.bias", i + 1), Shape{m});
    k = m;
  }
  out.emplace_back("output.weight", Shape{k, spec.classes});
  out.emplace_back("output.bias", Shape{spec.classes});
  return out;
}

// Activations kept for the backward pass.
struct Trace {
  std::array<Tensor, 3> conv_in;
  std::array<Tensor, 3> conv_out;  // pre-relu
  std::array<PoolResult, 3> pool;
  std::array<Shape, 3> pool_in_shape;
  Tensor flat;
  std::array<Tensor, 2> dense_out;  // pre-relu
  std::array<Tensor, 2> dense_act;
  Tensor logits;
};

Trace run_forward(const NetworkSpec& spec, const NetworkParams& params, const Tensor& batch) {
  require_rank(batch, 4, "network input");
  if (batch.dim(1) != spec.channels || batch.dim(2) != spec.height || batch.dim(3) != spec.width) {
    throw ShapeError(fmt::format("network expects [N,{},{},{}] input, got {}", spec.channels, spec.height,
                                 spec.width, to_string(batch.shape())));
  }
  require_finite(batch, "network input");
  const auto& t = params.tensors;
  Trace trace;
  Tensor x = batch;
  for (std::size_t i = 0; i < 3; ++i) {
    trace.conv_in[i] = x;
    trace.conv_out[i] = conv2d_forward(x, t[2 * i], t[2 * i + 1]);
    Tensor act = relu_forward(trace.conv_out[i]);
    trace.pool_in_shape[i] = act.shape();
    trace.pool[i] = maxpool_forward(act);
    x = trace.pool[i].output;
  }
  const std::size_t n = batch.dim(0);
  trace.flat = x.reshaped({n, spec.flat_features()});
  Tensor h = trace.flat;
  for (std::size_t i = 0; i < 2; ++i) {
    trace.dense_out[i] = dense_forward(h, t[6 + 2 * i], t[7 + 2 * i]);
    trace.dense_act[i] = relu_forward(trace.dense_out[i]);
    h = trace.dense_act[i];
  }
  trace.logits = dense_forward(h, t[10], t[11]);
  require_finite(trace.logits, "network logits");
  return trace;
}

}  // namespace

NetworkParams init_params(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  NetworkParams params;
  params.seed = seed;
  SplitMix64 rng(seed);
  for (auto& [name, shape] : layout(spec)) {
    Tensor t(shape);
    if (shape.size() > 1) {
      // fan_in: Cin*3*3 for conv, K for dense
      const std::size_t fan_in = shape.size() == 4 ? shape[1] * shape[2] * shape[3] : shape[0];
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      for (auto& v : t.data()) v = rng.uniform(-bound, bound);
    }
    params.names.push_back(name);
    params.tensors.push_back(std::move(t));
  }
  return params;
}

void check_params(const NetworkSpec& spec, const NetworkParams& params) {
  const auto expected = layout(spec);
  if (params.tensors.size() != expected.size() || params.names.size() != expected.size()) {
    throw ShapeError(fmt::format("expected {} parameter tensors, got {}", expected.size(), params.tensors.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (params.names[i] != expected[i].first || params.tensors[i].shape() != expected[i].second) {
      throw ShapeError(fmt::format("parameter {} '{}' has shape {}, expected '{}' {}", i, params.names[i],
                                   to_string(params.tensors[i].shape()), expected[i].first,
                                   to_string(expected[i].second)));
    }
  }
}

Tensor forward(const NetworkSpec& spec, const NetworkParams& params, const Tensor& batch) {
  return run_forward(spec, params, batch).logits;
}

LossAndGrads loss_and_gradients(const NetworkSpec& spec, const NetworkParams& params, const Tensor& batch,
                                std::span<const int> labels) {
  Trace trace = run_forward(spec, params, batch);
  LossResult loss = softmax_cross_entropy(trace.logits, labels);
  const auto& t = params.tensors;

  LossAndGrads out;
  out.loss = loss.loss;
  out.grads.tensors.resize(t.size());
  auto& g = out.grads.tensors;

  DenseGrads head = dense_backward(trace.dense_act[1], t[10], loss.grad_logits);
  g[10] = std::move(head.weights);
  g[11] = std::move(head.bias);
  Tensor upstream = std::move(head.input);
  for (std::size_t i = 2; i-- > 0;) {
    upstream = relu_backward(trace.dense_out[i], upstream);
    const Tensor& in = i == 0 ? trace.flat : trace.dense_act[i - 1];
    DenseGrads dg = dense_backward(in, t[6 + 2 * i], upstream);
    g[6 + 2 * i] = std::move(dg.weights);
    g[7 + 2 * i] = std::move(dg.bias);
    upstream = std::move(dg.input);
  }
  upstream = upstream.reshaped(trace.pool[2].output.shape());
  for (std::size_t i = 3; i-- > 0;) {
    upstream = maxpool_backward(upstream, trace.pool[i].argmax, trace.pool_in_shape[i]);
    upstream = relu_backward(trace.conv_out[i], upstream);
    Conv2dGrads cg = conv2d_backward(trace.conv_in[i], t[2 * i], upstream);
    g[2 * i] = std::move(cg.weights);
    g[2 * i + 1] = std::move(cg.bias);
    upstream = std::move(cg.input);
  }
  out.logits = std::move(trace.logits);
  return out;
}

void sgd_step(NetworkParams& params, const Gradients& grads, double lr, std::size_t first_tensor) {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError(fmt::format("learning rate must be positive, got {}", lr));
  if (grads.tensors.size() != params.tensors.size()) {
    throw ShapeError(fmt::format("{} gradient tensors for {} parameters", grads.tensors.size(),
                                 params.tensors.size()));
  }
  for (std::size_t i = first_tensor; i < params.tensors.size(); ++i) {
    if (grads.tensors[i].shape() != params.tensors[i].shape()) {
      throw ShapeError(fmt::format("gradient for '{}' has shape {}, parameter has {}", params.names[i],
                                   to_string(grads.tensors[i].shape()), to_string(params.tensors[i].shape())));
    }
    if (!grads.tensors[i].all_finite()) {
      throw NumericError(fmt::format("non-finite gradient for '{}'", params.names[i]));
    }
  }
  for (std::size_t i = first_tensor; i < params.tensors.size(); ++i) {
    auto w = params.tensors[i].data();
    auto g = grads.tensors[i].data();
    for (std::size_t k = 0; k < w.size(); ++k) w[k] -= lr * g[k];
  }
}

Prediction prediction_from_logits(std::span<const double> logits) {
  if (logits.size() != kNumClasses) {
    throw ShapeError(fmt::format("expected {} logits, got {}", kNumClasses, logits.size()));
  }
  const auto probs = softmax(logits);
  Prediction p;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    p.probabilities[c] = probs[c];
    if (logits[c] > logits[static_cast<std::size_t>(p.label)]) p.label = static_cast<int>(c);
  }
  p.confidence = p.probabilities[static_cast<std::size_t>(p.label)];
  return p;
}

Prediction predict(const NetworkSpec& spec, const NetworkParams& params, const Tensor& image) {
  require_rank(image, 3, "predict image");
  Tensor batch = image.reshaped({1, image.dim(0), image.dim(1), image.dim(2)});
  const Tensor logits = forward(spec, params, batch);
  return prediction_from_logits(logits.data());
}

namespace {

constexpr char kMagic[] = {'S', 'B', 'N', 'N', '1'};

template <typename T>
void write_le(std::ostream& os, T value) {
  static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  os.write(buf, sizeof(T));
}

template <typename T>
bool read_le(std::istream& is, T& value) {
  char buf[sizeof(T)];
  if (!is.read(buf, sizeof(T))) return false;
  std::memcpy(&value, buf, sizeof(T));
  return true;
}

}  // namespace

void save_checkpoint(const NetworkParams& params, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw StorageError("cannot open checkpoint for writing: " + path.string());
  os.write(kMagic, sizeof(kMagic));
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    const auto& name = params.names[i];
    const auto& t = params.tensors[i];
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (auto extent : t.shape()) write_le<std::uint64_t>(os, extent);
    for (double v : t.data()) write_le<double>(os, v);
  }
  if (!os) throw StorageError("failed writing checkpoint: " + path.string());
}

NetworkParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path.string());
  char magic[sizeof(kMagic)];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError("not an SBNN1 checkpoint: " + path.string());
  }
  NetworkParams params;
  std::uint32_t name_len = 0;
  while (read_le(is, name_len)) {
    if (name_len > 4096) throw DataError("corrupt checkpoint: oversized tensor name");
    std::string name(name_len, '\0');
    std::uint32_t rank = 0;
    if (!is.read(name.data(), name_len) || !read_le(is, rank) || rank == 0 || rank > 8) {
      throw DataError("corrupt checkpoint header in " + path.string());
    }
    Shape shape(rank);
    for (auto& extent : shape) {
      std::uint64_t e = 0;
      if (!read_le(is, e) || e == 0 || e > (1ULL << 32)) throw DataError("corrupt checkpoint extents");
      extent = static_cast<std::size_t>(e);
    }
    std::vector<double> values(element_count(shape));
    for (auto& v : values) {
      if (!read_le(is, v)) throw DataError("truncated checkpoint: " + path.string());
    }
    params.names.push_back(std::move(name));
    params.tensors.emplace_back(std::move(shape), std::move(values));
  }
  return params;
}

}  // namespace signbench

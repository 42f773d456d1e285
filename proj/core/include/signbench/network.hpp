#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "signbench/tensor.hpp"

namespace signbench {

inline constexpr std::size_t kNumClasses = 4;

/// Fixed stack: three [conv3x3 -> relu -> maxpool2x2] blocks, flatten, two
/// relu dense layers, and a 4-logit output layer.
struct NetworkSpec {
  std::size_t channels = 3;
  std::size_t height = 64;
  std::size_t width = 64;
  std::array<std::size_t, 3> conv_channels{8, 16, 32};
  std::array<std::size_t, 2> dense_widths{128, 64};
  std::size_t classes = kNumClasses;

  /// Throws ConfigError unless H and W survive three 2x2 pools and classes == 4.
  void validate() const;
  std::size_t flat_features() const;
};

/// Parameter tensors in fixed order: conv1..3 (weight, bias), dense1..2
/// (weight, bias), output (weight, bias).
struct NetworkParams {
  std::vector<std::string> names;
  std::vector<Tensor> tensors;
  std::uint64_t seed = 0;

  static constexpr std::size_t kConvTensors = 6;

  const Tensor& get(std::string_view name) const;
};

/// Same layout as NetworkParams.
struct Gradients {
  std::vector<Tensor> tensors;
};

/// Uniform He-style init: U(-sqrt(6/fan_in), +sqrt(6/fan_in)); zero biases.
NetworkParams init_params(const NetworkSpec& spec, std::uint64_t seed);

/// Throws ShapeError if any tensor does not match the spec.
void check_params(const NetworkSpec& spec, const NetworkParams& params);

/// Logits [N,4] for a batch [N,3,H,W].
Tensor forward(const NetworkSpec& spec, const NetworkParams& params, const Tensor& batch);

struct LossAndGrads {
  double loss = 0.0;
  Tensor logits;
  Gradients grads;
};

/// Mean cross-entropy loss and its gradient w.r.t. every parameter.
LossAndGrads loss_and_gradients(const NetworkSpec& spec, const NetworkParams& params, const Tensor& batch,
                                std::span<const int> labels);

/// w <- w - lr * g for every tensor at index >= first_tensor. Throws
/// NumericError (leaving params untouched) if any gradient is non-finite.
void sgd_step(NetworkParams& params, const Gradients& grads, double lr, std::size_t first_tensor = 0);

struct Prediction {
  int label = 0;
  double confidence = 0.0;
  std::array<double, kNumClasses> probabilities{};
};

/// Argmax (lowest index on ties) and its softmax probability.
Prediction prediction_from_logits(std::span<const double> logits);

/// Classifies one preprocessed image [3,H,W].
Prediction predict(const NetworkSpec& spec, const NetworkParams& params, const Tensor& image);

/// Checkpoint file: ASCII "SBNN1", then per tensor: u32 name length, name
/// bytes, u32 rank, u64 extents, f64 values. All integers and floats are
/// little-endian. Tensors follow NetworkParams order until end of file.
void save_checkpoint(const NetworkParams& params, const std::filesystem::path& path);
NetworkParams load_checkpoint(const std::filesystem::path& path);

}  // namespace signbench

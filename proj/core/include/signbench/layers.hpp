#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "signbench/tensor.hpp"

namespace signbench {

// Kernels for the fixed classifier stack. All convolutions are 3x3, stride 1,
// zero "same" padding; pooling is 2x2 stride 2. Activations are NCHW.

/// Cross-correlation of input[N,Cin,H,W] with weights[Cout,Cin,3,3] plus
/// bias[Cout]. Returns [N,Cout,H,W].
Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias);

struct Conv2dGrads {
  Tensor input;
  Tensor weights;
  Tensor bias;
};

/// Gradients of sum(upstream * conv2d_forward(input, weights, .)).
Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& weights, const Tensor& upstream);

struct PoolResult {
  Tensor output;
  /// Flat input offset of the winning element for every output element.
  std::vector<std::size_t> argmax;
};

/// 2x2 max pooling; ties go to the first element in row-major window order.
PoolResult maxpool_forward(const Tensor& input);

/// Routes upstream gradient back to the recorded argmax positions.
Tensor maxpool_backward(const Tensor& upstream, std::span<const std::size_t> argmax, const Shape& input_shape);

/// input[N,K] x weights[K,M] + bias[M].
Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias);

struct DenseGrads {
  Tensor input;
  Tensor weights;
  Tensor bias;
};

DenseGrads dense_backward(const Tensor& input, const Tensor& weights, const Tensor& upstream);

Tensor relu_forward(const Tensor& input);
/// Gradient is passed where the forward input was strictly positive.
Tensor relu_backward(const Tensor& input, const Tensor& upstream);

/// Numerically stable softmax of one logit row.
std::vector<double> softmax(std::span<const double> logits);

struct LossResult {
  double loss = 0.0;  ///< mean over the batch
  Tensor grad_logits; ///< d(mean loss)/d(logits)
};

/// Mean softmax cross-entropy over logits[N,C]; labels must lie in [0, C).
LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

}  // namespace signbench

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "lnn/rng.hpp"
#include "lnn/tensor.hpp"

namespace lnn {

// One convolution stage: conv -> ReLU -> optional 2x2 max-pool.
struct ConvLayerSpec {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 3;  // square, odd
  std::size_t stride = 1;
  std::size_t padding = 1;
  bool pool = true;

  friend bool operator==(const ConvLayerSpec&, const ConvLayerSpec&) = default;
};

// Conv stack followed by global average pooling; the feature dimension is
// the last layer's out_channels.
struct ConvSpec {
  std::vector<ConvLayerSpec> layers;

  std::size_t feature_dim() const { return layers.empty() ? 0 : layers.back().out_channels; }
  // Checks channel chaining and that spatial extents stay positive (and even
  // before each pool) for a [C, H, W] input. Throws DimensionError.
  void validate(const Shape& input_shape) const;

  friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

// 3->8 (k3,s1,p1)+pool, 8->16 (k3,s1,p1)+pool, global average pool.
ConvSpec default_conv_spec();

struct ConvLayerParams {
  Tensor kernels;  // [K, C, k, k]
  Tensor bias;     // [K]

  friend bool operator==(const ConvLayerParams&, const ConvLayerParams&) = default;
};

ConvLayerParams init_conv_layer(const ConvLayerSpec& spec, Rng& rng);

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t padding);

// Direct cross-correlation with zero padding. input [C,H,W] -> [K,H',W'].
Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias,
                      std::size_t stride, std::size_t padding);

struct Conv2dGrads {
  Tensor d_input;
  Tensor d_kernels;
  Tensor d_bias;
};

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernels, std::size_t stride,
                            std::size_t padding, const Tensor& d_output);

Tensor relu(const Tensor& input);
// Passes d_output through where the pre-activation was positive.
Tensor relu_backward(const Tensor& pre_activation, const Tensor& d_output);

struct PoolResult {
  Tensor output;
  std::vector<std::uint32_t> argmax;  // flat input index for each output
};

// 2x2 windows, stride 2. Ties resolve to the first element in raster order.
PoolResult maxpool2x2(const Tensor& input);
Tensor maxpool2x2_backward(const Shape& input_shape, const std::vector<std::uint32_t>& argmax,
                           const Tensor& d_output);

Tensor global_average_pool(const Tensor& input);  // [C,H,W] -> [C]
Tensor global_average_pool_backward(const Shape& input_shape, const Tensor& d_output);

// logits = head_weights * motor + head_bias.
std::vector<double> readout(std::span<const double> motor, const Tensor& head_weights,
                            const Tensor& head_bias);

struct SoftmaxLoss {
  double loss = 0.0;
  std::vector<double> probabilities;
};

SoftmaxLoss softmax_cross_entropy(std::span<const double> logits, std::size_t label);

// Multiply-accumulates of the conv stack: sum over layers of K*C*k*k*H'*W'.
std::uint64_t feature_mac_count(const ConvSpec& spec, const Shape& input_shape);

}  // namespace lnn

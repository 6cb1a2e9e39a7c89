#include "lnn/frontend.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "lnn/error.hpp"

namespace lnn {

ConvSpec default_conv_spec() {
  return ConvSpec{{ConvLayerSpec{3, 8, 3, 1, 1, true}, ConvLayerSpec{8, 16, 3, 1, 1, true}}};
}

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t padding) {
  if (stride == 0) throw DimensionError("convolution stride must be positive");
  if (in + 2 * padding < kernel) {
    throw DimensionError("convolution kernel " + std::to_string(kernel) +
                         " larger than padded extent " + std::to_string(in + 2 * padding));
  }
  return (in + 2 * padding - kernel) / stride + 1;
}

void ConvSpec::validate(const Shape& input_shape) const {
  if (input_shape.size() != 3) throw DimensionError("conv input must be [C,H,W]");
  std::size_t c = input_shape[0], h = input_shape[1], w = input_shape[2];
  if (layers.empty()) throw DimensionError("conv stack has no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const ConvLayerSpec& s = layers[l];
    const std::string where = "conv layer " + std::to_string(l) + ": ";
    if (s.in_channels != c) {
      throw DimensionError(where + "expects " + std::to_string(s.in_channels) +
                           " input channels, receives " + std::to_string(c));
    }
    if (s.out_channels == 0) throw DimensionError(where + "out_channels must be positive");
    if (s.kernel == 0 || s.kernel % 2 == 0) throw DimensionError(where + "kernel must be odd");
    h = conv_output_extent(h, s.kernel, s.stride, s.padding);
    w = conv_output_extent(w, s.kernel, s.stride, s.padding);
    if (s.pool) {
      if (h % 2 || w % 2) {
        throw DimensionError(where + "pool input " + std::to_string(h) + "x" + std::to_string(w) +
                             " is not even");
      }
      h /= 2;
      w /= 2;
    }
    if (h == 0 || w == 0) throw DimensionError(where + "spatial extent collapsed to zero");
    c = s.out_channels;
  }
}

ConvLayerParams init_conv_layer(const ConvLayerSpec& spec, Rng& rng) {
  ConvLayerParams p{Tensor({spec.out_channels, spec.in_channels, spec.kernel, spec.kernel}),
                    Tensor({spec.out_channels})};
  const double bound = std::sqrt(6.0 / static_cast<double>(spec.in_channels * spec.kernel * spec.kernel));
  for (double& v : p.kernels.values()) v = rng.uniform(-bound, bound);
  return p;
}

Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias,
                      std::size_t stride, std::size_t padding) {
  if (input.rank() != 3 || kernels.rank() != 4 || bias.rank() != 1) {
    throw DimensionError("conv2d: expected input [C,H,W], kernels [K,C,k,k], bias [K]");
  }
  const std::size_t C = input.dim(0), H = input.dim(1), W = input.dim(2);
  const std::size_t K = kernels.dim(0), k = kernels.dim(2);
  if (kernels.dim(1) != C || kernels.dim(3) != k || bias.dim(0) != K) {
    throw DimensionError("conv2d: kernels " + shape_to_string(kernels.shape()) + " / bias " +
                         shape_to_string(bias.shape()) + " incompatible with input " +
                         shape_to_string(input.shape()));
  }
  const std::size_t Ho = conv_output_extent(H, k, stride, padding);
  const std::size_t Wo = conv_output_extent(W, k, stride, padding);
  Tensor out({K, Ho, Wo});
  const auto pad = static_cast<std::ptrdiff_t>(padding);
  for (std::size_t o = 0; o < K; ++o) {
    for (std::size_t y = 0; y < Ho; ++y) {
      for (std::size_t x = 0; x < Wo; ++x) {
        double acc = bias[o];
        for (std::size_t c = 0; c < C; ++c) {
          for (std::size_t ky = 0; ky < k; ++ky) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y * stride + ky) - pad;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x * stride + kx) - pad;
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
              acc += kernels(o, c, ky, kx) * input(c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
            }
          }
        }
        out(o, y, x) = acc;
      }
    }
  }
  return out;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernels, std::size_t stride,
                            std::size_t padding, const Tensor& d_output) {
  const std::size_t C = input.dim(0), H = input.dim(1), W = input.dim(2);
  const std::size_t K = kernels.dim(0), k = kernels.dim(2);
  const std::size_t Ho = conv_output_extent(H, k, stride, padding);
  const std::size_t Wo = conv_output_extent(W, k, stride, padding);
  require_shape(d_output, {K, Ho, Wo}, "conv2d_backward d_output");
  Conv2dGrads g{Tensor::zeros_like(input), Tensor::zeros_like(kernels), Tensor({K})};
  const auto pad = static_cast<std::ptrdiff_t>(padding);
  for (std::size_t o = 0; o < K; ++o) {
    for (std::size_t y = 0; y < Ho; ++y) {
      for (std::size_t x = 0; x < Wo; ++x) {
        const double d = d_output(o, y, x);
        g.d_bias[o] += d;
        if (d == 0.0) continue;
        for (std::size_t c = 0; c < C; ++c) {
          for (std::size_t ky = 0; ky < k; ++ky) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y * stride + ky) - pad;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x * stride + kx) - pad;
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
              const auto uy = static_cast<std::size_t>(iy), ux = static_cast<std::size_t>(ix);
              g.d_kernels(o, c, ky, kx) += d * input(c, uy, ux);
              g.d_input(c, uy, ux) += d * kernels(o, c, ky, kx);
            }
          }
        }
      }
    }
  }
  return g;
}

Tensor relu(const Tensor& input) {
  Tensor out = input;
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor relu_backward(const Tensor& pre, const Tensor& d_output) {
  Tensor d = d_output;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!(pre[i] > 0.0)) d[i] = 0.0;
  }
  return d;
}

PoolResult maxpool2x2(const Tensor& input) {
  if (input.rank() != 3) throw DimensionError("maxpool2x2: expected [C,H,W]");
  const std::size_t C = input.dim(0), H = input.dim(1), W = input.dim(2);
  if (H % 2 || W % 2) {
    throw DimensionError("maxpool2x2: spatial extent " + std::to_string(H) + "x" +
                         std::to_string(W) + " is not even");
  }
  PoolResult r{Tensor({C, H / 2, W / 2}), std::vector<std::uint32_t>(C * (H / 2) * (W / 2))};
  std::size_t o = 0;
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t y = 0; y < H / 2; ++y) {
      for (std::size_t x = 0; x < W / 2; ++x, ++o) {
        std::size_t best = (c * H + 2 * y) * W + 2 * x;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = (c * H + 2 * y + dy) * W + 2 * x + dx;
            if (input[idx] > input[best]) best = idx;
          }
        }
        r.output[o] = input[best];
        r.argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return r;
}

Tensor maxpool2x2_backward(const Shape& input_shape, const std::vector<std::uint32_t>& argmax,
                           const Tensor& d_output) {
  if (argmax.size() != d_output.size()) throw DimensionError("maxpool2x2_backward: index size mismatch");
  Tensor d(input_shape);
  for (std::size_t o = 0; o < argmax.size(); ++o) d[argmax[o]] += d_output[o];
  return d;
}

Tensor global_average_pool(const Tensor& input) {
  if (input.rank() != 3) throw DimensionError("global_average_pool: expected [C,H,W]");
  const std::size_t C = input.dim(0), area = input.dim(1) * input.dim(2);
  Tensor out({C});
  for (std::size_t c = 0; c < C; ++c) {
    double sum = 0.0;
    for (std::size_t i = 0; i < area; ++i) sum += input[c * area + i];
    out[c] = sum / static_cast<double>(area);
  }
  return out;
}

Tensor global_average_pool_backward(const Shape& input_shape, const Tensor& d_output) {
  Tensor d(input_shape);
  const std::size_t C = input_shape[0], area = input_shape[1] * input_shape[2];
  for (std::size_t c = 0; c < C; ++c) {
    const double v = d_output[c] / static_cast<double>(area);
    for (std::size_t i = 0; i < area; ++i) d[c * area + i] = v;
  }
  return d;
}

std::vector<double> readout(std::span<const double> motor, const Tensor& head_weights,
                            const Tensor& head_bias) {
  if (head_weights.rank() != 2 || head_weights.dim(1) != motor.size() || head_bias.rank() != 1 ||
      head_bias.dim(0) != head_weights.dim(0)) {
    throw DimensionError("readout: head " + shape_to_string(head_weights.shape()) + " / bias " +
                         shape_to_string(head_bias.shape()) + " incompatible with " +
                         std::to_string(motor.size()) + " motor neurons");
  }
  const std::size_t classes = head_weights.dim(0);
  std::vector<double> logits(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    double acc = head_bias[c];
    for (std::size_t j = 0; j < motor.size(); ++j) acc += head_weights(c, j) * motor[j];
    logits[c] = acc;
  }
  return logits;
}

SoftmaxLoss softmax_cross_entropy(std::span<const double> logits, std::size_t label) {
  if (label >= logits.size()) {
    throw ParameterError("label " + std::to_string(label) + " out of range for " +
                         std::to_string(logits.size()) + " classes");
  }
  double max_logit = -std::numeric_limits<double>::infinity();
  for (double v : logits) max_logit = std::max(max_logit, v);
  double sum = 0.0;
  SoftmaxLoss r;
  r.probabilities.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    r.probabilities[i] = std::exp(logits[i] - max_logit);
    sum += r.probabilities[i];
  }
  for (double& p : r.probabilities) p /= sum;
  r.loss = -((logits[label] - max_logit) - std::log(sum));
  return r;
}

std::uint64_t feature_mac_count(const ConvSpec& spec, const Shape& input_shape) {
  spec.validate(input_shape);
  std::uint64_t total = 0;
  std::size_t h = input_shape[1], w = input_shape[2];
  for (const ConvLayerSpec& s : spec.layers) {
    h = conv_output_extent(h, s.kernel, s.stride, s.padding);
    w = conv_output_extent(w, s.kernel, s.stride, s.padding);
    total += static_cast<std::uint64_t>(s.out_channels) * s.in_channels * s.kernel * s.kernel * h * w;
    if (s.pool) {
      h /= 2;
      w /= 2;
    }
  }
  return total;
}

}  // namespace lnn

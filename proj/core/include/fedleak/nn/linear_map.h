#pragma once

#include <cstddef>
#include <span>

#include "fedleak/nn/network.h"

namespace fedleak::nn {

struct ConvGeometry {
  std::size_t in_channels = 0, in_height = 0, in_width = 0;
  std::size_t out_channels = 0, out_height = 0, out_width = 0;
  std::size_t kernel = 0, stride = 1, padding = 0;

  std::size_t in_size() const { return in_channels * in_height * in_width; }
  std::size_t out_size() const { return out_channels * out_height * out_width; }
};

// Throws ConfigError when the geometry yields non-positive output extents.
ConvGeometry conv_geometry(const Conv2d& conv, const Shape& input_shape);

// The affine part z = W*o + b of one trainable layer, acting on flat buffers.
// Dense layers are plain mat-vecs; Conv2d layers are direct zero-padded
// convolutions. Every *_add method accumulates into its output.
class LinearMap {
 public:
  LinearMap(const NetworkSpec& net, std::size_t layer);
  LinearMap(const Conv2d& conv, const Shape& input_shape);

  std::size_t in_size() const { return in_size_; }
  std::size_t out_size() const { return out_size_; }
  bool is_conv() const { return conv_; }
  const ConvGeometry& geometry() const { return geom_; }

  // out = W * in (overwrites out).
  void apply(std::span<const double> weight, std::span<const double> in,
             std::span<double> out) const;
  // in_adj += W^T * out_adj.
  void apply_transpose_add(std::span<const double> weight, std::span<const double> out_adj,
                           std::span<double> in_adj) const;
  // grad += d(out_adj . (W * in)) / dW, i.e. the outer-product weight gradient.
  void weight_gradient_add(std::span<const double> out_adj, std::span<const double> in,
                           std::span<double> grad) const;
  // out += bias, broadcast over spatial positions for convolutions.
  void bias_add(std::span<const double> bias, std::span<double> out) const;
  // grad += sum of out_adj over spatial positions.
  void bias_gradient_add(std::span<const double> out_adj, std::span<double> grad) const;
  // out_adj += broadcast(bias_adj); the transpose of bias_gradient_add.
  void bias_broadcast_add(std::span<const double> bias_adj, std::span<double> out_adj) const;

 private:
  bool conv_ = false;
  std::size_t in_size_ = 0;
  std::size_t out_size_ = 0;
  ConvGeometry geom_;
};

}  // namespace fedleak::nn

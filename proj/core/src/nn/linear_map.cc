#include "fedleak/nn/linear_map.h"

#include <algorithm>
#include <string>

#include "fedleak/error.h"

namespace fedleak::nn {

ConvGeometry conv_geometry(const Conv2d& conv, const Shape& input_shape) {
  if (input_shape.size() != 3) {
    throw ConfigError("convolution input must be {channels, height, width}, got " +
                      shape_to_string(input_shape));
  }
  if (conv.kernel_size == 0 || conv.stride == 0 || conv.out_channels == 0) {
    throw ConfigError("convolution kernel, stride and channel count must be positive");
  }
  if (input_shape[0] != conv.in_channels) {
    throw ConfigError("convolution expects " + std::to_string(conv.in_channels) +
                      " input channels, got " + std::to_string(input_shape[0]));
  }
  ConvGeometry g;
  g.in_channels = input_shape[0];
  g.in_height = input_shape[1];
  g.in_width = input_shape[2];
  g.out_channels = conv.out_channels;
  g.kernel = conv.kernel_size;
  g.stride = conv.stride;
  g.padding = conv.padding;
  const std::size_t ph = g.in_height + 2 * g.padding;
  const std::size_t pw = g.in_width + 2 * g.padding;
  if (g.in_height == 0 || g.in_width == 0 || ph < g.kernel || pw < g.kernel) {
    throw ConfigError("convolution geometry gives non-positive output extent");
  }
  g.out_height = (ph - g.kernel) / g.stride + 1;
  g.out_width = (pw - g.kernel) / g.stride + 1;
  return g;
}

LinearMap::LinearMap(const NetworkSpec& net, std::size_t layer) {
  const Layer& l = net.layers().at(layer);
  if (const auto* d = std::get_if<Dense>(&l)) {
    in_size_ = d->in_dim;
    out_size_ = d->out_dim;
  } else if (const auto* c = std::get_if<Conv2d>(&l)) {
    conv_ = true;
    geom_ = conv_geometry(*c, net.layer_input_shape(layer));
    in_size_ = geom_.in_size();
    out_size_ = geom_.out_size();
  } else {
    throw ConfigError("layer " + std::to_string(layer) + " has no parameters");
  }
}

LinearMap::LinearMap(const Conv2d& conv, const Shape& input_shape)
    : conv_(true), geom_(conv_geometry(conv, input_shape)) {
  in_size_ = geom_.in_size();
  out_size_ = geom_.out_size();
}

namespace {

// Calls fn(out_index, in_index, kernel_index) for every valid tap.
template <typename Fn>
void for_each_tap(const ConvGeometry& g, Fn&& fn) {
  const std::size_t kk = g.kernel * g.kernel;
  for (std::size_t co = 0; co < g.out_channels; ++co) {
    for (std::size_t oy = 0; oy < g.out_height; ++oy) {
      for (std::size_t ox = 0; ox < g.out_width; ++ox) {
        const std::size_t out_idx = (co * g.out_height + oy) * g.out_width + ox;
        for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
          const std::size_t kbase = (co * g.in_channels + ci) * kk;
          for (std::size_t ky = 0; ky < g.kernel; ++ky) {
            const std::size_t py = oy * g.stride + ky;
            if (py < g.padding || py - g.padding >= g.in_height) continue;
            const std::size_t iy = py - g.padding;
            for (std::size_t kx = 0; kx < g.kernel; ++kx) {
              const std::size_t px = ox * g.stride + kx;
              if (px < g.padding || px - g.padding >= g.in_width) continue;
              const std::size_t ix = px - g.padding;
              fn(out_idx, (ci * g.in_height + iy) * g.in_width + ix, kbase + ky * g.kernel + kx);
            }
          }
        }
      }
    }
  }
}

}  // namespace

void LinearMap::apply(std::span<const double> weight, std::span<const double> in,
                      std::span<double> out) const {
  if (conv_) {
    std::fill(out.begin(), out.end(), 0.0);
    for_each_tap(geom_, [&](std::size_t o, std::size_t i, std::size_t k) {
      out[o] += weight[k] * in[i];
    });
    return;
  }
  for (std::size_t r = 0; r < out_size_; ++r) {
    const double* row = weight.data() + r * in_size_;
    double acc = 0.0;
    for (std::size_t c = 0; c < in_size_; ++c) acc += row[c] * in[c];
    out[r] = acc;
  }
}

void LinearMap::apply_transpose_add(std::span<const double> weight,
                                    std::span<const double> out_adj,
                                    std::span<double> in_adj) const {
  if (conv_) {
    for_each_tap(geom_, [&](std::size_t o, std::size_t i, std::size_t k) {
      in_adj[i] += weight[k] * out_adj[o];
    });
    return;
  }
  for (std::size_t r = 0; r < out_size_; ++r) {
    const double a = out_adj[r];
    if (a == 0.0) continue;
    const double* row = weight.data() + r * in_size_;
    for (std::size_t c = 0; c < in_size_; ++c) in_adj[c] += row[c] * a;
  }
}

void LinearMap::weight_gradient_add(std::span<const double> out_adj, std::span<const double> in,
                                    std::span<double> grad) const {
  if (conv_) {
    for_each_tap(geom_, [&](std::size_t o, std::size_t i, std::size_t k) {
      grad[k] += out_adj[o] * in[i];
    });
    return;
  }
  for (std::size_t r = 0; r < out_size_; ++r) {
    const double a = out_adj[r];
    double* row = grad.data() + r * in_size_;
    for (std::size_t c = 0; c < in_size_; ++c) row[c] += a * in[c];
  }
}

void LinearMap::bias_add(std::span<const double> bias, std::span<double> out) const {
  if (!conv_) {
    for (std::size_t r = 0; r < out_size_; ++r) out[r] += bias[r];
    return;
  }
  const std::size_t plane = geom_.out_height * geom_.out_width;
  for (std::size_t co = 0; co < geom_.out_channels; ++co) {
    for (std::size_t p = 0; p < plane; ++p) out[co * plane + p] += bias[co];
  }
}

void LinearMap::bias_gradient_add(std::span<const double> out_adj, std::span<double> grad) const {
  if (!conv_) {
    for (std::size_t r = 0; r < out_size_; ++r) grad[r] += out_adj[r];
    return;
  }
  const std::size_t plane = geom_.out_height * geom_.out_width;
  for (std::size_t co = 0; co < geom_.out_channels; ++co) {
    double acc = 0.0;
    for (std::size_t p = 0; p < plane; ++p) acc += out_adj[co * plane + p];
    grad[co] += acc;
  }
}

void LinearMap::bias_broadcast_add(std::span<const double> bias_adj,
                                   std::span<double> out_adj) const {
  bias_add(bias_adj, out_adj);
}

}  // namespace fedleak::nn

#include "fedleak/nn/conv.h"

#include "fedleak/error.h"
#include "fedleak/nn/linear_map.h"

namespace fedleak::nn {

DenseEquivalent conv_to_dense(const Conv2d& conv, const Shape& input_shape,
                              const LayerTensors& kernel) {
  const LinearMap map(conv, input_shape);
  const Shape wshape{conv.out_channels, conv.in_channels, conv.kernel_size, conv.kernel_size};
  if (kernel.weight.shape() != wshape || kernel.bias.shape() != Shape{conv.out_channels}) {
    throw ConfigError("kernel tensors do not match convolution " + shape_to_string(wshape));
  }
  const std::size_t rows = map.out_size();
  const std::size_t cols = map.in_size();
  Tensor matrix({rows, cols});
  const ConvGeometry& g = map.geometry();
  const auto k = kernel.weight.values();
  auto m = matrix.values();
  const long pad = static_cast<long>(g.padding);
  // Row (co, oy, ox) holds kernel co placed at the receptive field of (oy, ox).
  for (std::size_t co = 0; co < g.out_channels; ++co) {
    for (std::size_t oy = 0; oy < g.out_height; ++oy) {
      for (std::size_t ox = 0; ox < g.out_width; ++ox) {
        double* row = &m[((co * g.out_height + oy) * g.out_width + ox) * cols];
        for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
          for (std::size_t ky = 0; ky < g.kernel; ++ky) {
            const long iy = static_cast<long>(oy * g.stride + ky) - pad;
            if (iy < 0 || iy >= static_cast<long>(g.in_height)) continue;
            for (std::size_t kx = 0; kx < g.kernel; ++kx) {
              const long ix = static_cast<long>(ox * g.stride + kx) - pad;
              if (ix < 0 || ix >= static_cast<long>(g.in_width)) continue;
              row[(ci * g.in_height + iy) * g.in_width + ix] =
                  k[((co * g.in_channels + ci) * g.kernel + ky) * g.kernel + kx];
            }
          }
        }
      }
    }
  }
  Tensor bias({rows});
  map.bias_add(kernel.bias.values(), bias.values());
  return {std::move(matrix), std::move(bias)};
}

}  // namespace fedleak::nn

#pragma once

#include "fedleak/nn/network.h"

namespace fedleak::nn {

// A convolution rewritten as a fully connected layer: for every input x,
// flatten(conv(x)) == matrix * flatten(x) + bias.
struct DenseEquivalent {
  Tensor matrix;  // {out_size, in_size}
  Tensor bias;    // {out_size}, the per-channel bias replicated over positions
};

// Stacks spatially shifted copies of each kernel into the rows of a matrix.
DenseEquivalent conv_to_dense(const Conv2d& conv, const Shape& input_shape,
                              const LayerTensors& kernel);

}  // namespace fedleak::nn

#pragma once

#include "fedleak/data/dataset.h"
#include "fedleak/nn/network.h"
#include "fedleak/nn/tensor.h"

namespace fedleak::eval {

// ||x_rec - x|| / ||x||. Throws MetricError when x is zero or shapes differ.
double rmse(const nn::Tensor& reconstructed, const nn::Tensor& original);

// Fraction of test items whose argmax logit equals the label.
double accuracy(const nn::NetworkSpec& net, const nn::Params& params, const data::Dataset& test);

}  // namespace fedleak::eval

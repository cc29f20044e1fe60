#include "fedleak/eval/metrics.h"

#include <cmath>

#include "fedleak/error.h"
#include "fedleak/nn/engine.h"

namespace fedleak::eval {

double rmse(const nn::Tensor& reconstructed, const nn::Tensor& original) {
  if (reconstructed.size() != original.size()) {
    throw MetricError("rMSE needs congruent tensors");
  }
  const double base = original.norm();
  if (base == 0.0) throw MetricError("rMSE is undefined for an all-zero original");
  double err = 0.0;
  for (std::size_t k = 0; k < original.size(); ++k) {
    const double d = reconstructed[k] - original[k];
    err += d * d;
  }
  return std::sqrt(err) / base;
}

double accuracy(const nn::NetworkSpec& net, const nn::Params& params, const data::Dataset& test) {
  if (test.size() == 0) throw MetricError("accuracy needs a non-empty test set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (nn::predict(net, params, test.image(i).reshaped(net.input_shape())) == test.label(i)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

}  // namespace fedleak::eval

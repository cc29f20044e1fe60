#include "fedleak/nn/tensor.h"

#include <cmath>
#include <numeric>
#include <utility>

#include "fedleak/error.h"

namespace fedleak::nn {

std::size_t shape_size(const Shape& shape) {
  if (shape.empty()) return 0;
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw ConfigError("tensor shape must have at least one extent");
  for (auto extent : shape) {
    if (extent == 0) {
      throw ConfigError("tensor extents must be positive, got " + shape_to_string(shape));
    }
  }
}

}  // namespace

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  check_shape(shape_);
  values_.assign(shape_size(shape_), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  check_shape(shape_);
  if (values_.size() != shape_size(shape_)) {
    throw ConfigError("tensor of shape " + shape_to_string(shape_) + " needs " +
                      std::to_string(shape_size(shape_)) + " values, got " +
                      std::to_string(values_.size()));
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw ConfigError("tensor values must be finite");
  }
}

Tensor Tensor::vector(std::vector<double> values) {
  Shape shape{values.size()};
  return Tensor(std::move(shape), std::move(values));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return vector(std::vector<double>(values));
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != size()) {
    throw ConfigError("cannot reshape " + shape_to_string(shape_) + " to " +
                      shape_to_string(shape));
  }
  Tensor out;
  out.shape_ = std::move(shape);
  out.values_ = values_;
  return out;
}

double Tensor::squared_norm() const {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return s;
}

double Tensor::norm() const { return std::sqrt(squared_norm()); }

}  // namespace fedleak::nn

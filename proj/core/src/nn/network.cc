#include "fedleak/nn/network.h"

#include <cmath>
#include <string>

#include "fedleak/error.h"

namespace fedleak::nn {

std::string_view to_string(Activation activation) {
  switch (activation) {
    case Activation::kIdentity: return "identity";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
  }
  return "identity";
}

Activation parse_activation(std::string_view name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

double activate(Activation activation, double z) {
  switch (activation) {
    case Activation::kIdentity: return z;
    case Activation::kSigmoid: return sigmoid(z);
    case Activation::kTanh: return std::tanh(z);
    case Activation::kRelu: return z > 0 ? z : 0.0;
  }
  return z;
}

double activation_derivative(Activation activation, double z) {
  switch (activation) {
    case Activation::kIdentity: return 1.0;
    case Activation::kSigmoid: {
      const double s = sigmoid(z);
      return s * (1.0 - s);
    }
    case Activation::kTanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::kRelu: return z > 0 ? 1.0 : 0.0;
  }
  return 1.0;
}

double activation_second_derivative(Activation activation, double z) {
  switch (activation) {
    case Activation::kSigmoid: {
      const double s = sigmoid(z);
      return s * (1.0 - s) * (1.0 - 2.0 * s);
    }
    case Activation::kTanh: {
      const double t = std::tanh(z);
      return -2.0 * t * (1.0 - t * t);
    }
    case Activation::kIdentity:
    case Activation::kRelu: return 0.0;
  }
  return 0.0;
}

bool is_trainable(const Layer& layer) { return !std::holds_alternative<Flatten>(layer); }

Activation activation_of(const Layer& layer) {
  if (const auto* d = std::get_if<Dense>(&layer)) return d->activation;
  if (const auto* c = std::get_if<Conv2d>(&layer)) return c->activation;
  return Activation::kIdentity;
}

namespace {

std::string layer_label(std::size_t i) { return "layer " + std::to_string(i); }

Shape propagate(std::size_t i, const Layer& layer, const Shape& in) {
  if (const auto* d = std::get_if<Dense>(&layer)) {
    if (d->in_dim == 0 || d->out_dim == 0) {
      throw ConfigError(layer_label(i) + ": dense dimensions must be positive");
    }
    if (in.size() != 1 || in[0] != d->in_dim) {
      throw ConfigError(layer_label(i) + ": dense expects input [" + std::to_string(d->in_dim) +
                        "], got " + shape_to_string(in));
    }
    return {d->out_dim};
  }
  if (const auto* c = std::get_if<Conv2d>(&layer)) {
    if (c->in_channels == 0 || c->out_channels == 0 || c->kernel_size == 0 || c->stride == 0) {
      throw ConfigError(layer_label(i) + ": conv extents and stride must be positive");
    }
    if (in.size() != 3 || in[0] != c->in_channels) {
      throw ConfigError(layer_label(i) + ": conv expects input with " +
                        std::to_string(c->in_channels) + " channels, got " +
                        shape_to_string(in));
    }
    const auto out_extent = [&](std::size_t extent) -> std::size_t {
      const std::size_t padded = extent + 2 * c->padding;
      if (padded < c->kernel_size) {
        throw ConfigError(layer_label(i) + ": kernel larger than padded input");
      }
      return (padded - c->kernel_size) / c->stride + 1;
    };
    return {c->out_channels, out_extent(in[1]), out_extent(in[2])};
  }
  return {shape_size(in)};
}

}  // namespace

NetworkSpec::NetworkSpec(Shape input_shape, std::vector<Layer> layers)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)) {
  if (layers_.empty()) throw ConfigError("network needs at least one layer");
  if (input_shape_.empty() || shape_size(input_shape_) == 0) {
    throw ConfigError("network input shape must be non-empty with positive extents");
  }
  for (auto extent : input_shape_) {
    if (extent == 0) throw ConfigError("network input extents must be positive");
  }
  shapes_.push_back(input_shape_);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    shapes_.push_back(propagate(i, layers_[i], shapes_.back()));
  }
  if (!std::holds_alternative<Dense>(layers_.back())) {
    throw ConfigError("final layer must be dense (class logits)");
  }
  if (std::get<Dense>(layers_.back()).out_dim < 2) {
    throw ConfigError("final layer must produce at least two classes");
  }
}

std::size_t NetworkSpec::num_classes() const { return std::get<Dense>(layers_.back()).out_dim; }

std::size_t NetworkSpec::feature_dim() const { return std::get<Dense>(layers_.back()).in_dim; }

std::size_t NetworkSpec::first_trainable_layer() const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (is_trainable(layers_[i])) return i;
  }
  return layers_.size();  // unreachable: the last layer is dense
}

Shape NetworkSpec::weight_shape(std::size_t i) const {
  const Layer& layer = layers_.at(i);
  if (const auto* d = std::get_if<Dense>(&layer)) return {d->out_dim, d->in_dim};
  if (const auto* c = std::get_if<Conv2d>(&layer)) {
    return {c->out_channels, c->in_channels, c->kernel_size, c->kernel_size};
  }
  return {};
}

Shape NetworkSpec::bias_shape(std::size_t i) const {
  const Layer& layer = layers_.at(i);
  if (const auto* d = std::get_if<Dense>(&layer)) return {d->out_dim};
  if (const auto* c = std::get_if<Conv2d>(&layer)) return {c->out_channels};
  return {};
}

namespace {

Tensor uniform_tensor(const Shape& shape, std::mt19937_64& rng, double lo, double hi) {
  Tensor t(shape);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

}  // namespace

Params init_params(const NetworkSpec& net, std::mt19937_64& rng, double lo, double hi) {
  Params params;
  params.layers.reserve(net.depth());
  for (std::size_t i = 0; i < net.depth(); ++i) {
    LayerTensors lt;
    if (is_trainable(net.layers()[i])) {
      lt.weight = uniform_tensor(net.weight_shape(i), rng, lo, hi);
      lt.bias = uniform_tensor(net.bias_shape(i), rng, lo, hi);
    }
    params.layers.push_back(std::move(lt));
  }
  return params;
}

LayerTensors init_dense(std::size_t in_dim, std::size_t out_dim, std::mt19937_64& rng,
                        double lo, double hi) {
  return {uniform_tensor({out_dim, in_dim}, rng, lo, hi), uniform_tensor({out_dim}, rng, lo, hi)};
}

void check_params(const NetworkSpec& net, const Params& params) {
  if (params.layers.size() != net.depth()) {
    throw ConfigError("params have " + std::to_string(params.layers.size()) +
                      " layers, network has " + std::to_string(net.depth()));
  }
  for (std::size_t i = 0; i < net.depth(); ++i) {
    const auto& lt = params.layers[i];
    if (lt.weight.shape() != net.weight_shape(i) || lt.bias.shape() != net.bias_shape(i)) {
      throw ConfigError(layer_label(i) + ": parameter shapes " + shape_to_string(lt.weight.shape()) +
                        "/" + shape_to_string(lt.bias.shape()) + " do not match spec " +
                        shape_to_string(net.weight_shape(i)) + "/" +
                        shape_to_string(net.bias_shape(i)));
    }
  }
}

namespace {

Tensor zeros_like(const Tensor& t) { return t.empty() ? Tensor() : Tensor(t.shape()); }

void axpy(double scale, const Tensor& x, Tensor& y) {
  if (x.shape() != y.shape()) throw ConfigError("shape mismatch in parameter update");
  auto yv = y.values();
  auto xv = x.values();
  for (std::size_t k = 0; k < yv.size(); ++k) yv[k] += scale * xv[k];
}

template <typename Layers>
void add_layers(Layers& target, const std::vector<LayerTensors>& delta, double scale) {
  if (target.size() != delta.size()) throw ConfigError("layer count mismatch in update");
  for (std::size_t i = 0; i < target.size(); ++i) {
    axpy(scale, delta[i].weight, target[i].weight);
    axpy(scale, delta[i].bias, target[i].bias);
  }
}

}  // namespace

GradientVector zero_gradient(const Params& params) {
  GradientVector g;
  for (const auto& lt : params.layers) g.layers.push_back({zeros_like(lt.weight), zeros_like(lt.bias)});
  return g;
}

GradientVector difference(const Params& a, const Params& b) {
  if (a.layers.size() != b.layers.size()) throw ConfigError("layer count mismatch in difference");
  GradientVector d;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    LayerTensors lt = a.layers[i];
    axpy(-1.0, b.layers[i].weight, lt.weight);
    axpy(-1.0, b.layers[i].bias, lt.bias);
    d.layers.push_back(std::move(lt));
  }
  return d;
}

void add_scaled(Params& target, const GradientVector& delta, double scale) {
  add_layers(target.layers, delta.layers, scale);
}

void add_scaled(GradientVector& target, const GradientVector& delta, double scale) {
  add_layers(target.layers, delta.layers, scale);
  if (target.private_head && delta.private_head) {
    axpy(scale, delta.private_head->weight, target.private_head->weight);
    axpy(scale, delta.private_head->bias, target.private_head->bias);
  }
}

bool congruent(const GradientVector& a, const GradientVector& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    if (a.layers[i].weight.shape() != b.layers[i].weight.shape() ||
        a.layers[i].bias.shape() != b.layers[i].bias.shape()) {
      return false;
    }
  }
  return true;
}

double squared_norm(const GradientVector& g) {
  double s = 0.0;
  for (const auto& lt : g.layers) s += lt.weight.squared_norm() + lt.bias.squared_norm();
  return s;
}

bool all_finite(const GradientVector& g) {
  const auto finite = [](const Tensor& t) {
    for (double v : t.values()) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  };
  for (const auto& lt : g.layers) {
    if (!finite(lt.weight) || !finite(lt.bias)) return false;
  }
  return true;
}

}  // namespace fedleak::nn

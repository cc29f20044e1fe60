#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <string_view>
#include <variant>
#include <vector>

#include "fedleak/nn/tensor.h"

namespace fedleak::nn {

enum class Activation { kIdentity, kSigmoid, kTanh, kRelu };

std::string_view to_string(Activation activation);
Activation parse_activation(std::string_view name);

double activate(Activation activation, double z);
// First and second derivatives with respect to the pre-activation. ReLU uses
// subgradient 0 at the kink.
double activation_derivative(Activation activation, double z);
double activation_second_derivative(Activation activation, double z);

struct Dense {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  Activation activation = Activation::kIdentity;
};

struct Conv2d {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_size = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;
  Activation activation = Activation::kIdentity;
};

struct Flatten {};

using Layer = std::variant<Dense, Conv2d, Flatten>;

bool is_trainable(const Layer& layer);
Activation activation_of(const Layer& layer);

// Ordered layer list plus the input shape it consumes. Dense layers take
// rank-1 inputs, Conv2d layers take {channels, height, width}; Flatten bridges
// the two. The final layer must be Dense and its width is the class count.
class NetworkSpec {
 public:
  NetworkSpec(Shape input_shape, std::vector<Layer> layers);

  const Shape& input_shape() const { return input_shape_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::size_t depth() const { return layers_.size(); }

  const Shape& layer_input_shape(std::size_t i) const { return shapes_.at(i); }
  const Shape& layer_output_shape(std::size_t i) const { return shapes_.at(i + 1); }

  std::size_t num_classes() const;
  // Width of the vector feeding the final layer; the private SPN head reads it.
  std::size_t feature_dim() const;
  std::size_t first_trainable_layer() const;

  // Empty shapes for parameterless layers.
  Shape weight_shape(std::size_t i) const;
  Shape bias_shape(std::size_t i) const;

 private:
  Shape input_shape_;
  std::vector<Layer> layers_;
  std::vector<Shape> shapes_;  // shapes_[i] feeds layer i; back() is the output
};

// Weights and biases of one layer. Both are empty for Flatten.
struct LayerTensors {
  Tensor weight;
  Tensor bias;

  bool operator==(const LayerTensors&) const = default;
};

struct Params {
  std::vector<LayerTensors> layers;

  bool operator==(const Params&) const = default;
};

// Per-layer loss gradients, congruent with Params. When a private SPN head
// took part in the backward pass its gradient sits in `private_head`.
struct GradientVector {
  std::vector<LayerTensors> layers;
  std::optional<LayerTensors> private_head;

  bool operator==(const GradientVector&) const = default;
};

// Seeded uniform(lo, hi) initialization of every weight and bias.
Params init_params(const NetworkSpec& net, std::mt19937_64& rng, double lo = -0.3,
                   double hi = 0.3);
LayerTensors init_dense(std::size_t in_dim, std::size_t out_dim, std::mt19937_64& rng,
                        double lo = -0.3, double hi = 0.3);

// Throws ConfigError unless params match the spec's shapes.
void check_params(const NetworkSpec& net, const Params& params);

GradientVector zero_gradient(const Params& params);
// a - b, layer by layer.
GradientVector difference(const Params& a, const Params& b);
void add_scaled(Params& target, const GradientVector& delta, double scale);
void add_scaled(GradientVector& target, const GradientVector& delta, double scale);
bool congruent(const GradientVector& a, const GradientVector& b);
double squared_norm(const GradientVector& g);
bool all_finite(const GradientVector& g);

}  // namespace fedleak::nn

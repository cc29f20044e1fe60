#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fedleak/defense/mechanism.h"
#include "fedleak/nn/network.h"

namespace fedleak::attack {

// Squared distance between an observed shared gradient and the mean
// cross-entropy gradient of a batch of dummy inputs with soft labels,
//
//   L(x, l) = sum over transmitted entries of (g(x, softmax(l)) - G)^2,
//
// as a function of the flat variable vector [x_1 .. x_B, l_1 .. l_B]. Only
// public parameters are involved; the dummy loss is always plain
// cross-entropy.
class GradientMatchObjective {
 public:
  GradientMatchObjective(nn::NetworkSpec net, nn::Params public_params,
                         const defense::SharedUpdate& observed, std::size_t batch_size);

  std::size_t batch_size() const { return batch_; }
  std::size_t input_size() const { return input_size_; }
  std::size_t num_classes() const { return classes_; }
  std::size_t num_variables() const { return batch_ * (input_size_ + classes_); }
  const nn::NetworkSpec& network() const { return net_; }

  // Offsets into the flat variable vector.
  std::size_t input_offset(std::size_t item) const { return item * input_size_; }
  std::size_t label_offset(std::size_t item) const {
    return batch_ * input_size_ + item * classes_;
  }

  double value(std::span<const double> z) const;
  // Exact gradient by differentiating through the backward pass. Returns the
  // value.
  double value_and_gradient(std::span<const double> z, std::span<double> grad) const;
  // Central differences with step h.
  void finite_difference_gradient(std::span<const double> z, double h,
                                  std::span<double> grad) const;

 private:
  struct Item;

  void dummy_gradient(std::span<const double> z, std::vector<Item>* items,
                      std::vector<std::vector<double>>& gw,
                      std::vector<std::vector<double>>& gb) const;

  nn::NetworkSpec net_;
  nn::Params params_;
  std::size_t batch_;
  std::size_t input_size_;
  std::size_t classes_;
  std::vector<std::vector<double>> target_w_, target_b_;
  std::vector<std::vector<double>> mask_w_, mask_b_;  // 1 where transmitted
};

}  // namespace fedleak::attack

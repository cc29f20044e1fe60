#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fedleak/nn/tensor.h"

namespace fedleak::nn {

// A K-bit code with entries in {-1, +1}.
using Code = std::vector<int>;

struct SpnConfig;

// Max-subtracted softmax.
std::vector<double> softmax(std::span<const double> logits);

// -log softmax(u)_y via log-sum-exp. Throws ConfigError if y >= |u|.
double ce_loss(const Tensor& logits, std::size_t label);
// d ce_loss / d logits = softmax(u) - onehot(y).
std::vector<double> ce_gradient(const Tensor& logits, std::size_t label);

// sum_k max(m - v_k * t_k, 0). Requires m >= 1 and |v| == |t|.
double polarization_loss(const Tensor& v, const Code& target, double margin);
// Subgradient: -t_k where the hinge is active (m - v_k t_k > 0), else 0.
std::vector<double> polarization_gradient(const Tensor& v, const Code& target, double margin);

// alpha1 * ce_loss(u, y) + alpha2 * polarization_loss(v, t_y, m).
double composite_loss(const Tensor& logits, std::size_t label, const Tensor& v,
                      const SpnConfig& spn);

// Sign threshold at zero; ties map to +1.
Code binarize(const Tensor& v);
// 1/2 (K - b.t). Throws ConfigError on length mismatch or non-binary entries.
int hamming_distance(const Code& b, const Code& t);

}  // namespace fedleak::nn

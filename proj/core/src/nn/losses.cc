#include "fedleak/nn/losses.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedleak/error.h"
#include "fedleak/nn/spn.h"

namespace fedleak::nn {

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.begin(), logits.end());
  if (out.empty()) return out;
  const double mx = *std::max_element(out.begin(), out.end());
  double sum = 0.0;
  for (double& v : out) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : out) v /= sum;
  return out;
}

namespace {

void check_label(const Tensor& logits, std::size_t label) {
  if (label >= logits.size()) {
    throw ConfigError("label " + std::to_string(label) + " out of range for " +
                      std::to_string(logits.size()) + " classes");
  }
}

void check_code(const Tensor& v, const Code& target, double margin) {
  if (v.size() != target.size()) {
    throw ConfigError("polarization output has " + std::to_string(v.size()) +
                      " entries, target code has " + std::to_string(target.size()));
  }
  if (!(margin >= 1.0)) throw ConfigError("polarization margin must be >= 1");
}

}  // namespace

double ce_loss(const Tensor& logits, std::size_t label) {
  check_label(logits, label);
  const auto u = logits.values();
  const double mx = *std::max_element(u.begin(), u.end());
  double sum = 0.0;
  for (double v : u) sum += std::exp(v - mx);
  return mx + std::log(sum) - u[label];
}

std::vector<double> ce_gradient(const Tensor& logits, std::size_t label) {
  check_label(logits, label);
  auto g = softmax(logits.values());
  g[label] -= 1.0;
  return g;
}

double polarization_loss(const Tensor& v, const Code& target, double margin) {
  check_code(v, target, margin);
  double loss = 0.0;
  for (std::size_t k = 0; k < target.size(); ++k) {
    loss += std::max(margin - v[k] * target[k], 0.0);
  }
  return loss;
}

std::vector<double> polarization_gradient(const Tensor& v, const Code& target, double margin) {
  check_code(v, target, margin);
  std::vector<double> g(target.size(), 0.0);
  for (std::size_t k = 0; k < target.size(); ++k) {
    if (margin - v[k] * target[k] > 0.0) g[k] = -static_cast<double>(target[k]);
  }
  return g;
}

double composite_loss(const Tensor& logits, std::size_t label, const Tensor& v,
                      const SpnConfig& spn) {
  check_label(logits, label);
  if (label >= spn.codes.size()) throw ConfigError("no target code for label");
  double loss = spn.alpha1 * ce_loss(logits, label);
  if (spn.alpha2 != 0.0) loss += spn.alpha2 * polarization_loss(v, spn.codes[label], spn.margin);
  return loss;
}

Code binarize(const Tensor& v) {
  Code b(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) b[k] = v[k] >= 0.0 ? 1 : -1;
  return b;
}

int hamming_distance(const Code& b, const Code& t) {
  if (b.size() != t.size()) throw ConfigError("hamming distance needs equal-length codes");
  int dot = 0;
  for (std::size_t k = 0; k < b.size(); ++k) {
    if ((b[k] != 1 && b[k] != -1) || (t[k] != 1 && t[k] != -1)) {
      throw ConfigError("hamming distance needs entries in {-1, +1}");
    }
    dot += b[k] * t[k];
  }
  return (static_cast<int>(b.size()) - dot) / 2;
}

}  // namespace fedleak::nn

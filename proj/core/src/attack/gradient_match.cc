#include "fedleak/attack/gradient_match.h"

#include <algorithm>
#include <string>

#include "fedleak/error.h"
#include "fedleak/nn/linear_map.h"
#include "fedleak/nn/losses.h"

namespace fedleak::attack {

namespace {

// J_s v for the softmax Jacobian at s = softmax(w).
std::vector<double> softmax_jvp(const std::vector<double>& s, const std::vector<double>& v) {
  double dot = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) dot += s[k] * v[k];
  std::vector<double> out(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) out[k] = s[k] * (v[k] - dot);
  return out;
}

std::vector<double> mask_values(const std::vector<std::uint8_t>& mask, std::size_t n) {
  if (mask.empty()) return std::vector<double>(n, 1.0);
  if (mask.size() != n) throw ConfigError("transmission mask does not match gradient size");
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = mask[k] ? 1.0 : 0.0;
  return out;
}

}  // namespace

struct GradientMatchObjective::Item {
  std::vector<std::vector<double>> o;      // o[i] feeds layer i; o[L] are the logits
  std::vector<std::vector<double>> z;      // pre-activations, empty for Flatten
  std::vector<std::vector<double>> a;      // a[i] = dLoss/do[i]
  std::vector<std::vector<double>> delta;  // dLoss/dz[i]
  std::vector<double> s_u;                 // softmax of the logits
  std::vector<double> p;                   // soft label
};

GradientMatchObjective::GradientMatchObjective(nn::NetworkSpec net, nn::Params public_params,
                                               const defense::SharedUpdate& observed,
                                               std::size_t batch_size)
    : net_(std::move(net)), params_(std::move(public_params)), batch_(batch_size) {
  nn::check_params(net_, params_);
  if (batch_ == 0) throw ConfigError("attack batch size must be positive");
  input_size_ = nn::shape_size(net_.input_shape());
  classes_ = net_.num_classes();
  const auto& g = observed.gradients;
  if (g.layers.size() != net_.depth()) throw ConfigError("observed gradient depth mismatch");
  if (observed.has_mask() && observed.mask.size() != net_.depth()) {
    throw ConfigError("observed mask depth mismatch");
  }
  const std::size_t depth = net_.depth();
  target_w_.resize(depth);
  target_b_.resize(depth);
  mask_w_.resize(depth);
  mask_b_.resize(depth);
  for (std::size_t i = 0; i < depth; ++i) {
    if (!nn::is_trainable(net_.layers()[i])) continue;
    const auto& lt = g.layers[i];
    if (lt.weight.shape() != net_.weight_shape(i) || lt.bias.shape() != net_.bias_shape(i)) {
      throw ConfigError("observed gradient shape mismatch at layer " + std::to_string(i));
    }
    target_w_[i] = lt.weight.data();
    target_b_[i] = lt.bias.data();
    const defense::LayerMask empty;
    const auto& m = observed.has_mask() ? observed.mask[i] : empty;
    mask_w_[i] = mask_values(m.weight, lt.weight.size());
    mask_b_[i] = mask_values(m.bias, lt.bias.size());
  }
}

void GradientMatchObjective::dummy_gradient(std::span<const double> z,
                                            std::vector<Item>* items,
                                            std::vector<std::vector<double>>& gw,
                                            std::vector<std::vector<double>>& gb) const {
  if (z.size() != num_variables()) throw ConfigError("attack variable vector has wrong length");
  const std::size_t depth = net_.depth();
  gw.assign(depth, {});
  gb.assign(depth, {});
  for (std::size_t i = 0; i < depth; ++i) {
    gw[i].assign(target_w_[i].size(), 0.0);
    gb[i].assign(target_b_[i].size(), 0.0);
  }
  if (items != nullptr) items->assign(batch_, {});
  const double scale = 1.0 / static_cast<double>(batch_);

  for (std::size_t j = 0; j < batch_; ++j) {
    Item local;
    Item& it = items != nullptr ? (*items)[j] : local;
    it.o.assign(depth + 1, {});
    it.z.assign(depth, {});
    it.a.assign(depth + 1, {});
    it.delta.assign(depth, {});
    it.o[0].assign(z.begin() + input_offset(j), z.begin() + input_offset(j) + input_size_);
    for (std::size_t i = 0; i < depth; ++i) {
      const nn::Layer& layer = net_.layers()[i];
      if (!nn::is_trainable(layer)) {
        it.o[i + 1] = it.o[i];
        continue;
      }
      const nn::LinearMap map(net_, i);
      const nn::Activation act = nn::activation_of(layer);
      it.z[i].assign(map.out_size(), 0.0);
      map.apply(params_.layers[i].weight.values(), it.o[i], it.z[i]);
      map.bias_add(params_.layers[i].bias.values(), it.z[i]);
      it.o[i + 1].resize(map.out_size());
      for (std::size_t k = 0; k < map.out_size(); ++k) it.o[i + 1][k] = nn::activate(act, it.z[i][k]);
    }
    it.s_u = nn::softmax(it.o[depth]);
    it.p = nn::softmax(z.subspan(label_offset(j), classes_));
    it.a[depth].resize(classes_);
    for (std::size_t k = 0; k < classes_; ++k) it.a[depth][k] = it.s_u[k] - it.p[k];
    for (std::size_t i = depth; i-- > 0;) {
      const nn::Layer& layer = net_.layers()[i];
      if (!nn::is_trainable(layer)) {
        it.a[i] = it.a[i + 1];
        continue;
      }
      const nn::LinearMap map(net_, i);
      const nn::Activation act = nn::activation_of(layer);
      auto& d = it.delta[i];
      d.resize(map.out_size());
      for (std::size_t k = 0; k < d.size(); ++k) {
        d[k] = it.a[i + 1][k] * nn::activation_derivative(act, it.z[i][k]);
      }
      map.weight_gradient_add(d, it.o[i], gw[i]);
      map.bias_gradient_add(d, gb[i]);
      it.a[i].assign(map.in_size(), 0.0);
      if (i > 0) map.apply_transpose_add(params_.layers[i].weight.values(), d, it.a[i]);
    }
  }
  for (std::size_t i = 0; i < depth; ++i) {
    for (double& v : gw[i]) v *= scale;
    for (double& v : gb[i]) v *= scale;
  }
}

double GradientMatchObjective::value(std::span<const double> z) const {
  std::vector<std::vector<double>> gw, gb;
  dummy_gradient(z, nullptr, gw, gb);
  double loss = 0.0;
  for (std::size_t i = 0; i < net_.depth(); ++i) {
    for (std::size_t k = 0; k < gw[i].size(); ++k) {
      const double r = mask_w_[i][k] * (gw[i][k] - target_w_[i][k]);
      loss += r * r;
    }
    for (std::size_t k = 0; k < gb[i].size(); ++k) {
      const double r = mask_b_[i][k] * (gb[i][k] - target_b_[i][k]);
      loss += r * r;
    }
  }
  return loss;
}

double GradientMatchObjective::value_and_gradient(std::span<const double> z,
                                                  std::span<double> grad) const {
  if (grad.size() != num_variables()) throw ConfigError("gradient buffer has wrong length");
  std::vector<Item> items;
  std::vector<std::vector<double>> gw, gb;
  dummy_gradient(z, &items, gw, gb);
  const std::size_t depth = net_.depth();
  const double scale = 1.0 / static_cast<double>(batch_);

  // Adjoints of the mean dummy gradient, already divided by the batch size so
  // they apply to each item's contribution directly.
  double loss = 0.0;
  std::vector<std::vector<double>> bar_gw(depth), bar_gb(depth);
  for (std::size_t i = 0; i < depth; ++i) {
    bar_gw[i].resize(gw[i].size());
    bar_gb[i].resize(gb[i].size());
    for (std::size_t k = 0; k < gw[i].size(); ++k) {
      const double r = mask_w_[i][k] * (gw[i][k] - target_w_[i][k]);
      loss += r * r;
      bar_gw[i][k] = 2.0 * mask_w_[i][k] * r * scale;
    }
    for (std::size_t k = 0; k < gb[i].size(); ++k) {
      const double r = mask_b_[i][k] * (gb[i][k] - target_b_[i][k]);
      loss += r * r;
      bar_gb[i][k] = 2.0 * mask_b_[i][k] * r * scale;
    }
  }

  for (std::size_t j = 0; j < batch_; ++j) {
    const Item& it = items[j];
    std::vector<std::vector<double>> bar_o(depth + 1), bar_zb(depth);
    for (std::size_t i = 0; i <= depth; ++i) bar_o[i].assign(it.o[i].size(), 0.0);

    // Reverse of the backward pass, visited in forward order.
    std::vector<double> bar_a(it.o[0].size(), 0.0);
    for (std::size_t i = 0; i < depth; ++i) {
      const nn::Layer& layer = net_.layers()[i];
      if (!nn::is_trainable(layer)) continue;  // bar_a carries over unchanged
      const nn::LinearMap map(net_, i);
      const nn::Activation act = nn::activation_of(layer);
      const auto w = params_.layers[i].weight.values();
      std::vector<double> bar_delta(map.out_size(), 0.0);
      if (i > 0) map.apply(w, bar_a, bar_delta);
      map.bias_broadcast_add(bar_gb[i], bar_delta);
      std::vector<double> tmp(map.out_size(), 0.0);
      map.apply(bar_gw[i], it.o[i], tmp);
      for (std::size_t k = 0; k < tmp.size(); ++k) bar_delta[k] += tmp[k];
      map.apply_transpose_add(bar_gw[i], it.delta[i], bar_o[i]);

      bar_zb[i].resize(map.out_size());
      bar_a.assign(map.out_size(), 0.0);
      for (std::size_t k = 0; k < map.out_size(); ++k) {
        const double zk = it.z[i][k];
        bar_a[k] = bar_delta[k] * nn::activation_derivative(act, zk);
        bar_zb[i][k] = bar_delta[k] * it.a[i + 1][k] * nn::activation_second_derivative(act, zk);
      }
    }

    // a[L] = softmax(u) - softmax(l).
    const std::vector<double> bar_u = softmax_jvp(it.s_u, bar_a);
    const std::vector<double> bar_p = softmax_jvp(it.p, bar_a);
    for (std::size_t k = 0; k < classes_; ++k) grad[label_offset(j) + k] = -bar_p[k];
    for (std::size_t k = 0; k < classes_; ++k) bar_o[depth][k] += bar_u[k];

    // Reverse of the forward pass.
    for (std::size_t i = depth; i-- > 0;) {
      const nn::Layer& layer = net_.layers()[i];
      if (!nn::is_trainable(layer)) {
        for (std::size_t k = 0; k < bar_o[i].size(); ++k) bar_o[i][k] += bar_o[i + 1][k];
        continue;
      }
      const nn::LinearMap map(net_, i);
      const nn::Activation act = nn::activation_of(layer);
      std::vector<double> bar_z(map.out_size());
      for (std::size_t k = 0; k < bar_z.size(); ++k) {
        bar_z[k] = bar_o[i + 1][k] * nn::activation_derivative(act, it.z[i][k]) + bar_zb[i][k];
      }
      map.apply_transpose_add(params_.layers[i].weight.values(), bar_z, bar_o[i]);
    }
    std::copy(bar_o[0].begin(), bar_o[0].end(), grad.begin() + input_offset(j));
  }
  return loss;
}

void GradientMatchObjective::finite_difference_gradient(std::span<const double> z, double h,
                                                        std::span<double> grad) const {
  if (!(h > 0.0)) throw ConfigError("finite-difference step must be positive");
  if (grad.size() != num_variables()) throw ConfigError("gradient buffer has wrong length");
  std::vector<double> probe(z.begin(), z.end());
  for (std::size_t k = 0; k < probe.size(); ++k) {
    const double saved = probe[k];
    probe[k] = saved + h;
    const double up = value(probe);
    probe[k] = saved - h;
    const double down = value(probe);
    probe[k] = saved;
    grad[k] = (up - down) / (2.0 * h);
  }
}

}  // namespace fedleak::attack

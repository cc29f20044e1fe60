#include "fedleak/nn/engine.h"

#include <algorithm>
#include <string>

#include "fedleak/error.h"
#include "fedleak/nn/linear_map.h"
#include "fedleak/nn/losses.h"

namespace fedleak::nn {

namespace {

Tensor head_forward(const SpnConfig& spn, const Tensor& feature) {
  const std::size_t k = spn.bits;
  const std::size_t d = feature.size();
  Tensor v({k});
  const auto w = spn.head.weight.values();
  for (std::size_t r = 0; r < k; ++r) {
    double acc = spn.head.bias[r];
    for (std::size_t c = 0; c < d; ++c) acc += w[r * d + c] * feature[c];
    v[r] = acc;
  }
  return v;
}

}  // namespace

ForwardResult forward(const NetworkSpec& net, const Params& params, const Tensor& x,
                      const SpnConfig* spn) {
  check_params(net, params);
  if (x.shape() != net.input_shape()) {
    throw ConfigError("input shape " + shape_to_string(x.shape()) + " does not match network input " +
                      shape_to_string(net.input_shape()));
  }
  if (spn != nullptr) spn->validate(net.feature_dim(), net.num_classes());

  ForwardResult result;
  ForwardTrace& trace = result.trace;
  Tensor current = x;
  for (std::size_t i = 0; i < net.depth(); ++i) {
    const Layer& layer = net.layers()[i];
    trace.inputs.push_back(current);
    if (!is_trainable(layer)) {
      trace.pre_activations.emplace_back();
      current = current.reshaped(net.layer_output_shape(i));
      trace.outputs.push_back(current);
      continue;
    }
    const LinearMap map(net, i);
    Tensor z(net.layer_output_shape(i));
    map.apply(params.layers[i].weight.values(), current.values(), z.values());
    map.bias_add(params.layers[i].bias.values(), z.values());
    const Activation act = activation_of(layer);
    Tensor out(z.shape());
    for (std::size_t k = 0; k < z.size(); ++k) out[k] = activate(act, z[k]);
    trace.pre_activations.push_back(std::move(z));
    trace.outputs.push_back(out);
    current = std::move(out);
  }
  result.logits = current;
  if (spn != nullptr) result.codes = head_forward(*spn, trace.inputs.back());
  return result;
}

double example_loss(const ForwardResult& result, std::size_t label, const SpnConfig* spn) {
  if (spn == nullptr) return ce_loss(result.logits, label);
  if (!result.codes) throw ConfigError("forward result has no SPN output");
  return composite_loss(result.logits, label, *result.codes, *spn);
}

GradientVector backward(const NetworkSpec& net, const Params& params, const ForwardResult& result,
                        std::size_t label, const SpnConfig* spn) {
  check_params(net, params);
  const ForwardTrace& trace = result.trace;
  if (trace.inputs.size() != net.depth() || trace.outputs.size() != net.depth() ||
      trace.pre_activations.size() != net.depth()) {
    throw ConfigError("stale forward trace: depth does not match network");
  }
  for (std::size_t i = 0; i < net.depth(); ++i) {
    if (trace.inputs[i].shape() != net.layer_input_shape(i) ||
        trace.outputs[i].shape() != net.layer_output_shape(i)) {
      throw ConfigError("stale forward trace: shape drift at layer " + std::to_string(i));
    }
  }
  if (spn != nullptr) {
    spn->validate(net.feature_dim(), net.num_classes());
    if (!result.codes) throw ConfigError("forward result has no SPN output");
  }

  const double alpha1 = spn != nullptr ? spn->alpha1 : 1.0;
  GradientVector grad = zero_gradient(params);

  // Adjoint of the current layer's output, starting from the logits.
  std::vector<double> adj = ce_gradient(result.logits, label);
  for (double& a : adj) a *= alpha1;

  std::vector<double> head_adj;  // adjoint the private head sends to the feature
  if (spn != nullptr) {
    const Tensor& feature = trace.inputs.back();
    const Tensor& v = *result.codes;
    auto dv = polarization_gradient(v, spn->codes.at(label), spn->margin);
    for (double& g : dv) g *= spn->alpha2;
    LayerTensors head_grad{Tensor(spn->head.weight.shape()), Tensor(spn->head.bias.shape())};
    const std::size_t d = feature.size();
    head_adj.assign(d, 0.0);
    const auto w = spn->head.weight.values();
    auto gw = head_grad.weight.values();
    for (std::size_t r = 0; r < spn->bits; ++r) {
      head_grad.bias[r] = dv[r];
      if (dv[r] == 0.0) continue;
      for (std::size_t c = 0; c < d; ++c) {
        gw[r * d + c] = dv[r] * feature[c];
        head_adj[c] += w[r * d + c] * dv[r];
      }
    }
    grad.private_head = std::move(head_grad);
  }

  for (std::size_t idx = net.depth(); idx-- > 0;) {
    const Layer& layer = net.layers()[idx];
    if (is_trainable(layer)) {
      const LinearMap map(net, idx);
      const Activation act = activation_of(layer);
      const Tensor& z = trace.pre_activations[idx];
      std::vector<double> delta(z.size());
      for (std::size_t k = 0; k < z.size(); ++k) delta[k] = adj[k] * activation_derivative(act, z[k]);
      map.weight_gradient_add(delta, trace.inputs[idx].values(), grad.layers[idx].weight.values());
      map.bias_gradient_add(delta, grad.layers[idx].bias.values());
      std::vector<double> prev(map.in_size(), 0.0);
      if (idx > 0 || (spn != nullptr && idx + 1 == net.depth())) {
        map.apply_transpose_add(params.layers[idx].weight.values(), delta, prev);
      }
      adj = std::move(prev);
    }
    // Flatten passes the adjoint through unchanged.
    if (idx + 1 == net.depth() && spn != nullptr) {
      for (std::size_t c = 0; c < adj.size(); ++c) adj[c] += head_adj[c];
    }
  }
  return grad;
}

BatchGradient batch_gradient(const NetworkSpec& net, const Params& params,
                             std::span<const Tensor> inputs, std::span<const std::size_t> labels,
                             const SpnConfig* spn) {
  if (inputs.empty()) throw ConfigError("batch must not be empty");
  if (inputs.size() != labels.size()) throw ConfigError("batch inputs and labels differ in length");
  BatchGradient out;
  out.gradient = zero_gradient(params);
  if (spn != nullptr) {
    out.gradient.private_head = LayerTensors{Tensor(spn->head.weight.shape()),
                                             Tensor(spn->head.bias.shape())};
  }
  const double scale = 1.0 / static_cast<double>(inputs.size());
  for (std::size_t n = 0; n < inputs.size(); ++n) {
    const ForwardResult fr = forward(net, params, inputs[n], spn);
    out.loss += scale * example_loss(fr, labels[n], spn);
    add_scaled(out.gradient, backward(net, params, fr, labels[n], spn), scale);
  }
  return out;
}

std::size_t predict(const NetworkSpec& net, const Params& params, const Tensor& x) {
  const ForwardResult fr = forward(net, params, x);
  const auto u = fr.logits.values();
  return static_cast<std::size_t>(std::max_element(u.begin(), u.end()) - u.begin());
}

}  // namespace fedleak::nn

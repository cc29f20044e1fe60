#include "fedleak/attack/reconstruction.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fedleak/error.h"

namespace fedleak::attack {

ReconstructionSystem extract_system(const nn::GradientVector& shared, const nn::NetworkSpec& net,
                                    double threshold) {
  const std::size_t layer = net.first_trainable_layer();
  const auto* dense = std::get_if<nn::Dense>(&net.layers().at(layer));
  if (dense == nullptr) {
    throw ConfigError("analytic reconstruction needs a dense first trainable layer "
                      "(convert convolutions with conv_to_dense first)");
  }
  if (shared.layers.size() != net.depth() ||
      shared.layers[layer].weight.shape() != net.weight_shape(layer) ||
      shared.layers[layer].bias.shape() != net.bias_shape(layer)) {
    throw ConfigError("shared gradient does not match the network");
  }
  const nn::Tensor& gw = shared.layers[layer].weight;
  const nn::Tensor& gb = shared.layers[layer].bias;
  ReconstructionSystem system;
  system.layer = layer;
  system.input_dim = dense->in_dim;
  for (std::size_t m = 0; m < dense->out_dim; ++m) {
    if (std::abs(gb[m]) <= threshold) continue;
    system.rows.push_back(m);
    system.bias.push_back(gb[m]);
    auto w = gw.values().subspan(m * dense->in_dim, dense->in_dim);
    system.weight.insert(system.weight.end(), w.begin(), w.end());
  }
  if (system.rows.empty()) {
    throw DegenerateSystemError("degenerate system: every bias gradient is below the selection "
                                "threshold, so the bias gradient is singular");
  }
  return system;
}

nn::Tensor analytic_reconstruct(const ReconstructionSystem& system) {
  if (system.rows.empty()) throw DegenerateSystemError("degenerate system: no rows selected");
  const std::size_t rows = system.size();
  const std::size_t d = system.input_dim;
  nn::Tensor x({d});
  std::vector<double> estimates(rows);
  for (std::size_t n = 0; n < d; ++n) {
    for (std::size_t m = 0; m < rows; ++m) estimates[m] = system.weight[m * d + n] / system.bias[m];
    std::sort(estimates.begin(), estimates.end());
    x[n] = rows % 2 == 1 ? estimates[rows / 2]
                         : 0.5 * (estimates[rows / 2 - 1] + estimates[rows / 2]);
  }
  return x;
}

SystemError system_error(const ReconstructionSystem& clean, const nn::GradientVector& observed) {
  if (clean.layer >= observed.layers.size()) throw ConfigError("observed gradient too shallow");
  const nn::Tensor& gw = observed.layers[clean.layer].weight;
  const nn::Tensor& gb = observed.layers[clean.layer].bias;
  const std::size_t d = clean.input_dim;
  if (gw.size() % d != 0 || gb.size() * d != gw.size()) {
    throw ConfigError("observed gradient does not match the system");
  }
  SystemError err;
  for (std::size_t k = 0; k < clean.size(); ++k) {
    const std::size_t m = clean.rows[k];
    err.bias.push_back(gb[m] - clean.bias[k]);
    for (std::size_t n = 0; n < d; ++n) {
      err.weight.push_back(gw[m * d + n] - clean.weight[k * d + n]);
    }
  }
  return err;
}

namespace {

void check_nonsingular(const ReconstructionSystem& system) {
  if (system.bias.empty()) throw DegenerateSystemError("degenerate system: no rows");
  for (double b : system.bias) {
    if (b == 0.0) throw DegenerateSystemError("bias gradient entry is zero; B_I is singular");
  }
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double l2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

double condition_value(const ReconstructionSystem& system, std::span<const double> bias_error) {
  check_nonsingular(system);
  if (bias_error.size() != system.size()) throw ConfigError("E_B length differs from |I|");
  double c = 0.0;
  for (std::size_t m = 0; m < system.size(); ++m) {
    c = std::max(c, std::abs(bias_error[m] / system.bias[m]));
  }
  return c;
}

double condition_number(const ReconstructionSystem& system) {
  check_nonsingular(system);
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (double b : system.bias) {
    lo = std::min(lo, std::abs(b));
    hi = std::max(hi, std::abs(b));
  }
  return hi / lo;
}

double error_bound(const ReconstructionSystem& system, std::span<const double> bias_error,
                   std::span<const double> weight_error) {
  const double c = condition_value(system, bias_error);
  if (weight_error.size() != system.weight.size()) throw ConfigError("E_W size differs from W_I");
  if (c >= 1.0) return std::numeric_limits<double>::infinity();
  const double kappa = condition_number(system);
  const double w_norm = l2(system.weight);
  const double ew = l2(weight_error);
  double w_term = 0.0;
  if (ew > 0.0) {
    if (w_norm == 0.0) return std::numeric_limits<double>::infinity();
    w_term = ew / w_norm;
  }
  return kappa / (1.0 - c) * (max_abs(bias_error) / max_abs(system.bias) + w_term);
}

}  // namespace fedleak::attack

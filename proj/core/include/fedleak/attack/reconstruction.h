#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fedleak/nn/network.h"

namespace fedleak::attack {

inline constexpr double kSelectionThreshold = 1e-8;

// Rows of the output equation grad_w[m, :] = grad_b[m] * x for the first
// trainable (dense) layer, restricted to rows with |grad_b[m]| > threshold.
struct ReconstructionSystem {
  std::size_t layer = 0;
  std::vector<std::size_t> rows;     // selected output units I
  std::vector<double> bias;          // B_I, one entry per selected row
  std::vector<double> weight;        // W_I, row-major |I| x input_dim
  std::size_t input_dim = 0;

  std::size_t size() const { return rows.size(); }
};

// Throws DegenerateSystemError when no row clears the threshold and
// ConfigError when the first trainable layer is not dense. Assumes the
// gradient came from a single example.
ReconstructionSystem extract_system(const nn::GradientVector& shared, const nn::NetworkSpec& net,
                                    double threshold = kSelectionThreshold);

// Per input coordinate, the median over rows of W_I[m, n] / B_I[m].
// Shape {input_dim}.
nn::Tensor analytic_reconstruct(const ReconstructionSystem& system);

// Perturbations of an observed system relative to the clean one, aligned
// with the clean system's rows.
struct SystemError {
  std::vector<double> bias;    // E_B
  std::vector<double> weight;  // E_W, row-major like W_I
};

SystemError system_error(const ReconstructionSystem& clean, const nn::GradientVector& observed);

// Treating B_I as the diagonal matrix that repeats each entry across its row:
//   condition = ||B_I^-1 E_B|| = max_m |E_B[m] / B_I[m]|
//   kappa     = max |B_I| / min |B_I|
//   bound     = kappa / (1 - condition) * (max|E_B| / max|B_I| + ||E_W|| / ||W_I||)
// with the bound +inf once condition >= 1. Throws DegenerateSystemError if
// some B_I entry is zero.
double condition_value(const ReconstructionSystem& system, std::span<const double> bias_error);
double condition_number(const ReconstructionSystem& system);
double error_bound(const ReconstructionSystem& system, std::span<const double> bias_error,
                   std::span<const double> weight_error);

}  // namespace fedleak::attack

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cryptoens::nn {

struct AdamConfig {
  double base_lr = 5e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t total_steps = 1;  // linear decay horizon
  double floor_fraction = 0.01; // LR never drops below base_lr * floor_fraction
};

struct OptimizerState {
  AdamConfig cfg;
  std::vector<double> m;
  std::vector<double> v;
  std::size_t step = 0;     // completed updates
  std::size_t skipped = 0;  // updates rejected for non-finite gradients

  OptimizerState() = default;
  OptimizerState(const AdamConfig& c, std::size_t n) : cfg(c), m(n, 0.0), v(n, 0.0) {}

  /// base * max(floor, 1 - step / total_steps)
  double learning_rate() const;
};

/// Bias-corrected Adam update. Returns false (and counts a skip) if any gradient is
/// non-finite, leaving weights and moments untouched.
bool adam_step(OptimizerState& opt, std::span<double> weights, std::span<const double> grads);

}  // namespace cryptoens::nn

#include "cryptoens/adam.hpp"

#include <algorithm>
#include <cmath>

#include "cryptoens/errors.hpp"

namespace cryptoens::nn {

double OptimizerState::learning_rate() const {
  const double horizon = static_cast<double>(std::max<std::size_t>(cfg.total_steps, 1));
  const double frac = 1.0 - static_cast<double>(step) / horizon;
  return cfg.base_lr * std::max(cfg.floor_fraction, std::max(0.0, frac));
}

bool adam_step(OptimizerState& opt, std::span<double> weights, std::span<const double> grads) {
  if (weights.size() != grads.size() || opt.m.size() != weights.size())
    throw ModelError("adam_step: shape mismatch");
  for (double g : grads) {
    if (!std::isfinite(g)) {
      ++opt.skipped;
      return false;
    }
  }
  const double lr = opt.learning_rate();
  const auto& c = opt.cfg;
  const double t = static_cast<double>(opt.step + 1);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    opt.m[i] = c.beta1 * opt.m[i] + (1.0 - c.beta1) * grads[i];
    opt.v[i] = c.beta2 * opt.v[i] + (1.0 - c.beta2) * grads[i] * grads[i];
    const double mhat = opt.m[i] / bc1;
    const double vhat = opt.v[i] / bc2;
    weights[i] -= lr * mhat / (std::sqrt(vhat) + c.eps);
  }
  ++opt.step;
  return true;
}

}  // namespace cryptoens::nn

#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

/// A_t = sum_{l >= 0} (gamma lambda)^l delta_{t+l}, evaluated as an explicit double sum with
/// every power recomputed from scratch.
inline std::vector<double> gae_double_sum(const std::vector<double>& r, const std::vector<double>& v,
                                          double bootstrap, double gamma, double lambda) {
  const std::size_t n = r.size();
  std::vector<double> delta(n), adv(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double next = t + 1 < n ? v[t + 1] : bootstrap;
    delta[t] = r[t] + gamma * next - v[t];
  }
  for (std::size_t t = 0; t < n; ++t) {
    long double acc = 0;
    for (std::size_t l = 0; t + l < n; ++l)
      acc += std::pow(static_cast<long double>(gamma) * lambda, static_cast<long double>(l)) * delta[t + l];
    adv[t] = static_cast<double>(acc);
  }
  return adv;
}

/// Sequential sells-then-buys reference for one trade: sells execute one at a time in
/// asset order, then the buys are priced; when unaffordable every buy receives the same
/// fraction balance / cost.
struct Account {
  std::vector<double> h;
  double b = 0;
};

inline Account trade_by_hand(Account a, const std::vector<double>& act, const std::vector<double>& px) {
  for (std::size_t d = 0; d < act.size(); ++d) {
    if (act[d] >= 0) continue;
    double sell = -act[d];
    if (sell > a.h[d]) sell = a.h[d];
    a.h[d] -= sell;
    a.b += sell * px[d];
  }
  double cost = 0;
  for (std::size_t d = 0; d < act.size(); ++d)
    if (act[d] > 0) cost += act[d] * px[d];
  if (cost == 0) return a;
  const double frac = cost > a.b ? a.b / cost : 1.0;
  for (std::size_t d = 0; d < act.size(); ++d)
    if (act[d] > 0) a.h[d] += act[d] * frac;
  a.b = cost > a.b ? 0.0 : a.b - cost;
  return a;
}

}  // namespace oracle

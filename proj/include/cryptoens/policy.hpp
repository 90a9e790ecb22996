#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "cryptoens/rng.hpp"

// Action distributions. An action is a = hmax * tanh(x) with x Gaussian, so |a_d| < hmax_d.
namespace cryptoens::policy {

inline constexpr double kSigmaFloor = 1e-3;
/// |a / hmax| is clipped to this before atanh so boundary samples keep a finite density.
inline constexpr double kSquashClip = 1.0 - 1e-9;

/// Diagonal tanh-Gaussian. `mu` is the pre-squash mean, `sigma` the pre-squash std.
class TanhGaussian {
 public:
  TanhGaussian(std::vector<double> mu, std::vector<double> sigma, std::vector<double> hmax);

  std::size_t dim() const { return mu_.size(); }
  const std::vector<double>& mu() const { return mu_; }
  const std::vector<double>& sigma() const { return sigma_; }
  const std::vector<double>& hmax() const { return hmax_; }

  std::vector<double> sample(Rng& rng) const;
  double log_prob(std::span<const double> action) const;
  /// Gradient of log_prob with respect to mu and the (floored) sigma.
  double log_prob_grad(std::span<const double> action, std::span<double> d_mu,
                       std::span<double> d_sigma) const;
  /// Entropy of the pre-squash Gaussian: sum_d 0.5 * log(2 pi e sigma_d^2).
  double entropy_proxy() const;
  /// hmax * tanh(mu)
  std::vector<double> mode() const;

 private:
  std::vector<double> mu_, sigma_, hmax_;
};

/// Full-covariance tanh-Gaussian with Cov = L L^T. L has `sigma` on the diagonal and
/// `offdiag` filling the strict lower triangle row by row: (1,0), (2,0), (2,1), (3,0), ...
class CholeskyTanhGaussian {
 public:
  CholeskyTanhGaussian(std::vector<double> mu, std::span<const double> sigma,
                       std::span<const double> offdiag, std::vector<double> hmax);

  std::size_t dim() const { return mu_.size(); }
  const std::vector<double>& mu() const { return mu_; }
  const std::vector<double>& hmax() const { return hmax_; }
  /// L, row-major D x D
  const std::vector<double>& cholesky() const { return chol_; }
  std::vector<double> covariance() const;

  std::vector<double> sample(Rng& rng) const;
  double log_prob(std::span<const double> action) const;
  /// Gradients with respect to mu, the diagonal of L and the strict lower triangle.
  double log_prob_grad(std::span<const double> action, std::span<double> d_mu,
                       std::span<double> d_sigma, std::span<double> d_offdiag) const;
  double entropy_proxy() const;
  std::vector<double> mode() const;

 private:
  std::vector<double> mu_, chol_, hmax_;
};

using ActionDistribution = std::variant<TanhGaussian, CholeskyTanhGaussian>;

double log_prob(const ActionDistribution& d, std::span<const double> action);
std::vector<double> sample(const ActionDistribution& d, Rng& rng);

/// Equal-weight mixture of K components; duplicates are kept and count once each.
class MixturePolicy {
 public:
  explicit MixturePolicy(std::vector<ActionDistribution> components);

  std::size_t size() const { return components_.size(); }
  const std::vector<ActionDistribution>& components() const { return components_; }

  /// Uniform component index, then a draw from that component. With K = 1 no index is
  /// drawn, so the rng stream matches sampling the component directly.
  std::vector<double> sample(Rng& rng) const;
  /// log( (1/K) sum_k p_k(a) ) via log-sum-exp.
  double log_prob(std::span<const double> action) const;
  /// Diagnostic deterministic action: hmax * tanh(mean over components of mu_k).
  std::vector<double> greedy() const;

 private:
  std::vector<ActionDistribution> components_;
};

/// Stable log(exp(x_1) + ... + exp(x_n)).
double log_sum_exp(std::span<const double> xs);

}  // namespace cryptoens::policy

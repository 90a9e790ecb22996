#include "cryptoens/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "cryptoens/errors.hpp"

namespace cryptoens::policy {
namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)

struct Squashed {
  double x;          // atanh(a / hmax) after clipping
  double log_jac;    // log(1 - u^2) + log(hmax)
};

Squashed unsquash(double a, double hmax) {
  if (!std::isfinite(a) || std::abs(a) > hmax * (1.0 + 1e-12))
    throw std::domain_error("action outside the open interval (-hmax, hmax)");
  const double u = std::clamp(a / hmax, -kSquashClip, kSquashClip);
  const double x = 0.5 * (std::log1p(u) - std::log1p(-u));
  // log(1 - tanh(x)^2) = 2 * (log 2 - |x| - log1p(exp(-2|x|)))
  const double ax = std::abs(x);
  const double log_one_minus_u2 = 2.0 * (std::numbers::ln2 - ax - std::log1p(std::exp(-2.0 * ax)));
  return {x, log_one_minus_u2 + std::log(hmax)};
}

double squash(double x, double hmax) {
  return hmax * std::clamp(std::tanh(x), -kSquashClip, kSquashClip);
}

void check_hmax(const std::vector<double>& hmax, std::size_t d) {
  if (hmax.size() != d) throw ModelError("hmax dimension mismatch");
  for (double h : hmax)
    if (!(h > 0)) throw ModelError("hmax must be positive");
}

}  // namespace

double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

TanhGaussian::TanhGaussian(std::vector<double> mu, std::vector<double> sigma, std::vector<double> hmax)
    : mu_(std::move(mu)), sigma_(std::move(sigma)), hmax_(std::move(hmax)) {
  if (sigma_.size() != mu_.size()) throw ModelError("TanhGaussian: sigma dimension mismatch");
  check_hmax(hmax_, mu_.size());
  for (double& s : sigma_) s = std::max(s, kSigmaFloor);
}

std::vector<double> TanhGaussian::sample(Rng& rng) const {
  std::vector<double> a(dim());
  for (std::size_t d = 0; d < dim(); ++d) a[d] = squash(mu_[d] + sigma_[d] * rng.normal(), hmax_[d]);
  return a;
}

double TanhGaussian::log_prob(std::span<const double> action) const {
  if (action.size() != dim()) throw ModelError("log_prob: action dimension mismatch");
  double lp = 0.0;
  for (std::size_t d = 0; d < dim(); ++d) {
    const auto sq = unsquash(action[d], hmax_[d]);
    const double z = (sq.x - mu_[d]) / sigma_[d];
    lp += -0.5 * z * z - std::log(sigma_[d]) - kLogSqrt2Pi - sq.log_jac;
  }
  return lp;
}

double TanhGaussian::log_prob_grad(std::span<const double> action, std::span<double> d_mu,
                                   std::span<double> d_sigma) const {
  double lp = 0.0;
  for (std::size_t d = 0; d < dim(); ++d) {
    const auto sq = unsquash(action[d], hmax_[d]);
    const double r = sq.x - mu_[d];
    const double s = sigma_[d];
    const double z = r / s;
    lp += -0.5 * z * z - std::log(s) - kLogSqrt2Pi - sq.log_jac;
    d_mu[d] = r / (s * s);
    d_sigma[d] = (z * z - 1.0) / s;
  }
  return lp;
}

double TanhGaussian::entropy_proxy() const {
  double h = 0.0;
  for (double s : sigma_) h += 0.5 + kLogSqrt2Pi + std::log(s);
  return h;
}

std::vector<double> TanhGaussian::mode() const {
  std::vector<double> a(dim());
  for (std::size_t d = 0; d < dim(); ++d) a[d] = squash(mu_[d], hmax_[d]);
  return a;
}

CholeskyTanhGaussian::CholeskyTanhGaussian(std::vector<double> mu, std::span<const double> sigma,
                                           std::span<const double> offdiag, std::vector<double> hmax)
    : mu_(std::move(mu)), hmax_(std::move(hmax)) {
  const std::size_t D = mu_.size();
  if (sigma.size() != D || offdiag.size() != D * (D - 1) / 2)
    throw ModelError("CholeskyTanhGaussian: parameter dimension mismatch");
  check_hmax(hmax_, D);
  chol_.assign(D * D, 0.0);
  std::size_t k = 0;
  for (std::size_t i = 0; i < D; ++i) {
    for (std::size_t j = 0; j < i; ++j) chol_[i * D + j] = offdiag[k++];
    chol_[i * D + i] = std::max(sigma[i], kSigmaFloor);
  }
}

std::vector<double> CholeskyTanhGaussian::covariance() const {
  const std::size_t D = dim();
  std::vector<double> cov(D * D, 0.0);
  for (std::size_t i = 0; i < D; ++i)
    for (std::size_t j = 0; j < D; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k <= std::min(i, j); ++k) s += chol_[i * D + k] * chol_[j * D + k];
      cov[i * D + j] = s;
    }
  return cov;
}

std::vector<double> CholeskyTanhGaussian::sample(Rng& rng) const {
  const std::size_t D = dim();
  std::vector<double> z(D);
  for (double& v : z) v = rng.normal();
  std::vector<double> a(D);
  for (std::size_t i = 0; i < D; ++i) {
    double x = mu_[i];
    for (std::size_t j = 0; j <= i; ++j) x += chol_[i * D + j] * z[j];
    a[i] = squash(x, hmax_[i]);
  }
  return a;
}

double CholeskyTanhGaussian::log_prob_grad(std::span<const double> action, std::span<double> d_mu,
                                           std::span<double> d_sigma,
                                           std::span<double> d_offdiag) const {
  const std::size_t D = dim();
  if (action.size() != D) throw ModelError("log_prob: action dimension mismatch");
  std::vector<double> r(D), w(D), s(D);
  double log_jac = 0.0, log_det = 0.0;
  for (std::size_t i = 0; i < D; ++i) {
    const auto sq = unsquash(action[i], hmax_[i]);
    r[i] = sq.x - mu_[i];
    log_jac += sq.log_jac;
    log_det += std::log(chol_[i * D + i]);
  }
  // w = L^{-1} r
  for (std::size_t i = 0; i < D; ++i) {
    double acc = r[i];
    for (std::size_t j = 0; j < i; ++j) acc -= chol_[i * D + j] * w[j];
    w[i] = acc / chol_[i * D + i];
  }
  double quad = 0.0;
  for (double v : w) quad += v * v;
  const double lp = -0.5 * quad - log_det - static_cast<double>(D) * kLogSqrt2Pi - log_jac;
  if (d_mu.empty()) return lp;

  // s = L^{-T} w
  for (std::size_t ii = D; ii-- > 0;) {
    double acc = w[ii];
    for (std::size_t j = ii + 1; j < D; ++j) acc -= chol_[j * D + ii] * s[j];
    s[ii] = acc / chol_[ii * D + ii];
  }
  std::size_t k = 0;
  for (std::size_t i = 0; i < D; ++i) {
    d_mu[i] = s[i];
    for (std::size_t j = 0; j < i; ++j) d_offdiag[k++] = s[i] * w[j];
    d_sigma[i] = s[i] * w[i] - 1.0 / chol_[i * D + i];
  }
  return lp;
}

double CholeskyTanhGaussian::log_prob(std::span<const double> action) const {
  return log_prob_grad(action, {}, {}, {});
}

double CholeskyTanhGaussian::entropy_proxy() const {
  const std::size_t D = dim();
  double h = 0.0;
  for (std::size_t i = 0; i < D; ++i) h += 0.5 + kLogSqrt2Pi + std::log(chol_[i * D + i]);
  return h;
}

std::vector<double> CholeskyTanhGaussian::mode() const {
  std::vector<double> a(dim());
  for (std::size_t d = 0; d < dim(); ++d) a[d] = squash(mu_[d], hmax_[d]);
  return a;
}

double log_prob(const ActionDistribution& d, std::span<const double> action) {
  return std::visit([&](const auto& c) { return c.log_prob(action); }, d);
}

std::vector<double> sample(const ActionDistribution& d, Rng& rng) {
  return std::visit([&](const auto& c) { return c.sample(rng); }, d);
}

MixturePolicy::MixturePolicy(std::vector<ActionDistribution> components)
    : components_(std::move(components)) {
  if (components_.empty()) throw ModelError("MixturePolicy: needs at least one component");
}

std::vector<double> MixturePolicy::sample(Rng& rng) const {
  if (components_.size() == 1) return policy::sample(components_.front(), rng);
  const auto k = rng.index(components_.size());
  return policy::sample(components_[k], rng);
}

double MixturePolicy::log_prob(std::span<const double> action) const {
  std::vector<double> lps;
  lps.reserve(components_.size());
  for (const auto& c : components_) lps.push_back(policy::log_prob(c, action));
  return log_sum_exp(lps) - std::log(static_cast<double>(components_.size()));
}

std::vector<double> MixturePolicy::greedy() const {
  const auto& first = components_.front();
  const auto hmax = std::visit([](const auto& c) { return c.hmax(); }, first);
  std::vector<double> mean(hmax.size(), 0.0);
  for (const auto& c : components_) {
    const auto& mu = std::visit([](const auto& d) -> const std::vector<double>& { return d.mu(); }, c);
    for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += mu[d];
  }
  std::vector<double> a(mean.size());
  for (std::size_t d = 0; d < mean.size(); ++d)
    a[d] = hmax[d] * std::tanh(mean[d] / static_cast<double>(components_.size()));
  return a;
}

}  // namespace cryptoens::policy

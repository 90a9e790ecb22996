#include "cryptoens/agent.hpp"

#include <map>

#include "cryptoens/errors.hpp"
#include "cryptoens/rng.hpp"

namespace cryptoens::agent {

policy::ActionDistribution distribution(const nn::ForwardOutput& out, std::size_t r,
                                        const std::vector<double>& hmax) {
  const std::size_t D = hmax.size();
  std::vector<double> mu(out.mu.begin() + r * D, out.mu.begin() + (r + 1) * D);
  std::span<const double> sigma(out.sigma.data() + r * D, D);
  if (!out.cov.empty()) {
    const std::size_t C = D * (D - 1) / 2;
    return policy::CholeskyTanhGaussian(std::move(mu), sigma,
                                        std::span<const double>(out.cov.data() + r * C, C), hmax);
  }
  return policy::TanhGaussian(std::move(mu), std::vector<double>(sigma.begin(), sigma.end()), hmax);
}

EpisodeOutcome run_episode(std::span<const nn::NetworkWeights* const> models, env::TradingEnv& env,
                           env::EpisodeRange range, ActionMode mode, std::uint64_t seed) {
  if (models.empty()) throw ModelError("run_episode: no models");
  Rng rng(seed);
  EpisodeOutcome out;
  out.values.reserve(range.steps() + 1);
  out.rewards.reserve(range.steps());
  const auto& state = env.reset(range);
  out.values.push_back(env.portfolio_value());

  std::map<const nn::NetworkWeights*, nn::ForwardOutput> cache;
  std::vector<policy::ActionDistribution> comps;
  while (!env.done()) {
    cache.clear();
    comps.clear();
    for (const auto* m : models) {
      auto it = cache.find(m);
      if (it == cache.end())
        it = cache.emplace(m, nn::forward(*m, state.window, 1, nn::Mode::Eval, Exec::Serial)).first;
      comps.push_back(distribution(it->second, 0, env.hmax()));
    }
    const policy::MixturePolicy mix(std::move(comps));
    comps = {};
    const auto action = mode == ActionMode::Greedy ? mix.greedy() : mix.sample(rng);
    const auto res = env.step(action);
    out.rewards.push_back(res.reward);
    out.values.push_back(res.value);
  }
  return out;
}

EpisodeOutcome run_episode(const nn::NetworkWeights& model, env::TradingEnv& env,
                           env::EpisodeRange range, ActionMode mode, std::uint64_t seed) {
  const nn::NetworkWeights* p = &model;
  return run_episode(std::span<const nn::NetworkWeights* const>(&p, 1), env, range, mode, seed);
}

}  // namespace cryptoens::agent

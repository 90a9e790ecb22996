#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cryptoens/network.hpp"
#include "cryptoens/policy.hpp"
#include "cryptoens/trading_env.hpp"

// Glue between network outputs, action distributions and the environment.
namespace cryptoens::agent {

/// Distribution for row `r` of a forward pass: diagonal unless the net has a covariance head.
policy::ActionDistribution distribution(const nn::ForwardOutput& out, std::size_t r,
                                        const std::vector<double>& hmax);

enum class ActionMode { Stochastic, Greedy };

struct EpisodeOutcome {
  std::vector<double> values;   // portfolio value before the first step and after every step
  std::vector<double> rewards;  // V_{t+1} - V_t
  double total_return() const { return values.back() / values.front() - 1.0; }
};

/// Plays one episode with the equal-weight mixture of `models` (one model is the plain
/// policy). Repeated pointers are evaluated once but still count as separate components.
EpisodeOutcome run_episode(std::span<const nn::NetworkWeights* const> models, env::TradingEnv& env,
                           env::EpisodeRange range, ActionMode mode, std::uint64_t seed);

EpisodeOutcome run_episode(const nn::NetworkWeights& model, env::TradingEnv& env,
                           env::EpisodeRange range, ActionMode mode, std::uint64_t seed);

}  // namespace cryptoens::agent

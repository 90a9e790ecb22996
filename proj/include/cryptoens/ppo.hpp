#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "cryptoens/adam.hpp"
#include "cryptoens/exec.hpp"
#include "cryptoens/network.hpp"
#include "cryptoens/trading_env.hpp"

namespace cryptoens::ppo {

struct TrainConfig {
  std::size_t episodes_total = 400;
  std::size_t workers = 4;
  std::size_t batch_size = 6000;  // minibatch size over the pooled iteration buffer
  double gamma = 0.99;
  double lambda = 0.95;
  double c1 = 100.0;
  double c2 = -1.0;
  double c3 = -1.0;
  double clip_eps = 0.2;
  std::size_t update_epochs = 4;
  std::size_t validation_every = 2;  // iterations between validation rounds
  double base_lr = 5e-6;
  double lr_floor_fraction = 0.01;
  std::uint64_t seed = 0;
  Exec exec = Exec::Parallel;
  // Batch-norm mode of the update forward pass. Eval normalizes with the running statistics
  // the rollouts used, so the first minibatch reproduces the behaviour log-probabilities;
  // the running statistics then follow each minibatch with momentum.
  nn::Mode update_bn_mode = nn::Mode::Eval;

  void validate() const;
  std::size_t iterations() const { return (episodes_total + workers - 1) / workers; }
};

/// Divides rewards by the running maximum of absolute rewards seen so far.
class RewardNormalizer {
 public:
  double operator()(double r_raw);
  double abs_max() const { return abs_max_; }

 private:
  double abs_max_ = 1e-8;
};

struct AdvantageSet {
  std::vector<double> advantages;
  std::vector<double> returns;  // value + advantage
};

/// Backward GAE recursion. `bootstrap_value` is V(s_T): 0 for a terminal end, the critic's
/// estimate for a truncated one.
AdvantageSet compute_gae(std::span<const double> rewards, std::span<const double> values,
                         double bootstrap_value, double gamma, double lambda);

/// Pooled transitions from one iteration, in worker order then time order.
struct RolloutBuffer {
  std::size_t obs_size = 0;
  std::size_t action_dim = 0;
  std::vector<double> states;  // n x obs_size
  std::vector<double> actions;  // n x D
  std::vector<double> hmax;     // n x D
  std::vector<double> log_prob_old;
  std::vector<double> reward_raw;
  std::vector<double> reward_norm;
  std::vector<double> value;
  std::vector<std::uint8_t> done;

  std::size_t size() const { return log_prob_old.size(); }
  void append(const RolloutBuffer& other);
};

/// One minibatch as seen by the loss: everything except the states.
struct LossBatch {
  std::size_t size = 0;
  std::size_t action_dim = 0;
  std::vector<double> actions, hmax, log_prob_old, advantages, returns;
};

struct LossDiagnostics {
  double loss = 0.0;
  double clip_objective = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
};

struct LossResult {
  LossDiagnostics diag;
  nn::HeadGradients grads;  // d loss / d head outputs
};

/// loss = -c1 * L_clip - c2 * L_v - c3 * H with L_clip the clipped surrogate, L_v the mean
/// squared value error and H the mean base-Gaussian entropy.
LossResult ppo_loss(const LossBatch& batch, const nn::ForwardOutput& out, const TrainConfig& cfg);

/// Zero mean, unit (population) std; left centred only when the std is below 1e-8.
void normalize_advantages(std::span<double> adv);

struct IterationRecord {
  std::size_t iteration = 0;  // 1-based
  std::vector<double> episode_returns;  // (V_end - V_0) / V_0 per episode, worker order
  std::size_t steps = 0;
  std::size_t updates = 0;
  std::size_t skipped_updates = 0;
  double learning_rate = 0.0;
  double reward_abs_max = 0.0;
  LossDiagnostics mean_diag;
};

struct TrainResult {
  nn::NetworkWeights weights;
  std::vector<IterationRecord> log;
  std::size_t optimizer_steps = 0;
};

/// Called after iteration `epoch` (1-based) with the current weights, every
/// `validation_every` iterations and after the last one.
using ValidationHook = std::function<void(std::size_t epoch, const nn::NetworkWeights&)>;

/// Collects `workers` episodes over `range` per iteration and runs minibatch PPO updates.
TrainResult train(std::shared_ptr<const market::FeatureMatrix> features, const env::EnvConfig& env_cfg,
                  env::EpisodeRange range, const nn::NetShape& shape, const TrainConfig& cfg,
                  const ValidationHook& hook = {});

}  // namespace cryptoens::ppo

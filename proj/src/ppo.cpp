#include "cryptoens/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <string>

#include "cryptoens/agent.hpp"
#include "cryptoens/errors.hpp"
#include "cryptoens/rng.hpp"

namespace cryptoens::ppo {

void TrainConfig::validate() const {
  if (!(gamma > 0 && gamma <= 1)) throw ConfigError("gamma must lie in (0, 1]");
  if (!(lambda >= 0 && lambda <= 1)) throw ConfigError("lambda must lie in [0, 1]");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (workers == 0) throw ConfigError("workers must be positive");
  if (episodes_total == 0) throw ConfigError("episodes must be positive");
  if (update_epochs == 0) throw ConfigError("update_epochs must be positive");
  if (validation_every == 0) throw ConfigError("validation_every must be positive");
  if (!(clip_eps > 0)) throw ConfigError("clip_eps must be positive");
  if (!(base_lr > 0)) throw ConfigError("learning rate must be positive");
}

double RewardNormalizer::operator()(double r_raw) {
  abs_max_ = std::max(abs_max_, std::abs(r_raw));
  return r_raw / abs_max_;
}

AdvantageSet compute_gae(std::span<const double> rewards, std::span<const double> values,
                         double bootstrap_value, double gamma, double lambda) {
  if (rewards.size() != values.size()) throw ModelError("compute_gae: length mismatch");
  const std::size_t n = rewards.size();
  AdvantageSet out;
  out.advantages.resize(n);
  out.returns.resize(n);
  double next_value = bootstrap_value;
  double acc = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double delta = rewards[i] + gamma * next_value - values[i];
    acc = delta + gamma * lambda * acc;
    out.advantages[i] = acc;
    out.returns[i] = values[i] + acc;
    next_value = values[i];
  }
  return out;
}

void RolloutBuffer::append(const RolloutBuffer& o) {
  if (size() == 0) {
    obs_size = o.obs_size;
    action_dim = o.action_dim;
  }
  auto cat = [](auto& dst, const auto& src) { dst.insert(dst.end(), src.begin(), src.end()); };
  cat(states, o.states);
  cat(actions, o.actions);
  cat(hmax, o.hmax);
  cat(log_prob_old, o.log_prob_old);
  cat(reward_raw, o.reward_raw);
  cat(reward_norm, o.reward_norm);
  cat(value, o.value);
  cat(done, o.done);
}

void normalize_advantages(std::span<double> adv) {
  if (adv.empty()) return;
  const double n = static_cast<double>(adv.size());
  double mean = 0.0;
  for (double a : adv) mean += a;
  mean /= n;
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / n);
  for (double& a : adv) a = sd < 1e-8 ? a - mean : (a - mean) / sd;
}

LossResult ppo_loss(const LossBatch& b, const nn::ForwardOutput& out, const TrainConfig& cfg) {
  const std::size_t n = b.size, D = b.action_dim;
  if (out.batch != n || out.mu.size() != n * D) throw ModelError("ppo_loss: output shape mismatch");
  const bool full_cov = !out.cov.empty();
  const std::size_t C = D * (D - 1) / 2;
  const double inv_n = 1.0 / static_cast<double>(n);

  LossResult res;
  res.grads.mu.assign(n * D, 0.0);
  res.grads.sigma.assign(n * D, 0.0);
  res.grads.value.assign(n, 0.0);
  if (full_cov) res.grads.cov.assign(n * C, 0.0);

  std::vector<double> d_mu(D), d_sigma(D), d_off(C);
  double clip_sum = 0.0, vloss = 0.0, ent = 0.0, kl = 0.0, clipped = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> hmax(b.hmax.begin() + i * D, b.hmax.begin() + (i + 1) * D);
    std::span<const double> a(b.actions.data() + i * D, D);
    const auto dist = agent::distribution(out, i, hmax);
    double lp = 0.0, h = 0.0;
    if (full_cov) {
      const auto& c = std::get<policy::CholeskyTanhGaussian>(dist);
      lp = c.log_prob_grad(a, d_mu, d_sigma, d_off);
      h = c.entropy_proxy();
    } else {
      const auto& c = std::get<policy::TanhGaussian>(dist);
      lp = c.log_prob_grad(a, d_mu, d_sigma);
      h = c.entropy_proxy();
    }
    const double adv = b.advantages[i];
    const double ratio = std::exp(lp - b.log_prob_old[i]);
    const double surr1 = ratio * adv;
    const double surr2 = std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * adv;
    clip_sum += std::min(surr1, surr2);
    kl += b.log_prob_old[i] - lp;
    if (std::abs(ratio - 1.0) > cfg.clip_eps) clipped += 1.0;
    // d L_clip / d log pi is ratio * A on the unclipped branch, 0 otherwise.
    const double g_lp = surr1 <= surr2 ? surr1 : 0.0;
    const double dl_dlp = -cfg.c1 * g_lp * inv_n;

    for (std::size_t d = 0; d < D; ++d) {
      res.grads.mu[i * D + d] = dl_dlp * d_mu[d];
      const double sigma_raw = out.sigma[i * D + d];
      const double sigma = std::max(sigma_raw, policy::kSigmaFloor);
      if (sigma_raw > policy::kSigmaFloor)
        res.grads.sigma[i * D + d] = dl_dlp * d_sigma[d] - cfg.c3 * inv_n / sigma;
    }
    if (full_cov)
      for (std::size_t k = 0; k < C; ++k) res.grads.cov[i * C + k] = dl_dlp * d_off[k];

    const double err = out.value[i] - b.returns[i];
    vloss += err * err;
    res.grads.value[i] = -cfg.c2 * 2.0 * err * inv_n;
    ent += h;
  }
  auto& dg = res.diag;
  dg.clip_objective = clip_sum * inv_n;
  dg.value_loss = vloss * inv_n;
  dg.entropy = ent * inv_n;
  dg.approx_kl = kl * inv_n;
  dg.clip_fraction = clipped * inv_n;
  dg.loss = -cfg.c1 * dg.clip_objective - cfg.c2 * dg.value_loss - cfg.c3 * dg.entropy;
  return res;
}

namespace {

struct Episode {
  RolloutBuffer buf;
  double total_return = 0.0;
};

void collect(env::TradingEnv& env, const nn::NetworkWeights& w, env::EpisodeRange range,
             std::uint64_t seed, Episode& ep) {
  Rng rng(seed);
  auto& b = ep.buf;
  const auto& state = env.reset(range);
  const double v0 = env.portfolio_value();
  b.obs_size = state.window.size();
  b.action_dim = env.assets();
  const std::size_t n = range.steps();
  b.states.reserve(n * b.obs_size);
  double v = v0;
  while (!env.done()) {
    const auto out = nn::forward(w, state.window, 1, nn::Mode::Eval, Exec::Serial);
    const auto dist = agent::distribution(out, 0, env.hmax());
    const auto a = policy::sample(dist, rng);
    b.states.insert(b.states.end(), state.window.begin(), state.window.end());
    b.actions.insert(b.actions.end(), a.begin(), a.end());
    b.hmax.insert(b.hmax.end(), env.hmax().begin(), env.hmax().end());
    b.log_prob_old.push_back(policy::log_prob(dist, a));
    b.value.push_back(out.value[0]);
    const auto r = env.step(a);
    b.reward_raw.push_back(r.reward);
    b.done.push_back(r.done ? 1 : 0);
    v = r.value;
  }
  ep.total_return = v / v0 - 1.0;
}

std::size_t minibatch_count(std::size_t n, std::size_t bs) { return (n + bs - 1) / bs; }

// Seeds the batch-norm running statistics from the all-cash trajectory over the training
// range. Without this, rollouts of the first iteration see an identity normalization while
// the update sees batch statistics, and the importance ratios are meaningless.
void init_batch_norm(env::TradingEnv& env, nn::NetworkWeights& w, env::EpisodeRange range,
                     Exec exec) {
  const auto& state = env.reset(range);
  std::vector<double> states;
  std::size_t n = 0;
  const std::vector<double> hold(env.assets(), 0.0);
  while (!env.done()) {
    states.insert(states.end(), state.window.begin(), state.window.end());
    ++n;
    env.step(hold);
  }
  nn::ForwardTrace trace;
  nn::forward(w, states, n, nn::Mode::Train, exec, &trace);
  nn::update_running_stats(w, trace);
}

}  // namespace

TrainResult train(std::shared_ptr<const market::FeatureMatrix> features, const env::EnvConfig& env_cfg,
                  env::EpisodeRange range, const nn::NetShape& shape, const TrainConfig& cfg,
                  const ValidationHook& hook) {
  cfg.validate();
  env::TradingEnv probe(features, env_cfg);
  if (shape.input_dim != probe.obs_dim() || shape.seq_len != probe.window_len() ||
      shape.actions != probe.assets())
    throw ConfigError("network shape does not match the environment (" +
                      std::to_string(probe.window_len()) + "x" + std::to_string(probe.obs_dim()) +
                      ", D=" + std::to_string(probe.assets()) + ")");
  probe.reset(range);  // validates the range up front

  TrainResult result;
  result.weights = nn::xavier_init(shape, derive_seed(cfg.seed, {1}));
  auto& w = result.weights;

  const std::size_t iterations = cfg.iterations();
  std::size_t planned = 0;
  for (std::size_t it = 0; it < iterations; ++it) {
    const std::size_t eps = std::min(cfg.workers, cfg.episodes_total - it * cfg.workers);
    planned += cfg.update_epochs * minibatch_count(eps * range.steps(), cfg.batch_size);
  }
  nn::AdamConfig acfg;
  acfg.base_lr = cfg.base_lr;
  acfg.floor_fraction = cfg.lr_floor_fraction;
  acfg.total_steps = planned;
  nn::OptimizerState opt(acfg, w.params.size());

  std::vector<env::TradingEnv> envs;
  for (std::size_t k = 0; k < cfg.workers; ++k) envs.emplace_back(features, env_cfg);
  RewardNormalizer normalizer;
  init_batch_norm(envs[0], w, range, cfg.exec);

  for (std::size_t it = 1; it <= iterations; ++it) {
    const std::size_t n_eps = std::min(cfg.workers, cfg.episodes_total - (it - 1) * cfg.workers);
    std::vector<Episode> episodes(n_eps);
    std::vector<std::exception_ptr> errors(n_eps);
    const bool par = cfg.exec == Exec::Parallel && n_eps > 1;
#pragma omp parallel for schedule(static, 1) if (par)
    for (std::size_t k = 0; k < n_eps; ++k) {
      try {
        collect(envs[k], w, range, derive_seed(cfg.seed, {2, it, k}), episodes[k]);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);

    IterationRecord rec;
    rec.iteration = it;
    RolloutBuffer buf;
    std::vector<double> adv, ret;
    for (auto& ep : episodes) {
      for (double r : ep.buf.reward_raw) ep.buf.reward_norm.push_back(normalizer(r));
      const auto gae = compute_gae(ep.buf.reward_norm, ep.buf.value, 0.0, cfg.gamma, cfg.lambda);
      adv.insert(adv.end(), gae.advantages.begin(), gae.advantages.end());
      ret.insert(ret.end(), gae.returns.begin(), gae.returns.end());
      buf.append(ep.buf);
      rec.episode_returns.push_back(ep.total_return);
    }
    episodes.clear();

    const std::size_t n = buf.size(), D = buf.action_dim, obs = buf.obs_size;
    rec.steps = n;
    Rng shuffler(derive_seed(cfg.seed, {3, it}));
    std::vector<std::size_t> perm(n);
    LossDiagnostics sum{};
    std::size_t applied = 0;
    std::vector<double> states;
    for (std::size_t epoch = 0; epoch < cfg.update_epochs; ++epoch) {
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      std::shuffle(perm.begin(), perm.end(), shuffler.engine());
      const std::size_t mbs = minibatch_count(n, cfg.batch_size);
      std::size_t pos = 0;
      for (std::size_t m = 0; m < mbs; ++m) {
        const std::size_t len = n / mbs + (m < n % mbs ? 1 : 0);
        LossBatch lb;
        lb.size = len;
        lb.action_dim = D;
        states.resize(len * obs);
        for (std::size_t j = 0; j < len; ++j) {
          const std::size_t i = perm[pos + j];
          std::copy_n(buf.states.begin() + i * obs, obs, states.begin() + j * obs);
          lb.actions.insert(lb.actions.end(), buf.actions.begin() + i * D, buf.actions.begin() + (i + 1) * D);
          lb.hmax.insert(lb.hmax.end(), buf.hmax.begin() + i * D, buf.hmax.begin() + (i + 1) * D);
          lb.log_prob_old.push_back(buf.log_prob_old[i]);
          lb.advantages.push_back(adv[i]);
          lb.returns.push_back(ret[i]);
        }
        pos += len;
        normalize_advantages(lb.advantages);

        nn::ForwardTrace trace;
        const auto out = nn::forward(w, states, len, cfg.update_bn_mode, cfg.exec, &trace);
        const auto loss = ppo_loss(lb, out, cfg);
        ++rec.updates;
        if (!std::isfinite(loss.diag.loss)) {
          ++rec.skipped_updates;
          continue;
        }
        const auto grads = nn::backward(w, trace, loss.grads, cfg.exec);
        if (!nn::adam_step(opt, w.params, grads)) {
          ++rec.skipped_updates;
          continue;
        }
        nn::update_running_stats(w, trace);
        ++applied;
        sum.loss += loss.diag.loss;
        sum.clip_objective += loss.diag.clip_objective;
        sum.value_loss += loss.diag.value_loss;
        sum.entropy += loss.diag.entropy;
        sum.approx_kl += loss.diag.approx_kl;
        sum.clip_fraction += loss.diag.clip_fraction;
      }
    }
    if (applied > 0) {
      const double k = 1.0 / static_cast<double>(applied);
      rec.mean_diag = {sum.loss * k, sum.clip_objective * k, sum.value_loss * k,
                       sum.entropy * k, sum.approx_kl * k, sum.clip_fraction * k};
    }
    rec.learning_rate = opt.learning_rate();
    rec.reward_abs_max = normalizer.abs_max();
    result.log.push_back(std::move(rec));

    if (hook && (it % cfg.validation_every == 0 || it == iterations)) hook(it, w);
  }
  result.optimizer_steps = opt.step;
  return result;
}

}  // namespace cryptoens::ppo

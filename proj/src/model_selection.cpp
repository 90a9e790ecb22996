#include "cryptoens/model_selection.hpp"

#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

#include "cryptoens/agent.hpp"
#include "cryptoens/errors.hpp"
#include "cryptoens/hash.hpp"
#include "cryptoens/rng.hpp"

namespace cryptoens::selection {

std::vector<ValidationPeriod> sample_periods(env::EpisodeRange training, std::size_t K,
                                             std::size_t length, std::uint64_t seed) {
  if (K == 0) throw ConfigError("sample_periods: K must be positive");
  if (length == 0) throw ConfigError("sample_periods: length must be positive");
  if (training.end <= training.begin || training.steps() < length)
    throw DataError("training range shorter than the validation period length");
  Rng rng(derive_seed(seed, {0x7661'6c69ULL}));
  const std::size_t slack = training.steps() - length;
  std::vector<ValidationPeriod> out;
  out.reserve(K);
  for (std::size_t k = 1; k <= K; ++k) {
    const std::size_t begin = training.begin + rng.index(slack + 1);
    out.push_back({k, {begin, begin + length}, derive_seed(seed, {0x7065'7269ULL, k})});
  }
  return out;
}

std::uint64_t validation_seed(const ValidationPeriod& period, std::size_t epoch) {
  return derive_seed(period.seed, {epoch});
}

double validate(const nn::NetworkWeights& w, env::TradingEnv& env, const ValidationPeriod& period,
                std::uint64_t seed) {
  return agent::run_episode(w, env, period.range, agent::ActionMode::Stochastic, seed).total_return();
}

ValidationTracker::ValidationTracker(std::size_t K, std::size_t W)
    : window(W), history(K), best(K, -std::numeric_limits<double>::infinity()), best_snapshot(K) {
  if (W == 0) throw ConfigError("moving-average window must be positive");
}

double ValidationTracker::smoothed(std::size_t idx) const {
  const auto& h = history.at(idx);
  if (h.empty()) throw ModelError("smoothed: period has no evaluations");
  const std::size_t m = std::min(h.size(), window);
  double s = 0.0;
  for (std::size_t i = h.size() - m; i < h.size(); ++i) s += h[i];
  return s / static_cast<double>(m);
}

bool update_tracker(ValidationTracker& t, std::size_t period_id, double ret, std::size_t epoch,
                    const std::shared_ptr<const nn::NetworkWeights>& weights) {
  if (period_id == 0 || period_id > t.periods()) throw ModelError("update_tracker: bad period id");
  const std::size_t idx = period_id - 1;
  t.history[idx].push_back(ret);
  const double s = t.smoothed(idx);
  if (!(s > t.best[idx])) return false;
  t.best[idx] = s;
  t.best_snapshot[idx] = ModelSnapshot{weights, epoch, period_id, s};
  return true;
}

std::vector<ModelSnapshot> build_ensemble(const ValidationTracker& t) {
  std::vector<ModelSnapshot> out;
  out.reserve(t.periods());
  for (std::size_t k = 0; k < t.periods(); ++k) {
    if (t.history[k].empty() || !t.best_snapshot[k])
      throw ModelError("build_ensemble: validation period " + std::to_string(k + 1) +
                       " has no evaluations");
    out.push_back(*t.best_snapshot[k]);
  }
  return out;
}

Selector::Selector(std::shared_ptr<const market::FeatureMatrix> features, env::EnvConfig env_cfg,
                   std::vector<ValidationPeriod> periods, std::size_t moving_window, bool parallel)
    : features_(std::move(features)),
      env_cfg_(env_cfg),
      periods_(std::move(periods)),
      tracker_(periods_.size(), moving_window),
      parallel_(parallel) {}

void Selector::operator()(std::size_t epoch, const nn::NetworkWeights& w) {
  const std::size_t K = periods_.size();
  std::vector<double> returns(K);
  std::vector<std::exception_ptr> errors(K);
#pragma omp parallel for schedule(static, 1) if (parallel_ && K > 1)
  for (std::size_t k = 0; k < K; ++k) {
    try {
      env::TradingEnv env(features_, env_cfg_);
      returns[k] = validate(w, env, periods_[k], validation_seed(periods_[k], epoch));
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  ValidationEvent ev;
  ev.epoch = epoch;
  ev.returns = returns;
  const auto frozen = std::make_shared<const nn::NetworkWeights>(w);
  for (std::size_t k = 0; k < K; ++k) {
    if (update_tracker(tracker_, periods_[k].id, returns[k], epoch, frozen))
      ev.captured.push_back(periods_[k].id);
    ev.smoothed.push_back(tracker_.smoothed(k));
  }
  events_.push_back(std::move(ev));
}

std::string snapshot_file_name(std::int64_t window, std::int64_t period, std::int64_t epoch) {
  std::ostringstream os;
  os << "w" << window << (period < 0 ? "_final" : "_p" + std::to_string(period)) << "_e" << epoch
     << ".snap";
  return os.str();
}

namespace {

constexpr const char* kIndexName = "index.json";

nlohmann::json to_json(const SnapshotSet& s) {
  nlohmann::json j;
  j["window"] = s.window;
  j["config_hash"] = s.config_hash;
  j["seed"] = s.seed;
  j["snapshots"] = nlohmann::json::array();
  for (const auto& e : s.entries)
    j["snapshots"].push_back({{"file", e.file},
                              {"period", e.period},
                              {"epoch", e.epoch},
                              {"smoothed_return", e.smoothed_return},
                              {"hash", e.hash}});
  return j;
}

}  // namespace

SnapshotSet write_snapshot_set(const std::filesystem::path& dir, std::int64_t window,
                               const std::string& config_hash, std::uint64_t seed,
                               const std::vector<ModelSnapshot>& best,
                               const nn::NetworkWeights& final_weights, std::size_t final_epoch) {
  std::filesystem::create_directories(dir);
  SnapshotSet set;
  set.window = window;
  set.config_hash = config_hash;
  set.seed = seed;
  auto put = [&](const nn::NetworkWeights& w, std::int64_t period, std::int64_t epoch, double smoothed) {
    nn::Snapshot snap{w, {config_hash, window, period, epoch, smoothed}};
    const auto name = snapshot_file_name(window, period, epoch);
    nn::save_snapshot(dir / name, snap);
    set.entries.push_back({name, period, epoch, smoothed, nn::snapshot_hash(snap)});
  };
  for (const auto& s : best)
    put(*s.weights, static_cast<std::int64_t>(s.period_id), static_cast<std::int64_t>(s.epoch),
        s.smoothed_return);
  put(final_weights, -1, static_cast<std::int64_t>(final_epoch), 0.0);

  // Drop stale snapshot files from an earlier run of the same window.
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".snap") continue;
    const auto fname = entry.path().filename().string();
    bool listed = false;
    for (const auto& e : set.entries) listed = listed || e.file == fname;
    if (!listed) std::filesystem::remove(entry.path());
  }
  std::ofstream out(dir / kIndexName, std::ios::binary | std::ios::trunc);
  out << to_json(set).dump(2) << "\n";
  if (!out) throw ModelError("cannot write snapshot index in " + dir.string());
  return set;
}

SnapshotSet read_snapshot_index(const std::filesystem::path& dir) {
  std::ifstream in(dir / kIndexName, std::ios::binary);
  if (!in) throw ModelError("missing snapshot index " + (dir / kIndexName).string());
  nlohmann::json j;
  try {
    in >> j;
    SnapshotSet s;
    s.window = j.at("window").get<std::int64_t>();
    s.config_hash = j.at("config_hash").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& e : j.at("snapshots"))
      s.entries.push_back({e.at("file").get<std::string>(), e.at("period").get<std::int64_t>(),
                           e.at("epoch").get<std::int64_t>(), e.at("smoothed_return").get<double>(),
                           e.at("hash").get<std::string>()});
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ModelError("corrupt snapshot index " + (dir / kIndexName).string() + ": " + e.what());
  }
}

LoadedSnapshots load_snapshot_set(const std::filesystem::path& dir) {
  LoadedSnapshots out;
  out.index = read_snapshot_index(dir);
  std::map<std::string, std::shared_ptr<const nn::NetworkWeights>> by_content;
  for (const auto& e : out.index.entries) {
    auto snap = nn::load_snapshot(dir / e.file);
    if (nn::snapshot_hash(snap) != e.hash)
      throw ModelError("snapshot " + e.file + " does not match its index hash");
    Fnv1a h;
    h.update(std::span<const double>(snap.weights.params));
    h.update(std::span<const double>(snap.weights.bn_running_mean));
    h.update(std::span<const double>(snap.weights.bn_running_var));
    auto& slot = by_content[h.hex()];
    if (!slot) slot = std::make_shared<const nn::NetworkWeights>(std::move(snap.weights));
    if (e.period < 0)
      out.final_epoch = slot;
    else
      out.best.push_back(slot);
  }
  if (!out.final_epoch) throw ModelError("snapshot index in " + dir.string() + " lacks a final-epoch entry");
  if (out.best.empty()) throw ModelError("snapshot index in " + dir.string() + " lists no ensemble members");
  return out;
}

}  // namespace cryptoens::selection

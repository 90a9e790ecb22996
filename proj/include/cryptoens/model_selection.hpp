#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cryptoens/network.hpp"
#include "cryptoens/snapshot.hpp"
#include "cryptoens/trading_env.hpp"

namespace cryptoens::selection {

struct ValidationPeriod {
  std::size_t id = 0;  // 1..K
  env::EpisodeRange range;
  std::uint64_t seed = 0;
};

/// K start offsets drawn uniformly from [training.begin, training.end - length]; overlaps
/// are allowed.
std::vector<ValidationPeriod> sample_periods(env::EpisodeRange training, std::size_t K,
                                             std::size_t length, std::uint64_t seed);

/// (V_end - V_0) / V_0 of one stochastic episode from a fresh account.
double validate(const nn::NetworkWeights& w, env::TradingEnv& env, const ValidationPeriod& period,
                std::uint64_t seed);

/// Episode seed for validating `period` at `epoch`.
std::uint64_t validation_seed(const ValidationPeriod& period, std::size_t epoch);

struct ModelSnapshot {
  std::shared_ptr<const nn::NetworkWeights> weights;
  std::size_t epoch = 0;
  std::size_t period_id = 0;
  double smoothed_return = 0.0;
};

struct ValidationTracker {
  std::size_t window = 5;  // W
  std::vector<std::vector<double>> history;  // per period
  std::vector<double> best;                  // -inf until the first evaluation
  std::vector<std::optional<ModelSnapshot>> best_snapshot;

  ValidationTracker(std::size_t K, std::size_t W);
  std::size_t periods() const { return history.size(); }
  /// Mean of the last min(n, W) returns of period `idx` (0-based).
  double smoothed(std::size_t idx) const;
};

/// Records a return for period `period_id` (1-based). Captures a snapshot when the smoothed
/// value strictly beats the period's best; returns true in that case. `weights` is shared
/// so one capture can serve several periods.
bool update_tracker(ValidationTracker& tracker, std::size_t period_id, double ret, std::size_t epoch,
                    const std::shared_ptr<const nn::NetworkWeights>& weights);

/// The K per-period best snapshots in period order, duplicates kept.
std::vector<ModelSnapshot> build_ensemble(const ValidationTracker& tracker);

struct ValidationEvent {
  std::size_t epoch = 0;
  std::vector<double> returns;   // per period
  std::vector<double> smoothed;  // per period
  std::vector<std::size_t> captured;  // period ids that captured this epoch
};

/// Validation hook for the trainer: evaluates every period on the current weights (in
/// parallel over periods) and updates the tracker in period order.
class Selector {
 public:
  Selector(std::shared_ptr<const market::FeatureMatrix> features, env::EnvConfig env_cfg,
           std::vector<ValidationPeriod> periods, std::size_t moving_window, bool parallel = true);

  void operator()(std::size_t epoch, const nn::NetworkWeights& w);

  const ValidationTracker& tracker() const { return tracker_; }
  const std::vector<ValidationPeriod>& periods() const { return periods_; }
  const std::vector<ValidationEvent>& events() const { return events_; }

 private:
  std::shared_ptr<const market::FeatureMatrix> features_;
  env::EnvConfig env_cfg_;
  std::vector<ValidationPeriod> periods_;
  ValidationTracker tracker_;
  std::vector<ValidationEvent> events_;
  bool parallel_;
};

/// On-disk snapshot set for one training window: K per-period best snapshots plus the
/// final-epoch weights, and index.json describing them.
struct SnapshotSetEntry {
  std::string file;
  std::int64_t period = -1;  // -1 = final epoch
  std::int64_t epoch = 0;
  double smoothed_return = 0.0;
  std::string hash;
};

struct SnapshotSet {
  std::int64_t window = 0;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<SnapshotSetEntry> entries;
};

std::string snapshot_file_name(std::int64_t window, std::int64_t period, std::int64_t epoch);

SnapshotSet write_snapshot_set(const std::filesystem::path& dir, std::int64_t window,
                               const std::string& config_hash, std::uint64_t seed,
                               const std::vector<ModelSnapshot>& best,
                               const nn::NetworkWeights& final_weights, std::size_t final_epoch);

SnapshotSet read_snapshot_index(const std::filesystem::path& dir);

struct LoadedSnapshots {
  std::vector<std::shared_ptr<const nn::NetworkWeights>> best;  // K, period order
  std::shared_ptr<const nn::NetworkWeights> final_epoch;
  SnapshotSet index;
};

/// Loads every snapshot listed in the index; files with identical content share one
/// weight object.
LoadedSnapshots load_snapshot_set(const std::filesystem::path& dir);

}  // namespace cryptoens::selection

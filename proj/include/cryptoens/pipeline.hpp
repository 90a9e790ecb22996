#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cryptoens/backtester.hpp"
#include "cryptoens/config.hpp"
#include "cryptoens/features.hpp"
#include "cryptoens/model_selection.hpp"

namespace cryptoens::pipeline {

/// Another process holds the output directory.
class LockError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Exclusive advisory lock on <dir>/.lock for the lifetime of the object.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path& dir);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  int fd_ = -1;
};

// ---- feature store ----

void save_features(const std::filesystem::path& path, const market::FeatureMatrix& fm);
market::FeatureMatrix load_features(const std::filesystem::path& path);

struct FeatureStore {
  market::FeatureMatrix raw;  // unnormalized
  EpochSeconds data_begin = 0;  // first aligned bar, before the indicator warm-up
  std::string manifest_hash;
};

std::filesystem::path features_dir(const RunConfig& cfg);
FeatureStore open_feature_store(const RunConfig& cfg);

struct IngestResult {
  std::filesystem::path manifest;
  std::string manifest_hash;
  std::size_t rows = 0;
  std::size_t columns = 0;
};

IngestResult cmd_ingest(const RunConfig& cfg);

// ---- training ----

backtest::Schedule schedule_for(const RunConfig& cfg, const FeatureStore& store);

/// Feature matrix normalized on one window's training span, plus the training episode.
struct WindowData {
  std::shared_ptr<const market::FeatureMatrix> features;
  market::NormStats stats;
  env::EpisodeRange train_range;
};

WindowData window_data(const RunConfig& cfg, const FeatureStore& store, const backtest::RetrainCycle& cycle);

std::filesystem::path snapshot_dir(const RunConfig& cfg, std::size_t window);
std::filesystem::path training_log_path(const RunConfig& cfg, std::size_t window);

struct TrainWindowResult {
  selection::SnapshotSet snapshots;
  std::vector<ppo::IterationRecord> log;
  std::vector<selection::ValidationEvent> validations;
};

TrainWindowResult train_window(const RunConfig& cfg, const FeatureStore& store,
                               const backtest::Schedule& schedule, std::size_t window);

/// Trains one window, or every window when `window` is empty.
std::vector<TrainWindowResult> cmd_train(const RunConfig& cfg, std::optional<std::size_t> window);

// ---- backtest ----

std::filesystem::path report_dir(const RunConfig& cfg);

backtest::BacktestReport cmd_backtest(const RunConfig& cfg, bool train_missing, bool greedy);

}  // namespace cryptoens::pipeline

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cryptoens/features.hpp"
#include "cryptoens/network.hpp"
#include "cryptoens/ppo.hpp"
#include "cryptoens/time_util.hpp"
#include "cryptoens/trading_env.hpp"

namespace cryptoens {

/// Everything a run needs, parsed from one JSON document. Defaults are the full-scale
/// setup: five assets, 6-month training windows and the standard PPO hyperparameters.
struct RunConfig {
  nlohmann::json doc;  // merged document the typed fields were read from

  std::vector<std::string> assets;
  std::map<std::string, std::string> files;  // asset -> csv path; default <data_dir>/<asset>.csv
  std::filesystem::path data_dir;
  std::string reference_asset;

  EpochSeconds test_begin = 0;
  EpochSeconds test_end = 0;
  int train_months = 6;

  market::IndicatorConfig indicators;
  env::EnvConfig env;
  nn::NetShape net;
  ppo::TrainConfig train;

  std::size_t K = 9;
  std::size_t period_hours = 168;
  std::size_t moving_window = 5;

  bool individuals = true;
  std::size_t histogram_bins = 20;

  std::uint64_t seed = 0;
  bool parallel = true;
  std::filesystem::path output_dir;

  std::string hash;  // FNV-1a of the canonical document without output_dir

  std::filesystem::path csv_path(const std::string& asset) const;
};

nlohmann::json default_config_document();

/// Applies "a.b.c=value" overrides; the value is parsed as JSON when possible and taken
/// as a string otherwise. Unknown keys are rejected.
void apply_override(nlohmann::json& doc, const std::string& assignment);

RunConfig parse_config(const nlohmann::json& doc);

/// Defaults, then the optional file (merged key by key), then the overrides.
RunConfig load_config(const std::optional<std::filesystem::path>& file,
                      const std::vector<std::string>& overrides = {});

std::string config_hash(const nlohmann::json& doc);

}  // namespace cryptoens

#include "cryptoens/config.hpp"

#include <algorithm>
#include <fstream>

#include "cryptoens/errors.hpp"
#include "cryptoens/hash.hpp"

namespace cryptoens {

using nlohmann::json;

std::filesystem::path RunConfig::csv_path(const std::string& asset) const {
  if (auto it = files.find(asset); it != files.end()) return it->second;
  return data_dir / (asset + ".csv");
}

json default_config_document() {
  return json{
      {"data",
       {{"dir", "data"},
        {"assets", {"XBT", "ETH", "BCH", "XRP", "LTC"}},
        {"files", json::object()},
        {"reference_asset", "XBT"}}},
      {"schedule", {{"test_begin", "2018-07-01"}, {"test_end", "2022-07-01"}, {"train_months", 6}}},
      {"indicators",
       {{"sma_short", 30},
        {"sma_long", 60},
        {"rsi", 14},
        {"cci", 20},
        {"atr", 14},
        {"adx", 14},
        {"macd_fast", 12},
        {"macd_slow", 26}}},
      {"env", {{"initial_balance", 1000000.0}, {"hmax", 70.0}, {"window", 12}, {"account_cap_factor", 2.0}}},
      {"network", {{"fc_units", 16}, {"hidden", 64}, {"lstm_layers", 2}, {"cov_head", false}}},
      {"train",
       {{"episodes", 400},
        {"workers", 4},
        {"batch_size", 6000},
        {"learning_rate", 5e-6},
        {"lr_floor_fraction", 0.01},
        {"gamma", 0.99},
        {"lambda", 0.95},
        {"c1", 100.0},
        {"c2", -1.0},
        {"c3", -1.0},
        {"clip_eps", 0.2},
        {"update_epochs", 4},
        {"validation_every", 2}}},
      {"selection", {{"K", 9}, {"period_hours", 168}, {"moving_window", 5}}},
      {"backtest", {{"individuals", true}, {"histogram_bins", 20}}},
      {"seed", 0},
      {"parallel", true},
      {"output_dir", "out"},
  };
}

namespace {

void merge_into(json& base, const json& patch, const std::string& path) {
  if (!patch.is_object()) throw ConfigError("config section " + path + " must be an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError("unknown config key " + key);
    auto& slot = base[it.key()];
    // "files" is a free-form map from asset to path.
    if (slot.is_object() && it.key() != "files")
      merge_into(slot, it.value(), key);
    else
      slot = it.value();
  }
}

template <class T>
T get(const json& doc, const char* section, const char* key) {
  try {
    return doc.at(section).at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key ") + section + "." + key + ": " + e.what());
  }
}

std::size_t positive(std::size_t v, const char* what) {
  if (v == 0) throw ConfigError(std::string(what) + " must be positive");
  return v;
}

EpochSeconds timestamp_key(const json& doc, const char* key) {
  const auto text = get<std::string>(doc, "schedule", key);
  try {
    return parse_timestamp(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("schedule.") + key + ": " + e.what());
  }
}

}  // namespace

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key=value: " + assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &doc;
  std::size_t start = 0;
  std::string parent;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    const bool free_form = parent == "files";
    if (!node->is_object() || (!free_form && !node->contains(part)))
      throw ConfigError("unknown config key " + key);
    node = &(*node)[part];
    parent = part;
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = value;
}

std::string config_hash(const json& doc) {
  json copy = doc;
  copy.erase("output_dir");
  return fnv1a_hex(copy.dump());
}

RunConfig parse_config(const json& doc) {
  RunConfig c;
  c.doc = doc;
  try {
    c.assets = doc.at("data").at("assets").get<std::vector<std::string>>();
    for (auto& [k, v] : doc.at("data").at("files").items()) c.files[k] = v.get<std::string>();
    c.data_dir = doc.at("data").at("dir").get<std::string>();
    c.reference_asset = doc.at("data").at("reference_asset").get<std::string>();
    c.seed = doc.at("seed").get<std::uint64_t>();
    c.parallel = doc.at("parallel").get<bool>();
    c.output_dir = doc.at("output_dir").get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (c.assets.empty()) throw ConfigError("data.assets must list at least one asset");
  for (std::size_t i = 0; i < c.assets.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (c.assets[i] == c.assets[j]) throw ConfigError("duplicate asset " + c.assets[i]);
  for (const auto& [asset, _] : c.files)
    if (std::find(c.assets.begin(), c.assets.end(), asset) == c.assets.end())
      throw ConfigError("data.files names unknown asset " + asset);
  const auto ref = std::find(c.assets.begin(), c.assets.end(), c.reference_asset);
  if (ref == c.assets.end()) throw ConfigError("reference asset " + c.reference_asset + " is not in data.assets");

  c.test_begin = timestamp_key(doc, "test_begin");
  c.test_end = timestamp_key(doc, "test_end");
  c.train_months = get<int>(doc, "schedule", "train_months");
  if (c.train_months <= 0) throw ConfigError("schedule.train_months must be positive");
  if (!is_month_start(c.test_begin))
    throw ConfigError("schedule.test_begin must be 00:00 UTC on the 1st of a month");
  if (c.test_end <= c.test_begin) throw ConfigError("schedule.test_end must come after schedule.test_begin");

  auto& ind = c.indicators;
  ind.sma_short = positive(get<std::size_t>(doc, "indicators", "sma_short"), "indicators.sma_short");
  ind.sma_long = positive(get<std::size_t>(doc, "indicators", "sma_long"), "indicators.sma_long");
  ind.rsi = positive(get<std::size_t>(doc, "indicators", "rsi"), "indicators.rsi");
  ind.cci = positive(get<std::size_t>(doc, "indicators", "cci"), "indicators.cci");
  ind.atr = positive(get<std::size_t>(doc, "indicators", "atr"), "indicators.atr");
  ind.adx = positive(get<std::size_t>(doc, "indicators", "adx"), "indicators.adx");
  ind.macd_fast = positive(get<std::size_t>(doc, "indicators", "macd_fast"), "indicators.macd_fast");
  ind.macd_slow = positive(get<std::size_t>(doc, "indicators", "macd_slow"), "indicators.macd_slow");
  ind.expected_assets = c.assets.size();

  c.env.initial_balance = get<double>(doc, "env", "initial_balance");
  c.env.hmax_base = get<double>(doc, "env", "hmax");
  c.env.window = positive(get<std::size_t>(doc, "env", "window"), "env.window");
  c.env.account_cap_factor = get<double>(doc, "env", "account_cap_factor");
  c.env.reference_asset = static_cast<std::size_t>(ref - c.assets.begin());
  if (!(c.env.initial_balance > 0)) throw ConfigError("env.initial_balance must be positive");
  if (!(c.env.hmax_base > 0)) throw ConfigError("env.hmax must be positive");
  if (!(c.env.account_cap_factor > 0)) throw ConfigError("env.account_cap_factor must be positive");

  const std::size_t D = c.assets.size();
  c.net.actions = D;
  c.net.seq_len = c.env.window;
  c.net.input_dim = D * market::kFeaturesPerAsset + D + 1;
  c.net.fc_units = positive(get<std::size_t>(doc, "network", "fc_units"), "network.fc_units");
  c.net.hidden = positive(get<std::size_t>(doc, "network", "hidden"), "network.hidden");
  c.net.lstm_layers = positive(get<std::size_t>(doc, "network", "lstm_layers"), "network.lstm_layers");
  c.net.cov_head = get<bool>(doc, "network", "cov_head");

  auto& t = c.train;
  t.episodes_total = get<std::size_t>(doc, "train", "episodes");
  t.workers = get<std::size_t>(doc, "train", "workers");
  t.batch_size = get<std::size_t>(doc, "train", "batch_size");
  t.base_lr = get<double>(doc, "train", "learning_rate");
  t.lr_floor_fraction = get<double>(doc, "train", "lr_floor_fraction");
  t.gamma = get<double>(doc, "train", "gamma");
  t.lambda = get<double>(doc, "train", "lambda");
  t.c1 = get<double>(doc, "train", "c1");
  t.c2 = get<double>(doc, "train", "c2");
  t.c3 = get<double>(doc, "train", "c3");
  t.clip_eps = get<double>(doc, "train", "clip_eps");
  t.update_epochs = get<std::size_t>(doc, "train", "update_epochs");
  t.validation_every = get<std::size_t>(doc, "train", "validation_every");
  t.exec = c.parallel ? Exec::Parallel : Exec::Serial;
  t.validate();

  c.K = positive(get<std::size_t>(doc, "selection", "K"), "selection.K");
  c.period_hours = positive(get<std::size_t>(doc, "selection", "period_hours"), "selection.period_hours");
  c.moving_window = positive(get<std::size_t>(doc, "selection", "moving_window"), "selection.moving_window");
  c.individuals = get<bool>(doc, "backtest", "individuals");
  c.histogram_bins = positive(get<std::size_t>(doc, "backtest", "histogram_bins"), "backtest.histogram_bins");

  c.hash = config_hash(doc);
  return c;
}

RunConfig load_config(const std::optional<std::filesystem::path>& file,
                      const std::vector<std::string>& overrides) {
  json doc = default_config_document();
  if (file) {
    std::ifstream in(*file, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + file->string());
    json user = json::parse(in, nullptr, false);
    if (user.is_discarded()) throw ConfigError("config file " + file->string() + " is not valid JSON");
    merge_into(doc, user, "");
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return parse_config(doc);
}

}  // namespace cryptoens

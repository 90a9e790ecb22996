#include "cryptoens/pipeline.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cstring>
#include <fstream>
#include <sstream>

#include "cryptoens/errors.hpp"
#include "cryptoens/hash.hpp"
#include "cryptoens/log.hpp"
#include "cryptoens/market_data.hpp"
#include "cryptoens/report.hpp"
#include "cryptoens/rng.hpp"

namespace cryptoens::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

DirectoryLock::DirectoryLock(const fs::path& dir) {
  fs::create_directories(dir);
  const auto path = dir / ".lock";
  fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) throw LockError("cannot open lock file " + path.string() + ": " + std::strerror(errno));
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw LockError("output directory " + dir.string() + " is in use by another process");
  }
}

DirectoryLock::~DirectoryLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

// ---- feature store ----

namespace {

constexpr char kFeatureMagic[8] = {'C', 'E', 'N', 'S', 'F', 'E', 'A', 'T'};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& bytes) {
  fs::create_directories(p.parent_path());
  const auto tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("cannot write " + tmp);
  }
  fs::rename(tmp, p);
}

template <class T>
void append_raw(std::string& out, const std::vector<T>& v) {
  out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(T));
}

template <class T>
std::vector<T> take_raw(const std::string& in, std::size_t& pos, std::size_t n) {
  if (pos + n * sizeof(T) > in.size()) throw DataError("feature store is truncated");
  std::vector<T> v(n);
  std::memcpy(v.data(), in.data() + pos, n * sizeof(T));
  pos += n * sizeof(T);
  return v;
}

std::string encode_features(const market::FeatureMatrix& fm) {
  const json header = {{"asset_ids", fm.asset_ids}, {"rows", fm.rows()}, {"cols", fm.cols()}};
  const auto h = header.dump();
  std::string out(kFeatureMagic, sizeof kFeatureMagic);
  const auto len = static_cast<std::uint32_t>(h.size());
  out.append(reinterpret_cast<const char*>(&len), sizeof len);
  out += h;
  append_raw(out, fm.timestamps);
  append_raw(out, fm.values);
  append_raw(out, fm.closes);
  return out;
}

/// Inputs that determine the feature store; a mismatch means ingest must be re-run.
std::string ingest_key(const RunConfig& cfg) {
  json key = {{"assets", cfg.assets}, {"indicators", cfg.doc.at("indicators")}};
  json files = json::object();
  for (const auto& a : cfg.assets) files[a] = cfg.csv_path(a).string();
  key["files"] = files;
  return fnv1a_hex(key.dump());
}

}  // namespace

void save_features(const fs::path& path, const market::FeatureMatrix& fm) {
  write_file(path, encode_features(fm));
}

market::FeatureMatrix load_features(const fs::path& path) {
  const auto bytes = read_file(path);
  if (bytes.size() < sizeof kFeatureMagic + 4 || std::memcmp(bytes.data(), kFeatureMagic, sizeof kFeatureMagic) != 0)
    throw DataError(path.string() + " is not a feature store");
  std::size_t pos = sizeof kFeatureMagic;
  std::uint32_t len = 0;
  std::memcpy(&len, bytes.data() + pos, sizeof len);
  pos += sizeof len;
  if (pos + len > bytes.size()) throw DataError("feature store header is truncated");
  const json header = json::parse(bytes.substr(pos, len), nullptr, false);
  if (header.is_discarded()) throw DataError("feature store header is corrupt");
  pos += len;
  market::FeatureMatrix fm;
  fm.asset_ids = header.at("asset_ids").get<std::vector<std::string>>();
  const auto rows = header.at("rows").get<std::size_t>();
  const auto cols = header.at("cols").get<std::size_t>();
  if (cols != fm.asset_ids.size() * market::kFeaturesPerAsset) throw DataError("feature store width mismatch");
  fm.timestamps = take_raw<EpochSeconds>(bytes, pos, rows);
  fm.values = take_raw<double>(bytes, pos, rows * cols);
  fm.closes = take_raw<double>(bytes, pos, rows * fm.asset_ids.size());
  if (pos != bytes.size()) throw DataError("feature store has trailing bytes");
  return fm;
}

fs::path features_dir(const RunConfig& cfg) { return cfg.output_dir / "features"; }

IngestResult cmd_ingest(const RunConfig& cfg) {
  std::vector<market::AssetSeries> series;
  json inputs = json::array();
  for (const auto& asset : cfg.assets) {
    const auto path = cfg.csv_path(asset);
    if (!fs::exists(path)) throw DataError("missing data file for asset " + asset + ": " + path.string());
    auto s = market::load_csv(path, asset);
    inputs.push_back({{"asset", asset},
                      {"file", path.string()},
                      {"content_hash", fnv1a_hex(read_file(path))},
                      {"bars", s.size()},
                      {"gaps", s.gaps}});
    log::debug("loaded " + std::to_string(s.size()) + " bars for " + asset);
    series.push_back(std::move(s));
  }
  const auto aligned = market::align_and_fill(series);
  const auto fm = market::build_features(aligned, cfg.indicators, cfg.parallel ? Exec::Parallel : Exec::Serial);

  const auto dir = features_dir(cfg);
  const auto bin = encode_features(fm);
  write_file(dir / "features.bin", bin);

  json manifest = {
      {"schema", "cryptoens.features/1"},
      {"config_hash", cfg.hash},
      {"seed", cfg.seed},
      {"ingest_key", ingest_key(cfg)},
      {"assets", cfg.assets},
      {"columns", fm.column_names()},
      {"rows", fm.rows()},
      {"data_begin", format_timestamp(aligned.front().bars.front().timestamp)},
      {"first_row", format_timestamp(fm.timestamps.front())},
      {"last_row", format_timestamp(fm.timestamps.back())},
      {"aligned_bars", aligned.front().size()},
      {"inputs", inputs},
      {"features_file", "features.bin"},
      {"features_hash", fnv1a_hex(bin)},
  };
  const auto text = manifest.dump(2) + "\n";
  write_file(dir / "manifest.json", text);

  IngestResult r;
  r.manifest = dir / "manifest.json";
  r.manifest_hash = fnv1a_hex(text);
  r.rows = fm.rows();
  r.columns = fm.cols();
  return r;
}

FeatureStore open_feature_store(const RunConfig& cfg) {
  const auto dir = features_dir(cfg);
  if (!fs::exists(dir / "manifest.json"))
    throw DataError("no feature store in " + dir.string() + "; run `cryptoens ingest` first");
  const auto text = read_file(dir / "manifest.json");
  const json manifest = json::parse(text, nullptr, false);
  if (manifest.is_discarded()) throw DataError("corrupt manifest " + (dir / "manifest.json").string());
  FeatureStore store;
  try {
    if (manifest.at("ingest_key").get<std::string>() != ingest_key(cfg))
      throw DataError("the feature store was built from different data or indicator settings; re-run ingest");
    const auto bin = read_file(dir / manifest.at("features_file").get<std::string>());
    if (fnv1a_hex(bin) != manifest.at("features_hash").get<std::string>())
      throw DataError("features.bin does not match its manifest; re-run ingest");
    store.raw = load_features(dir / manifest.at("features_file").get<std::string>());
    store.data_begin = parse_timestamp(manifest.at("data_begin").get<std::string>());
  } catch (const json::exception& e) {
    throw DataError(std::string("corrupt manifest: ") + e.what());
  }
  store.manifest_hash = fnv1a_hex(text);
  return store;
}

// ---- training ----

backtest::Schedule schedule_for(const RunConfig& cfg, const FeatureStore& store) {
  if (store.raw.rows() == 0) throw DataError("feature store is empty");
  if (cfg.test_end - kHour > store.raw.timestamps.back())
    throw DataError("data ends at " + format_timestamp(store.raw.timestamps.back()) +
                    ", before the test end " + format_timestamp(cfg.test_end));
  return backtest::build_schedule(store.data_begin, cfg.test_begin, cfg.test_end, cfg.train_months);
}

WindowData window_data(const RunConfig& cfg, const FeatureStore& store, const backtest::RetrainCycle& cycle) {
  const auto& raw = store.raw;
  const EpochSeconds first = raw.timestamps.front();
  if (cycle.train_end - kHour > raw.timestamps.back() || cycle.train_end <= first)
    throw DataError("training window ending " + format_timestamp(cycle.train_end) + " is outside the data");
  const EpochSeconds fit_begin = std::max(cycle.train_begin, first);
  auto norm = market::fit_apply_norm(raw, fit_begin, cycle.train_end);
  if (norm.stats.zero_std_count() > 0)
    log::warn(std::to_string(norm.stats.zero_std_count()) + " feature(s) have zero variance in window starting " +
              format_timestamp(cycle.train_begin) + "; they are fed as 0");

  WindowData wd;
  std::size_t begin = cycle.train_begin - kHour >= first ? raw.row_of(cycle.train_begin - kHour) : 0;
  begin = std::max(begin, cfg.env.window - 1);
  const std::size_t end = raw.row_of(cycle.train_end - kHour);
  if (end <= begin || end - begin < cfg.period_hours)
    throw DataError("training window ending " + format_timestamp(cycle.train_end) +
                    " has too little usable history for one validation period");
  wd.train_range = {begin, end};
  wd.stats = std::move(norm.stats);
  wd.features = std::make_shared<const market::FeatureMatrix>(std::move(norm.matrix));
  return wd;
}

fs::path snapshot_dir(const RunConfig& cfg, std::size_t window) {
  char name[32];
  std::snprintf(name, sizeof name, "window_%03zu", window);
  return cfg.output_dir / "snapshots" / name;
}

fs::path training_log_path(const RunConfig& cfg, std::size_t window) {
  char name[48];
  std::snprintf(name, sizeof name, "train_window_%03zu.jsonl", window);
  return cfg.output_dir / "logs" / name;
}

namespace {

json iteration_json(const ppo::IterationRecord& r) {
  return {{"type", "iteration"},
          {"iteration", r.iteration},
          {"episode_returns", r.episode_returns},
          {"steps", r.steps},
          {"updates", r.updates},
          {"skipped_updates", r.skipped_updates},
          {"learning_rate", r.learning_rate},
          {"reward_abs_max", r.reward_abs_max},
          {"loss", r.mean_diag.loss},
          {"clip_objective", r.mean_diag.clip_objective},
          {"value_loss", r.mean_diag.value_loss},
          {"entropy", r.mean_diag.entropy},
          {"approx_kl", r.mean_diag.approx_kl},
          {"clip_fraction", r.mean_diag.clip_fraction}};
}

}  // namespace

TrainWindowResult train_window(const RunConfig& cfg, const FeatureStore& store,
                               const backtest::Schedule& schedule, std::size_t window) {
  if (window >= schedule.cycles.size())
    throw ConfigError("window " + std::to_string(window) + " does not exist; the schedule has " +
                      std::to_string(schedule.cycles.size()) + " windows (0-based)");
  const auto& cycle = schedule.cycles[window];
  const auto wd = window_data(cfg, store, cycle);
  log::info("training window " + std::to_string(window) + " on " + format_timestamp(cycle.train_begin) + " .. " +
            format_timestamp(cycle.train_end) + " (" + std::to_string(wd.train_range.steps()) + " steps/episode)");

  auto periods = selection::sample_periods(wd.train_range, cfg.K, cfg.period_hours, derive_seed(cfg.seed, {window, 11}));
  selection::Selector selector(wd.features, cfg.env, periods, cfg.moving_window, cfg.parallel);
  ppo::TrainConfig tcfg = cfg.train;
  tcfg.seed = derive_seed(cfg.seed, {window, 12});
  auto trained = ppo::train(
      wd.features, cfg.env, wd.train_range, cfg.net, tcfg,
      [&](std::size_t epoch, const nn::NetworkWeights& w) {
        selector(epoch, w);
        log::debug("window " + std::to_string(window) + " validated at iteration " + std::to_string(epoch));
      });

  TrainWindowResult res;
  const auto best = selection::build_ensemble(selector.tracker());
  res.snapshots = selection::write_snapshot_set(snapshot_dir(cfg, window), static_cast<std::int64_t>(window),
                                                cfg.hash, cfg.seed, best, trained.weights, tcfg.iterations());
  res.log = std::move(trained.log);
  res.validations = selector.events();

  std::ostringstream out;
  json periods_json = json::array();
  for (const auto& p : periods)
    periods_json.push_back({{"id", p.id},
                            {"start", format_timestamp(wd.features->timestamps[p.range.begin] + kHour)},
                            {"end", format_timestamp(wd.features->timestamps[p.range.end] + kHour)}});
  out << json{{"type", "header"},
              {"config_hash", cfg.hash},
              {"seed", cfg.seed},
              {"window", window},
              {"train_begin", format_timestamp(cycle.train_begin)},
              {"train_end", format_timestamp(cycle.train_end)},
              {"steps_per_episode", wd.train_range.steps()},
              {"validation_periods", periods_json}}
             .dump()
      << '\n';
  std::size_t v = 0;
  for (const auto& rec : res.log) {
    out << iteration_json(rec).dump() << '\n';
    while (v < res.validations.size() && res.validations[v].epoch == rec.iteration) {
      const auto& ev = res.validations[v++];
      out << json{{"type", "validation"},
                  {"epoch", ev.epoch},
                  {"returns", ev.returns},
                  {"smoothed", ev.smoothed},
                  {"captured", ev.captured}}
                 .dump()
          << '\n';
    }
  }
  for (const auto& e : res.snapshots.entries)
    out << json{{"type", "snapshot"},
                {"file", e.file},
                {"period", e.period},
                {"epoch", e.epoch},
                {"smoothed_return", e.smoothed_return},
                {"hash", e.hash}}
               .dump()
        << '\n';
  write_file(training_log_path(cfg, window), out.str());
  return res;
}

std::vector<TrainWindowResult> cmd_train(const RunConfig& cfg, std::optional<std::size_t> window) {
  const auto store = open_feature_store(cfg);
  const auto schedule = schedule_for(cfg, store);
  std::vector<TrainWindowResult> out;
  if (window) {
    out.push_back(train_window(cfg, store, schedule, *window));
  } else {
    for (std::size_t w = 0; w < schedule.cycles.size(); ++w) out.push_back(train_window(cfg, store, schedule, w));
  }
  return out;
}

// ---- backtest ----

fs::path report_dir(const RunConfig& cfg) { return cfg.output_dir / "report"; }

backtest::BacktestReport cmd_backtest(const RunConfig& cfg, bool train_missing, bool greedy) {
  const auto store = open_feature_store(cfg);
  const auto schedule = schedule_for(cfg, store);

  backtest::BacktestOptions opt;
  opt.env = cfg.env;
  opt.seed = derive_seed(cfg.seed, {13});
  opt.greedy = greedy;
  opt.individuals = cfg.individuals;
  opt.exec = cfg.parallel ? Exec::Parallel : Exec::Serial;

  std::vector<backtest::PeriodResult> results;
  for (const auto& cycle : schedule.cycles) {
    const auto dir = snapshot_dir(cfg, cycle.id);
    if (!fs::exists(dir / "index.json")) {
      if (!train_missing)
        throw ModelError("no snapshots for window " + std::to_string(cycle.id) + " in " + dir.string() +
                         "; run `cryptoens train --window " + std::to_string(cycle.id) +
                         "` or pass --train-missing");
      train_window(cfg, store, schedule, cycle.id);
    }
    const auto loaded = selection::load_snapshot_set(dir);
    if (loaded.index.config_hash != cfg.hash)
      log::warn("snapshots for window " + std::to_string(cycle.id) + " were trained under config " +
                loaded.index.config_hash + " (current " + cfg.hash + ")");
    if (loaded.best.size() != cfg.K)
      throw ModelError("window " + std::to_string(cycle.id) + " has " + std::to_string(loaded.best.size()) +
                       " ensemble members, expected K=" + std::to_string(cfg.K) + "; retrain it");
    if (!(loaded.final_epoch->shape == cfg.net))
      throw ModelError("snapshots for window " + std::to_string(cycle.id) + " do not match the configured network");
    const auto wd = window_data(cfg, store, cycle);
    auto part = backtest::run_cycle(wd.features, schedule, cycle.id, {loaded.best, loaded.final_epoch}, opt);
    log::info("backtested window " + std::to_string(cycle.id) + " (" + std::to_string(cycle.weeks.size()) + " weeks)");
    results.insert(results.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  auto rep = backtest::distributional_report(std::move(results), schedule, cfg.env.initial_balance, cfg.histogram_bins);
  report::ReportContext ctx{cfg.hash, cfg.seed, greedy, cfg.test_begin, cfg.env.initial_balance};
  report::write_report_files(report_dir(cfg), rep, schedule, ctx);
  return rep;
}

}  // namespace cryptoens::pipeline

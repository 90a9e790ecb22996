#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <vector>

#include "cryptoens/agent.hpp"
#include "cryptoens/errors.hpp"
#include "cryptoens/model_selection.hpp"
#include "cryptoens/snapshot.hpp"
#include "support.hpp"

using namespace cryptoens;
using namespace cryptoens::selection;
using testing_support::TempDir;

namespace {

nn::NetShape small_shape(std::size_t obs, std::size_t D) {
  nn::NetShape s;
  s.input_dim = obs;
  s.seq_len = 3;
  s.fc_units = 3;
  s.hidden = 4;
  s.actions = D;
  return s;
}

env::EnvConfig small_env() {
  env::EnvConfig e;
  e.window = 3;
  return e;
}

std::shared_ptr<const nn::NetworkWeights> weights(std::uint64_t seed) {
  auto w = nn::xavier_init(small_shape(27, 2), seed);
  w.bn_initialized = true;
  return std::make_shared<const nn::NetworkWeights>(std::move(w));
}

}  // namespace

TEST_CASE("sample_periods") {
  const env::EpisodeRange train{100, 1100};
  const auto p = sample_periods(train, 9, 168, 42);
  REQUIRE(p.size() == 9);
  std::set<std::uint64_t> seeds;
  for (std::size_t k = 0; k < 9; ++k) {
    CHECK(p[k].id == k + 1);
    CHECK(p[k].range.begin >= train.begin);
    CHECK(p[k].range.end <= train.end);
    CHECK(p[k].range.steps() == 168);
    seeds.insert(p[k].seed);
  }
  CHECK(seeds.size() == 9);

  const auto again = sample_periods(train, 9, 168, 42);
  for (std::size_t k = 0; k < 9; ++k) CHECK(again[k].range.begin == p[k].range.begin);
  const auto other = sample_periods(train, 9, 168, 43);
  bool differs = false;
  for (std::size_t k = 0; k < 9; ++k) differs = differs || other[k].range.begin != p[k].range.begin;
  CHECK(differs);

  // Exactly one period's worth of room leaves one placement.
  const auto forced = sample_periods({100, 268}, 3, 168, 1);
  for (const auto& q : forced) CHECK(q.range.begin == 100);

  CHECK_THROWS_AS(sample_periods({100, 200}, 3, 168, 1), DataError);
  CHECK_THROWS_AS(sample_periods(train, 0, 168, 1), ConfigError);
}

TEST_CASE("validate") {
  SUBCASE("flat prices give a zero return whatever the policy does") {
    auto fm = testing_support::price_matrix(std::vector<std::vector<double>>(60, {50.0, 2.0}));
    env::TradingEnv env(fm, small_env());
    const auto w = nn::xavier_init(small_shape(fm->cols() + 3, 2), 3);
    const ValidationPeriod period{1, {5, 50}, 9};
    CHECK(std::abs(validate(w, env, period, 11)) < 1e-12);
  }
  SUBCASE("deterministic given the seed") {
    auto fm = testing_support::random_matrix(80, 2, 4);
    env::TradingEnv env(fm, small_env());
    const auto w = weights(8);
    const ValidationPeriod period{1, {5, 60}, 9};
    const double a = validate(*w, env, period, validation_seed(period, 3));
    CHECK(validate(*w, env, period, validation_seed(period, 3)) == a);
    CHECK(validate(*w, env, period, validation_seed(period, 4)) != a);
    const auto sampled = sample_periods({5, 60}, 2, 20, 1);
    CHECK(validation_seed(sampled[0], 3) != validation_seed(sampled[1], 3));
  }
}

TEST_CASE("tracker captures on strict improvement of the moving average") {
  const auto w1 = weights(1), w2 = weights(2);
  SUBCASE("a single evaluation is captured") {
    ValidationTracker t(2, 5);
    CHECK(update_tracker(t, 1, 0.05, 1, w1));
    CHECK(t.best[0] == 0.05);
    CHECK(t.best_snapshot[0]->epoch == 1);
    CHECK(t.best_snapshot[0]->weights == w1);
    CHECK(t.best[1] == -std::numeric_limits<double>::infinity());
  }
  SUBCASE("moving average over the last W evaluations") {
    ValidationTracker t(1, 3);
    for (double r : {0.1, 0.2, 0.3, 0.4}) update_tracker(t, 1, r, 1, w1);
    CHECK(t.smoothed(0) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(t.best[0] == doctest::Approx(0.3).epsilon(1e-15));
  }
  SUBCASE("ties keep the earlier snapshot") {
    ValidationTracker t(1, 1);
    CHECK(update_tracker(t, 1, 0.2, 2, w1));
    CHECK_FALSE(update_tracker(t, 1, 0.2, 4, w2));
    CHECK_FALSE(update_tracker(t, 1, -0.5, 6, w2));
    CHECK(update_tracker(t, 1, 0.25, 8, w2));
    CHECK(t.best_snapshot[0]->epoch == 8);
  }
  SUBCASE("errors") {
    ValidationTracker t(2, 2);
    CHECK_THROWS_AS(update_tracker(t, 0, 0.1, 1, w1), ModelError);
    CHECK_THROWS_AS(update_tracker(t, 3, 0.1, 1, w1), ModelError);
    CHECK_THROWS_AS(build_ensemble(t), ModelError);
    CHECK_THROWS_AS(ValidationTracker(2, 0), ConfigError);
  }
}

TEST_CASE("ensemble of K period winners") {
  const auto w1 = weights(1), w2 = weights(2);
  ValidationTracker t(3, 2);
  update_tracker(t, 1, 0.3, 2, w1);
  update_tracker(t, 2, 0.1, 2, w1);
  update_tracker(t, 3, 0.0, 2, w1);
  update_tracker(t, 1, 0.0, 4, w2);  // average 0.15, no capture
  update_tracker(t, 2, 0.2, 4, w2);  // average 0.15, capture
  update_tracker(t, 3, 0.0, 4, w2);  // average 0.0, tie
  const auto e = build_ensemble(t);
  REQUIRE(e.size() == 3);
  CHECK(e[0].weights == w1);
  CHECK(e[1].weights == w2);
  CHECK(e[2].weights == w1);
  CHECK(e[1].period_id == 2);
  CHECK(e[1].smoothed_return == doctest::Approx(0.15).epsilon(1e-15));

  // The ensemble action density is the equal-weight mixture of the members.
  const std::vector<double> state(3 * 27, 0.3);
  const std::vector<double> hmax = {70.0, 12.0};
  std::vector<policy::ActionDistribution> comps;
  for (const auto& m : {e[0], e[1]})
    comps.push_back(agent::distribution(nn::forward(*m.weights, state, 1, nn::Mode::Eval, Exec::Serial), 0, hmax));
  const policy::MixturePolicy mix(comps);
  const std::vector<double> a = {5.0, -3.0};
  const double want = std::log(0.5 * std::exp(policy::log_prob(comps[0], a)) + 0.5 * std::exp(policy::log_prob(comps[1], a)));
  CHECK(mix.log_prob(a) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("Selector validates every period and records captures") {
  auto fm = testing_support::random_matrix(120, 2, 6);
  const auto periods = sample_periods({5, 100}, 3, 30, 2);
  Selector serial(fm, small_env(), periods, 2, false);
  Selector parallel(fm, small_env(), periods, 2, true);
  for (std::size_t epoch : {2, 4, 6}) {
    const auto w = weights(epoch);
    serial(epoch, *w);
    parallel(epoch, *w);
  }
  REQUIRE(serial.events().size() == 3);
  CHECK(serial.events()[0].captured == std::vector<std::size_t>{1, 2, 3});
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(serial.events()[i].returns == parallel.events()[i].returns);
    CHECK(serial.events()[i].captured == parallel.events()[i].captured);
  }
  CHECK(build_ensemble(serial.tracker()).size() == 3);
}

TEST_CASE("snapshot set on disk") {
  TempDir dir("snapset");
  const auto w1 = weights(1), w2 = weights(2), fin = weights(3);
  std::vector<ModelSnapshot> best = {{w1, 2, 1, 0.1}, {w2, 4, 2, 0.2}, {w1, 2, 3, 0.05}};

  // A file left over from an earlier run of the window disappears.
  std::ofstream(dir.path() / "w7_p9_e99.snap") << "stale";
  const auto set = write_snapshot_set(dir.path(), 7, "cfg", 11, best, *fin, 10);
  REQUIRE(set.entries.size() == 4);
  CHECK(set.entries.back().period == -1);
  CHECK(set.entries.back().file == "w7_final_e10.snap");
  CHECK(set.entries[1].file == "w7_p2_e4.snap");
  std::size_t files = 0;
  for (const auto& f : std::filesystem::directory_iterator(dir.path())) files += f.path().extension() == ".snap";
  CHECK(files == 4);

  const auto loaded = load_snapshot_set(dir.path());
  REQUIRE(loaded.best.size() == 3);
  CHECK(loaded.best[0] == loaded.best[2]);
  CHECK(loaded.best[0] != loaded.best[1]);
  CHECK(loaded.best[1]->params == w2->params);
  CHECK(loaded.final_epoch->params == fin->params);
  CHECK(loaded.index.config_hash == "cfg");
  CHECK(loaded.index.entries[2].smoothed_return == 0.05);

  // Rewriting the same content is byte-identical.
  std::ifstream in(dir.path() / "index.json");
  const std::string first((std::istreambuf_iterator<char>(in)), {});
  write_snapshot_set(dir.path(), 7, "cfg", 11, best, *fin, 10);
  std::ifstream in2(dir.path() / "index.json");
  CHECK(std::string((std::istreambuf_iterator<char>(in2)), {}) == first);

  SUBCASE("tampered snapshot") {
    auto snap = nn::load_snapshot(dir.path() / "w7_p2_e4.snap");
    snap.weights.params[0] += 1.0;
    nn::save_snapshot(dir.path() / "w7_p2_e4.snap", snap);
    CHECK_THROWS_AS(load_snapshot_set(dir.path()), ModelError);
  }
  SUBCASE("corrupt index") {
    std::ofstream(dir.path() / "index.json") << "{\"window\": 7";
    CHECK_THROWS_AS(load_snapshot_set(dir.path()), ModelError);
  }
  SUBCASE("missing index") {
    std::filesystem::remove(dir.path() / "index.json");
    CHECK_THROWS_AS(load_snapshot_set(dir.path()), ModelError);
  }
}

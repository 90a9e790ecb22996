#include "cryptoens/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

namespace cryptoens::log {
namespace {

std::atomic<int>& level_ref() {
  static std::atomic<int> level = [] {
    const char* env = std::getenv("CRYPTOENS_LOG");
    return static_cast<int>(env ? parse_level(env) : Level::Info);
  }();
  return level;
}

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

Level parse_level(std::string_view name) {
  if (name == "error") return Level::Error;
  if (name == "warn" || name == "warning") return Level::Warn;
  if (name == "debug") return Level::Debug;
  return Level::Info;
}

Level threshold() { return static_cast<Level>(level_ref().load()); }
void set_threshold(Level level) { level_ref().store(static_cast<int>(level)); }

void write(Level level, std::string_view message) {
  if (static_cast<int>(level) > level_ref().load()) return;
  static constexpr const char* tags[] = {"error", "warn", "info", "debug"};
  std::lock_guard lock(sink_mutex());
  std::cerr << "[" << tags[static_cast<int>(level)] << "] " << message << '\n';
}

}  // namespace cryptoens::log

#include "tiad/log.hpp"

#include <atomic>
#include <mutex>

namespace tiad::log {
namespace {
std::atomic<int> g_level{static_cast<int>(Level::Info)};
std::mutex g_mutex;

const char* tag(Level level) {
  switch (level) {
    case Level::Error: return "error";
    case Level::Warn: return "warn";
    case Level::Info: return "info";
    case Level::Debug: return "debug";
  }
  return "?";
}
}  // namespace

Level verbosity() { return static_cast<Level>(g_level.load()); }
void set_verbosity(Level level) { g_level.store(static_cast<int>(level)); }

void write(Level level, std::string_view message) {
  std::lock_guard lock(g_mutex);
  std::cerr << "[" << tag(level) << "] " << message << '\n';
}

}  // namespace tiad::log

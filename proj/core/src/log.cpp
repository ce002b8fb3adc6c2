#include "slt/log.hpp"

#include <iostream>
#include <mutex>

namespace slt::log {

namespace {
std::mutex g_mutex;
Level g_min = Level::kInfo;
Sink g_sink;

const char* tag(Level level) {
  switch (level) {
    case Level::kDebug: return "debug";
    case Level::kInfo: return "info";
    case Level::kWarn: return "warn";
    case Level::kError: return "error";
  }
  return "?";
}
}  // namespace

void write(Level level, std::string_view message) {
  std::lock_guard lock(g_mutex);
  if (level < g_min) return;
  if (g_sink) {
    g_sink(level, message);
    return;
  }
  std::cerr << '[' << tag(level) << "] " << message << '\n';
}

void set_min_level(Level level) {
  std::lock_guard lock(g_mutex);
  g_min = level;
}

void set_sink(Sink sink) {
  std::lock_guard lock(g_mutex);
  g_sink = std::move(sink);
}

}  // namespace slt::log

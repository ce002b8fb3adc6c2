#pragma once

#include <functional>
#include <string>
#include <string_view>

namespace slt::log {

enum class Level { kDebug, kInfo, kWarn, kError };

using Sink = std::function<void(Level, std::string_view)>;

// Line-oriented logging to stderr. Lines carry no timestamps so that two
// identical runs produce identical logs.
void write(Level level, std::string_view message);
inline void info(std::string_view m) { write(Level::kInfo, m); }
inline void warn(std::string_view m) { write(Level::kWarn, m); }
inline void error(std::string_view m) { write(Level::kError, m); }
inline void debug(std::string_view m) { write(Level::kDebug, m); }

void set_min_level(Level level);
// Replaces the stderr sink (tests capture warnings this way). Pass an empty
// function to restore the default.
void set_sink(Sink sink);

}  // namespace slt::log

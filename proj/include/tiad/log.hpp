#pragma once

#include <iostream>
#include <sstream>
#include <string_view>

namespace tiad::log {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

Level verbosity();
void set_verbosity(Level level);

void write(Level level, std::string_view message);

template <class... Args>
void emit(Level level, const Args&... args) {
  if (level > verbosity()) return;
  std::ostringstream os;
  (os << ... << args);
  write(level, os.str());
}

template <class... Args> void error(const Args&... a) { emit(Level::Error, a...); }
template <class... Args> void warn(const Args&... a) { emit(Level::Warn, a...); }
template <class... Args> void info(const Args&... a) { emit(Level::Info, a...); }
template <class... Args> void debug(const Args&... a) { emit(Level::Debug, a...); }

}  // namespace tiad::log

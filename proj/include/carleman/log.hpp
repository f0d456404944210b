#pragma once

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <memory>
#include <string>

namespace carleman {

/// Library-wide logger on stderr. CARLEMAN_LOG selects the level
/// (trace, debug, info, warn, error, off); the default is warn.
inline spdlog::logger& log() {
  static std::shared_ptr<spdlog::logger> logger = [] {
    auto l = spdlog::stderr_color_mt("carleman");
    l->set_pattern("[%l] %v");
    const char* env = std::getenv("CARLEMAN_LOG");
    l->set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
    return l;
  }();
  return *logger;
}

}  // namespace carleman

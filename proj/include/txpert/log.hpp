#pragma once

#include <spdlog/spdlog.h>

namespace txpert::log {

/// Sets the level from TXPERT_LOG (trace, debug, info, warn, error, off);
/// defaults to warn.
void init_from_env();

template <typename... Args>
void info(fmt::format_string<Args...> fmt, Args&&... args) {
    spdlog::info(fmt, std::forward<Args>(args)...);
}

template <typename... Args>
void warn(fmt::format_string<Args...> fmt, Args&&... args) {
    spdlog::warn(fmt, std::forward<Args>(args)...);
}

template <typename... Args>
void debug(fmt::format_string<Args...> fmt, Args&&... args) {
    spdlog::debug(fmt, std::forward<Args>(args)...);
}

}  // namespace txpert::log

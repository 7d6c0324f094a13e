#include "txpert/log.hpp"

#include <cstdlib>
#include <string>

namespace txpert::log {

void init_from_env() {
    const char* env = std::getenv("TXPERT_LOG");
    spdlog::level::level_enum level = spdlog::level::warn;
    if (env != nullptr && *env != '\0') {
        level = spdlog::level::from_str(env);
        // from_str maps unknown names to off; keep warnings visible instead.
        if (level == spdlog::level::off && std::string(env) != "off") level = spdlog::level::warn;
    }
    spdlog::set_level(level);
}

}  // namespace txpert::log

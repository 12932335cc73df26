#include "sqfit/log.hpp"

#include <spdlog/spdlog.h>

#include <cstdlib>
#include <string_view>

namespace sqfit {

void init_logging() {
    const char* env = std::getenv("SQFIT_LOG");
    const std::string_view level = env ? env : "warn";
    if (level == "error") spdlog::set_level(spdlog::level::err);
    else if (level == "info") spdlog::set_level(spdlog::level::info);
    else if (level == "debug") spdlog::set_level(spdlog::level::debug);
    else spdlog::set_level(spdlog::level::warn);
    spdlog::set_pattern("[%l] %v");
}

}  // namespace sqfit

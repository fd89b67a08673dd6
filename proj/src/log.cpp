// src/log.cpp
#include "fpg/log.hpp"

#include <cstdlib>
#include <string>

namespace fpg {

void init_logging() {
  const char* env = std::getenv("FPG_LOG_LEVEL");
  auto level = spdlog::level::info;
  if (env != nullptr) {
    level = spdlog::level::from_str(env);
  }
  spdlog::set_level(level);
  spdlog::set_pattern("[%H:%M:%S.%e] [%l] %v");
}

}  // namespace fpg

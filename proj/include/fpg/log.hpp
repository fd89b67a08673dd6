// include/fpg/log.hpp
#pragma once

#include <spdlog/spdlog.h>

namespace fpg {

// Applies FPG_LOG_LEVEL (trace|debug|info|warn|error|off) to the default
// logger. Safe to call more than once.
void init_logging();

}  // namespace fpg

#pragma once

#include <spdlog/spdlog.h>

namespace scriptalign {

// Reads SCRIPTALIGN_LOG (trace|debug|info|warn|error|off) once and applies it
// to the default logger. Default level is warn.
void init_logging();

}  // namespace scriptalign

#include "scriptalign/log.hpp"

#include <cstdlib>
#include <mutex>
#include <string>

namespace scriptalign {

void init_logging() {
  static std::once_flag once;
  std::call_once(once, [] {
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("SCRIPTALIGN_LOG")) {
      const auto level = spdlog::level::from_str(env);
      // from_str maps unknown names to off; only accept the literal "off".
      if (level != spdlog::level::off || std::string(env) == "off") spdlog::set_level(level);
    }
  });
}

}  // namespace scriptalign

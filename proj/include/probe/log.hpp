#pragma once

#include <string_view>

namespace probe::log {

enum class Level { debug, info, warn, error, quiet };

void set_level(Level level);
Level level();

void debug(std::string_view message);
void info(std::string_view message);
void warn(std::string_view message);
void error(std::string_view message);

}  // namespace probe::log

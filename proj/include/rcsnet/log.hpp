#pragma once

#include <functional>
#include <string>

namespace rcsnet::log {

enum class Level { Info, Warning };

using Sink = std::function<void(Level, const std::string&)>;

// Default sink writes "warning: ..." / "info: ..." lines to stderr.
void set_sink(Sink sink);
void reset_sink();

void info(const std::string& message);
void warn(const std::string& message);

// Counts warnings emitted since the last reset; used by tests.
std::size_t warning_count();
void reset_warning_count();

}  // namespace rcsnet::log

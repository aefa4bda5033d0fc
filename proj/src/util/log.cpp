#include "rcsnet/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace rcsnet::log {
namespace {

std::mutex g_mutex;
Sink g_sink;
std::atomic<std::size_t> g_warnings{0};

void emit(Level level, const std::string& message) {
  std::lock_guard lock(g_mutex);
  if (g_sink) {
    g_sink(level, message);
    return;
  }
  std::cerr << (level == Level::Warning ? "warning: " : "info: ") << message << '\n';
}

}  // namespace

void set_sink(Sink sink) {
  std::lock_guard lock(g_mutex);
  g_sink = std::move(sink);
}

void reset_sink() { set_sink(nullptr); }

void info(const std::string& message) { emit(Level::Info, message); }

void warn(const std::string& message) {
  ++g_warnings;
  emit(Level::Warning, message);
}

std::size_t warning_count() { return g_warnings.load(); }
void reset_warning_count() { g_warnings = 0; }

}  // namespace rcsnet::log

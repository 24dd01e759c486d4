#include "wac/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace wac {

namespace {
std::atomic<bool> g_enabled{true};
std::mutex g_mutex;
}  // namespace

void log_warning(std::string_view message) {
  if (!g_enabled) return;
  std::lock_guard lock(g_mutex);
  std::cerr << "warning: " << message << '\n';
}

void set_warnings_enabled(bool enabled) { g_enabled = enabled; }

bool warnings_enabled() { return g_enabled; }

}  // namespace wac

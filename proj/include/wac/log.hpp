#pragma once

#include <string_view>

namespace wac {

// Warnings go to stderr unless silenced (tests silence them to keep output
// readable).
void log_warning(std::string_view message);
void set_warnings_enabled(bool enabled);
bool warnings_enabled();

}  // namespace wac

#pragma once

#include <string_view>

namespace lfe {

// Verbosity comes from the GLUE_LOG environment variable: unset/0 silent,
// 1 stage-level info, 2 debug. Messages go to stderr.
int log_level();
void log_info(std::string_view msg);
void log_debug(std::string_view msg);

}  // namespace lfe

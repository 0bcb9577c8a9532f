#include "lfe/logging.hpp"

#include <cstdlib>
#include <iostream>
#include <string>

namespace lfe {

int log_level() {
  static const int level = [] {
    const char* env = std::getenv("GLUE_LOG");
    if (env == nullptr || *env == '\0') return 0;
    const std::string s(env);
    if (s == "info") return 1;
    if (s == "debug") return 2;
    try {
      return std::stoi(s);
    } catch (...) {
      return 0;
    }
  }();
  return level;
}

void log_info(std::string_view msg) {
  if (log_level() >= 1) std::cerr << "[lfe] " << msg << '\n';
}

void log_debug(std::string_view msg) {
  if (log_level() >= 2) std::cerr << "[lfe:debug] " << msg << '\n';
}

}  // namespace lfe

#pragma once

#include <iostream>
#include <string>

namespace bayespde {

enum class LogLevel { Quiet = 0, Warning = 1, Info = 2 };

/// Process-wide log sink for warnings and progress. Defaults to stderr at Warning.
struct Log {
  static LogLevel& level() {
    static LogLevel lvl = LogLevel::Warning;
    return lvl;
  }
  static std::ostream*& stream() {
    static std::ostream* os = &std::cerr;
    return os;
  }
  static int& warning_count() {
    static int count = 0;
    return count;
  }
};

inline void log_warning(const std::string& msg) {
  ++Log::warning_count();
  if (Log::level() >= LogLevel::Warning && Log::stream()) *Log::stream() << "warning: " << msg << '\n';
}

inline void log_info(const std::string& msg) {
  if (Log::level() >= LogLevel::Info && Log::stream()) *Log::stream() << msg << '\n';
}

}  // namespace bayespde

#pragma once

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>

namespace cfrd {

// Log level comes from the CFRD_LOG environment variable (0 = quiet).
inline int log_level() {
  static int level = [] {
    const char* env = std::getenv("CFRD_LOG");
    return env ? std::atoi(env) : 0;
  }();
  return level;
}

template <typename... Args>
void log(int level, const char* fmt, Args... args) {
  if (log_level() >= level) {
    std::fprintf(stderr, "[cfrd] ");
    std::fprintf(stderr, fmt, args...);
    std::fprintf(stderr, "\n");
  }
}

inline void log(int level, const char* msg) { log(level, "%s", msg); }

// 17 significant digits: enough to round-trip an IEEE double exactly.
inline std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline double parse_double(const std::string& s) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str())
    throw std::runtime_error("bad numeric field: " + s);
  return v;
}

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace cfrd

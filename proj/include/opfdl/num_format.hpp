#pragma once

#include <charconv>
#include <cstdlib>
#include <string>

namespace opfdl {

// Shortest decimal string that round-trips to the exact same double. Used for
// every number we serialize (datasets, CSVs, config echoes) so that repeated
// runs are byte-identical and loads are bit-exact.
inline std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s, bool& ok) {
  const char* p = s.c_str();
  char* end = nullptr;
  double v = std::strtod(p, &end);
  ok = (end != p) && (*end == '\0');
  return v;
}

}  // namespace opfdl

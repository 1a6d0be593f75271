#pragma once

#include <charconv>
#include <string>

namespace rbse {

// Shortest round-trip-exact decimal form; every text export uses this so
// outputs stay byte-stable across runs.
inline std::string format_double(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

}  // namespace rbse

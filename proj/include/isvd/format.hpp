#pragma once

#include <charconv>
#include <string>

namespace isvd {

// Shortest decimal that round-trips to the same double; keeps CSV and JSON
// output byte-stable across runs.
inline std::string formatDouble(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

}  // namespace isvd

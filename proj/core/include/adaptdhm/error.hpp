#pragma once

#include <stdexcept>
#include <string>

namespace adaptdhm {

// Thrown for every contract violation in the library: shape mismatches,
// malformed input files, bad configuration, non-finite losses.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

inline void require(bool cond, const char* msg) {
  if (!cond) throw Error(msg);
}

}  // namespace adaptdhm

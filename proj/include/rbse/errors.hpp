#pragma once

#include <stdexcept>
#include <string>

namespace rbse {

// Error taxonomy maps 1:1 onto process exit codes (validation 1, check 2, io 3).

struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

struct CheckError : std::runtime_error {
  explicit CheckError(const std::string& what) : std::runtime_error(what) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rbse

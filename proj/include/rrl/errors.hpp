#pragma once

#include <stdexcept>
#include <string>

namespace rrl {

/// Malformed configuration text or inconsistent option values.
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

/// File access or on-disk format problems (missing files, bad magic, truncation).
class io_error : public std::runtime_error {
 public:
  explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rrl

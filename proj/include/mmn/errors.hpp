#pragma once

#include <stdexcept>
#include <string>

namespace mmn {

// Bad user input: malformed files, invalid characters, out-of-domain arguments.
// CLI maps this family to exit code 1.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape/dimension mismatches between tensors.
class DimensionError : public InputError {
 public:
  explicit DimensionError(const std::string& msg) : InputError(msg) {}
};

// Numeric failures at runtime (non-finite loss, corrupt tape). Exit code 2.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mmn

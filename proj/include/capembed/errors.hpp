#pragma once

#include <stdexcept>
#include <string>

namespace capembed {

// Invalid arguments, bad shapes, malformed configs. The CLI maps this
// family to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Shape/dimension mismatches between tensors.
class DimensionError : public ValidationError {
 public:
  explicit DimensionError(const std::string& what) : ValidationError(what) {}
};

// Malformed, truncated, or wrong-magic files.
class FormatError : public ValidationError {
 public:
  explicit FormatError(const std::string& what) : ValidationError(what) {}
};

}  // namespace capembed

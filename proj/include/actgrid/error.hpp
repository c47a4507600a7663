#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace actgrid {

/// Malformed input data (bad line, bad header, invalid value).
/// `line()` is 1-based, or 0 when the error is not tied to a line.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Two objects that must agree (table vs grid, tensor shapes) do not.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace actgrid

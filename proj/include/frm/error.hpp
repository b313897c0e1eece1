#pragma once

#include <stdexcept>
#include <string>

namespace frm {

// Domain or validation failure: bad argument, invalid state transition,
// unsatisfiable precondition. The CLI maps this to exit status 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed input text (config, event log, rotation records). Exit status 2.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what, long line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  long line() const noexcept { return line_; }

 private:
  long line_ = 0;
};

}  // namespace frm

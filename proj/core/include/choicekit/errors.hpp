#pragma once

#include <stdexcept>
#include <string>

namespace choicekit {

// Malformed or inconsistent input: bad files, id mismatches, violated
// preconditions. The CLI maps this to exit code 3.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure during computation (non-finite objective, singular
// system where a solution is required). The CLI maps this to exit code 4.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace choicekit

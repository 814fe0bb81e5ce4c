#pragma once

#include <stdexcept>
#include <string>

namespace ptotr {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// A Poisson rate that is zero (or negative) where a positive count was observed.
class DegenerateRateError : public Error {
 public:
  using Error::Error;
};

// The maximum likelihood estimate does not exist inside the open constraint set.
class NonexistenceError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace ptotr

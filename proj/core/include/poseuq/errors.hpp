#pragma once

#include <stdexcept>
#include <string>

namespace poseuq {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid input values, configurations or preconditions.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// File system or parse failures.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace poseuq

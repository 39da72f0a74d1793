#pragma once

#include <stdexcept>
#include <string>

namespace semtok {

// Raised for invalid inputs, shape mismatches and corrupt data. The CLI maps
// it to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A file whose magic, version or length does not match its format.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace semtok

#pragma once

#include <stdexcept>
#include <string>

namespace relicd {

// Bad user input: config values, malformed files, unknown ids. The CLI maps
// these to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure during training or optimization (non-finite loss or
// gradient). The CLI maps these to exit code 2.
class NumericsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace relicd

#pragma once

#include <stdexcept>
#include <string>

namespace jointfair {

// Bad input, schema, or configuration. The CLI maps these to exit code 2.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failure while solving. The CLI maps these to exit code 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace jointfair

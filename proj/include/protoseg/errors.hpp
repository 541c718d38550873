#pragma once

#include <stdexcept>

namespace protoseg {

/// Malformed or truncated input file. The CLI maps this to exit code 2.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Non-finite value where the pipeline requires finite math (NaN loss,
/// poisoned checkpoint). The CLI maps this to exit code 3.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace protoseg

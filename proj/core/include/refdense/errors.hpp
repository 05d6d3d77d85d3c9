#pragma once

#include <stdexcept>
#include <string>

namespace refdense {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor extents do not line up (messages name both shapes).
struct DimensionError : Error {
  using Error::Error;
};

// Invalid configuration (kernel widths, head counts, scale counts, ...).
struct ConfigError : Error {
  using Error::Error;
};

// Malformed input file: vocabulary, labels, manifests, specs.
struct SchemaError : Error {
  using Error::Error;
};

// Valid schema but inconsistent content: T mismatches, non-finite values,
// unsatisfiable generation targets.
struct DataError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

// Training produced a non-finite loss or gradient.
struct DivergenceError : Error {
  using Error::Error;
};

// Gradient checking could not probe the function (non-finite loss).
struct ProbeError : Error {
  using Error::Error;
};

}  // namespace refdense

#pragma once

#include <stdexcept>
#include <string>

namespace msd {

// Dimension/shape mismatches between tensors, masks, or sequences.
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Too many objects for the identity bank, or similar capacity overflow.
struct CapacityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or truncated files (PPM/PGM/weights/logits/config).
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Mask label outside the valid [0, M] range.
struct LabelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Scalar argument outside its documented range.
struct RangeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid static configuration (even kernel size, bad layer counts, ...).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Propagation requested against an empty memory bank.
struct EmptyMemoryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad call-level arguments (empty ensemble list, unknown flag value, ...).
struct ArgumentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace msd

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace scanident {

inline constexpr const char* kVersion = "0.1.0";

using index_t = std::int64_t;

// Malformed or shape-mismatched input data.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem / stream failure.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A required calibration record is absent from the cache.
struct MissingCalibrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace scanident

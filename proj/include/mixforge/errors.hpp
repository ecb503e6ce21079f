#pragma once

#include <stdexcept>

namespace mixforge {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Tensor/vector dimensions do not line up.
struct ShapeError : Error { using Error::Error; };

/// An operation received an empty list it cannot act on.
struct EmptyInputError : Error { using Error::Error; };

/// Mixing weights are negative or do not sum to one.
struct WeightError : Error { using Error::Error; };

/// An image carries the wrong value-range tag for the requested operation.
struct RangeTagError : Error { using Error::Error; };

/// A file is malformed, truncated, or unwritable.
struct FormatError : Error { using Error::Error; };

/// Non-finite values where finite ones are required.
struct NumericsError : Error { using Error::Error; };

/// A dataset with zero samples was passed where samples are needed.
struct EmptyDatasetError : Error { using Error::Error; };

/// Invalid run configuration or pipeline description.
struct ConfigError : Error { using Error::Error; };

}  // namespace mixforge

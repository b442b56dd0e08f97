#pragma once

#include <stdexcept>
#include <string>

namespace tddp {

/// Finite truncation cannot represent the requested process (an all-zero
/// thinned column, or more leading zeros than rows).
class UnderTruncationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unusable input data (bad CSV rows, empty groups).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// NaN/Inf or underflow detected during sampling.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tddp

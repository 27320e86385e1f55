#pragma once

#include <stdexcept>
#include <string>

namespace hetmed {

/// Malformed input: bad files, bad configuration, datasets that fail
/// validation. Mapped to CLI exit code 2.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

/// Estimation failed on numerically degenerate data (zero-variance
/// regressor, negative BCES denominator, unstable bootstrap, ...).
/// Mapped to CLI exit code 3.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace hetmed

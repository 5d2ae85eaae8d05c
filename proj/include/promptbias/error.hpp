#pragma once

#include <stdexcept>
#include <string>

namespace promptbias {

/// Malformed or inconsistent input data (files, ids, labels).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A computation produced a non-finite value or failed to converge.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument combination supplied by a caller or the command line.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace promptbias

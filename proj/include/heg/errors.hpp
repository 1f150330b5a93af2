#pragma once

#include <stdexcept>
#include <string>

namespace heg {

// Base of every error thrown by the library. The C API maps subclasses to
// status codes, so new error kinds must derive from one of the groups below.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or width disagreement between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Argument outside the operation's domain (empty input, bad index, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data: files, annotations, feature lookups.
class DataError : public Error {
 public:
  using Error::Error;
};

// Binary file layout problems. Messages carry the byte offset.
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

// NaN/Inf produced or consumed where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Broken internal contract, e.g. a backward pass fed a foreign trace.
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace heg

#pragma once

#include <stdexcept>

namespace autoseries {

// Base class for every error raised by the library, so callers can catch
// library failures without also swallowing unrelated std exceptions.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : Error {
  using Error::Error;
};

struct DomainError : Error {
  using Error::Error;
};

struct ShapeError : Error {
  using Error::Error;
};

struct NumericError : Error {
  using Error::Error;
};

struct SingularityError : Error {
  using Error::Error;
};

}  // namespace autoseries

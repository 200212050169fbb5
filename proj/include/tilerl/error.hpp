#pragma once

#include <stdexcept>
#include <string>

namespace tilerl {

// Base of every error the library throws. The concrete type says which
// contract was broken; what() carries the detail.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

// Malformed input: bad shapes, bad action sets, bad config values.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// The caller used an object in a state that forbids the call
// (stepping a finished world, reusing a consumed tape).
class ContractError : public Error {
 public:
  using Error::Error;
};

// NaN or infinity where a finite number is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

class TemplateError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

}  // namespace tilerl

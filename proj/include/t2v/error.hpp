#pragma once

#include <stdexcept>
#include <string>

namespace t2v {

// Base of all library errors. Subclasses sort failures into the two CLI
// exit classes: ValidationError-derived -> exit 2, everything else -> exit 3.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

// Input file that does not parse; message carries file and line.
class ParseError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Cross-reference to a record that does not exist.
class IntegrityError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// A (video, dimension) or (model, dimension) group with too little data.
class CoverageError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Constant vectors where a correlation is requested, single-class
// detection data, and similar statistically meaningless inputs.
class DegenerateDataError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace t2v

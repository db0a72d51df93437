#pragma once

#include <stdexcept>
#include <string>

namespace nnn {

/// Base class for every error raised by the library. Each subclass maps to one
/// failure mode a caller may want to handle separately.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ProjectionSingular : public Error {
 public:
  using Error::Error;
};

class QuadratureDiverged : public Error {
 public:
  using Error::Error;
};

class NonFiniteDerivative : public Error {
 public:
  using Error::Error;
};

class ResidualCheckFailed : public Error {
 public:
  using Error::Error;
};

class UnknownPrescriber : public Error {
 public:
  using Error::Error;
};

class DegeneratePrescriber : public Error {
 public:
  using Error::Error;
};

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

class CorruptCheckpoint : public Error {
 public:
  using Error::Error;
};

class ConstantField : public Error {
 public:
  using Error::Error;
};

class AllZero : public Error {
 public:
  using Error::Error;
};

class DisconnectedMesh : public Error {
 public:
  using Error::Error;
};

/// An output location already holds artifacts and overwriting was not requested.
class OutputExists : public Error {
 public:
  using Error::Error;
};

/// Bad user input (config file, CLI flags). Carries the offending field name.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& what)
      : Error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace nnn

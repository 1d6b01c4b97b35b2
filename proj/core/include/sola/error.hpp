#pragma once

#include <stdexcept>
#include <string>

namespace sola {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A scalar argument is outside its valid range (temperature, sizes, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// An operation met NaN or infinite input where finite values are required.
class NonFiniteError : public ContractError {
 public:
  using ContractError::ContractError;
};

/// Reduction over an empty extent.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed or missing dataset files.
class IngestionError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration document; `key()` names the offending entry.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what)
      : Error(what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// A checkpoint does not fit the dataset it is applied to.
class CompatibilityError : public Error {
 public:
  using Error::Error;
};

/// Labeled subset cannot cover every class.
class StratificationError : public Error {
 public:
  using Error::Error;
};

}  // namespace sola

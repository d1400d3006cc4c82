#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hydra {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Bad or missing configuration: unknown keys, invalid values, missing API key,
// HTTP 4xx responses.
class ConfigError : public Error {
  public:
    using Error::Error;
};

class TemplateError : public ConfigError {
  public:
    using ConfigError::ConfigError;
};

// Anything wrong with input data or persisted artifacts.
class DataError : public Error {
  public:
    using Error::Error;
};

class ParseError : public DataError {
  public:
    ParseError(const std::string& what, std::size_t line);
    [[nodiscard]] std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

class ValidationError : public DataError {
  public:
    using DataError::DataError;
};

class SizeError : public DataError {
  public:
    using DataError::DataError;
};

class ModelFileError : public DataError {
  public:
    using DataError::DataError;
};

class VersionMismatchError : public ModelFileError {
  public:
    using ModelFileError::ModelFileError;
};

class CorruptFileError : public ModelFileError {
  public:
    using ModelFileError::ModelFileError;
};

class DimensionError : public ModelFileError {
  public:
    using ModelFileError::ModelFileError;
};

class BackendError : public Error {
  public:
    using Error::Error;
};

class TransportError : public BackendError {
  public:
    using BackendError::BackendError;
};

// Programming-contract violations on the model and selection APIs.
class ShapeError : public Error {
  public:
    using Error::Error;
};

class RoutingError : public Error {
  public:
    using Error::Error;
};

class ConflictError : public Error {
  public:
    using Error::Error;
};

class PreconditionError : public Error {
  public:
    using Error::Error;
};

/// Process exit codes used by the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitConfig = 2,
    kExitData = 3,
    kExitBackend = 4,
};

/// Maps an in-flight exception to the tool's exit code.
int exit_code_for(const std::exception& e) noexcept;

}  // namespace hydra

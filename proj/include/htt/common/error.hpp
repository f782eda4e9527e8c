#pragma once

#include <stdexcept>
#include <string>

namespace htt {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A rule whose text does not match the owning task's grammar.
class GrammarError : public Error {
 public:
  using Error::Error;
};

class ConfidenceError : public Error {
 public:
  using Error::Error;
};

class TaskMismatchError : public Error {
 public:
  using Error::Error;
};

// Malformed library / instance / config file. `what()` names line and field.
class ParseError : public Error {
 public:
  ParseError(const std::string& where, const std::string& msg)
      : Error(where + ": " + msg) {}
};

class TemplateError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class ResampleExhaustedError : public Error {
 public:
  using Error::Error;
};

class OracleGapError : public Error {
 public:
  using Error::Error;
};

class EvalError : public Error {
 public:
  using Error::Error;
};

class AbortedRunError : public Error {
 public:
  using Error::Error;
};

// Remote completion failures.
class BackendError : public Error {
 public:
  using Error::Error;
};
class ConfigurationError : public BackendError {
 public:
  using BackendError::BackendError;
};
class AuthError : public BackendError {
 public:
  using BackendError::BackendError;
};
class RateLimitError : public BackendError {
 public:
  using BackendError::BackendError;
};
class MalformedResponseError : public BackendError {
 public:
  using BackendError::BackendError;
};
class TransportError : public BackendError {
 public:
  using BackendError::BackendError;
};

}  // namespace htt

#pragma once

#include <stdexcept>
#include <string>

namespace intentloop {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An id (topic, intent, slot, session) that does not resolve.
class ReferenceError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

// Operation not permitted in the object's current state.
class StateError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line > 0 ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Failure talking to an external provider (LM, embedding or search service).
class ProviderError : public Error {
 public:
  ProviderError(const std::string& what, int attempts = 1, int status = 0, bool retryable = false)
      : Error(what), attempts_(attempts), status_(status), retryable_(retryable) {}

  int attempts() const noexcept { return attempts_; }
  int status() const noexcept { return status_; }
  bool retryable() const noexcept { return retryable_; }

 private:
  int attempts_;
  int status_;
  bool retryable_;
};

class UnknownIntentError : public Error {
 public:
  UnknownIntentError(const std::string& what, std::string raw_completion)
      : Error(what), raw_completion_(std::move(raw_completion)) {}

  const std::string& raw_completion() const noexcept { return raw_completion_; }

 private:
  std::string raw_completion_;
};

// An off-policy estimator had nothing to average over.
class UndefinedEstimateError : public Error {
 public:
  using Error::Error;
};

}  // namespace intentloop

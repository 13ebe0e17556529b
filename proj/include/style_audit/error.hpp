#pragma once

#include <stdexcept>
#include <string>

namespace style_audit {

/// Base of all harness failures. Each subclass maps to one CLI exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 5; }
};

/// Invalid run configuration; raised before any network activity.
class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

/// Malformed, unreadable, or unusable corpus input.
class CorpusError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

/// Transport failure or unusable reply from a remote endpoint.
class EndpointError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

/// The chat model answered, but the answer was rejected (refusal or too short).
class GenerationError : public EndpointError {
 public:
  using EndpointError::EndpointError;
};

}  // namespace style_audit

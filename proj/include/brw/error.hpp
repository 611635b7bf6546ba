#pragma once

#include <stdexcept>
#include <string>

namespace brw {

/// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument is outside the operation's admissible domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// The boundary-case moment equations have no solution in the bracket.
class CalibrationError : public Error {
 public:
  using Error::Error;
};

/// A bounded resource (the vertex arena) ran out.
class ResourceError : public Error {
 public:
  using Error::Error;
};

/// The environment died out where the operation needs it alive.
class ExtinctError : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration, command line, or input document.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace brw

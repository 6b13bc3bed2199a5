#pragma once

#include <stdexcept>
#include <string>

namespace gridstudy {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input document (case file, study config).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Argument outside its documented domain (fraction out of [0,1], ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Iterative solver failed: Newton divergence, singular Jacobian,
/// eigen-solver iteration cap, numeric blow-up in time integration.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Study configuration rejected before any computation ran.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace gridstudy

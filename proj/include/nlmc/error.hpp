#pragma once

#include <stdexcept>
#include <string>

namespace nlmc {

/// Base of all library errors. Each subclass maps to one CLI exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad arguments, unparsable files, invalid configuration.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Geometric inconsistency: invalid mesh, nonconforming fractures, uncovered cells.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Factorization or solve failure, including rank-deficient constraints.
class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace nlmc

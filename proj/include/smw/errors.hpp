#pragma once

#include <stdexcept>
#include <string>

namespace smw {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Measures (or a measure and a direction) disagree on ambient dimension.
class DimensionMismatch : public Error {
public:
  explicit DimensionMismatch(const std::string& what) : Error(what) {}
};

// Measures disagree on atom count; equal support sizes are required for the
// permutation formulation of the transport problem.
class AtomCountMismatch : public Error {
public:
  explicit AtomCountMismatch(const std::string& what) : Error(what) {}
};

// NaN or infinity encountered in atom coordinates.
class NonFinite : public Error {
public:
  explicit NonFinite(const std::string& what) : Error(what) {}
};

// A projection direction is not unit length.
class NonUnitDirection : public Error {
public:
  explicit NonUnitDirection(const std::string& what) : Error(what) {}
};

// Exhaustive search refused: the instance exceeds the factorial budget.
class InstanceTooLarge : public Error {
public:
  explicit InstanceTooLarge(const std::string& what) : Error(what) {}
};

// Malformed file contents.
class ParseError : public Error {
public:
  explicit ParseError(const std::string& what) : Error(what) {}
};

// Structurally inconsistent data (ragged rows, wrong buffer sizes).
class ShapeError : public Error {
public:
  explicit ShapeError(const std::string& what) : Error(what) {}
};

// Filesystem-level failure.
class IoError : public Error {
public:
  explicit IoError(const std::string& what) : Error(what) {}
};

}  // namespace smw

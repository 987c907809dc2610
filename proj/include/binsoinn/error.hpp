// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace binsoinn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An index or coordinate outside its valid domain.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Vectors of different lengths were combined.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// The two initial SOINN weights coincide.
class DegenerateInitError : public Error {
 public:
  using Error::Error;
};

/// An operation was invoked on a network in the wrong state.
class StateError : public Error {
 public:
  using Error::Error;
};

/// A model violates a structural invariant (dangling edge, unlabeled winner, ...).
class IntegrityError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class VersionError : public Error {
 public:
  using Error::Error;
};

/// Model was built with a different feature extractor than the caller expects.
class ProvenanceError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  IoError(const std::string& path, const std::string& what)
      : Error(path + ": " + what), path_(path) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace binsoinn

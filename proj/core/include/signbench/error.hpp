#pragma once

#include <stdexcept>
#include <string>

namespace signbench {

/// Tensor/layer shape contract violated.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A NaN or Inf crossed a layer boundary or reached the optimizer.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad or missing input data (files, annotations, manifests, CSV).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameter value supplied by a caller.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Review store: unknown item id.
class NotFoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Review store: illegal state transition (e.g. labeling twice).
class ConflictError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Persistent storage could not be read or written.
class StorageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace signbench

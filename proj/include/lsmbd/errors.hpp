#ifndef LSMBD_ERRORS_HPP
#define LSMBD_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace lsmbd {

// Shape/length disagreement between operands.
struct DimensionError : std::runtime_error {
  explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

// An argument value outside its documented domain.
struct ParameterError : std::runtime_error {
  explicit ParameterError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values or failure of an iterative scheme to converge.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// An operation was invoked before its prerequisites were produced.
struct StateError : std::runtime_error {
  explicit StateError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or inconsistent configuration input.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A required upstream artifact (dataset, checkpoint) is missing.
struct DependencyError : std::runtime_error {
  explicit DependencyError(const std::string& what) : std::runtime_error(what) {}
};

// File I/O or serialization failure.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace lsmbd

#endif  // LSMBD_ERRORS_HPP

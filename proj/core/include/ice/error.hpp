#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ice {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an operation's inputs was violated.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A file could not be read, written, or parsed. Messages name the path
/// and, for binary formats, the byte offset of the problem.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A run specification or config file is inconsistent.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Training aborted; carries the iteration index and the offending batch.
class TrainingFault : public Error {
 public:
  TrainingFault(std::string message, std::size_t iteration,
                std::vector<std::size_t> batch_slots)
      : Error(std::move(message)),
        iteration(iteration),
        batch_slots(std::move(batch_slots)) {}

  std::size_t iteration = 0;
  std::vector<std::size_t> batch_slots;
};

}  // namespace ice

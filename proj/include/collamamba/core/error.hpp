#pragma once

#include <stdexcept>
#include <string>

namespace collamamba {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Raised when an operation is asked to run in a mode it does not support,
/// e.g. a convolutional scan over time-varying parameters.
class UnsupportedMode : public Error {
 public:
  using Error::Error;
};

/// Non-finite activations detected inside a block.
class NumericOverflow : public Error {
 public:
  NumericOverflow(std::string where, int block_index)
      : Error("non-finite activation in " + where + " (block " +
              std::to_string(block_index) + ")"),
        block_index_(block_index) {}

  int block_index() const noexcept { return block_index_; }

 private:
  int block_index_;
};

class InsufficientHistory : public Error {
 public:
  using Error::Error;
};

/// Malformed or foreign binary container.
class FormatError : public Error {
 public:
  using Error::Error;
};

namespace detail {

[[noreturn]] inline void invalid(const std::string& msg) { throw InvalidArgument(msg); }

inline void require(bool cond, const std::string& msg) {
  if (!cond) invalid(msg);
}

}  // namespace detail
}  // namespace collamamba

#pragma once

#include <stdexcept>
#include <string>

namespace pvlab {

// Invalid argument to a library operation (bad schedule, bad shape, ...).
class ArgumentError : public std::invalid_argument {
 public:
  explicit ArgumentError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Malformed on-disk data. Carries the byte offset where parsing failed
// when it is known, -1 otherwise.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& msg, long long byte_offset = -1)
      : std::runtime_error(byte_offset >= 0
                               ? msg + " (byte offset " + std::to_string(byte_offset) + ")"
                               : msg),
        byte_offset_(byte_offset) {}
  long long byte_offset() const { return byte_offset_; }

 private:
  long long byte_offset_;
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerically unusable problem (rank-deficient Gram matrix and no ridge).
class ConditioningError : public std::runtime_error {
 public:
  explicit ConditioningError(const std::string& msg) : std::runtime_error(msg) {}
};

// Optimization diverged; message carries the loss trace.
class TrainingError : public std::runtime_error {
 public:
  explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

class ResourceError : public std::runtime_error {
 public:
  explicit ResourceError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace pvlab

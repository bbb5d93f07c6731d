#pragma once

#include <stdexcept>
#include <string>

namespace allday {

// Invalid model/training configuration, detected at build time.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or missing input data (sequence layout, intrinsics, images).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite loss or other unrecoverable condition inside a training step.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A frame that cannot be scored (no valid ground truth, degenerate median).
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace allday

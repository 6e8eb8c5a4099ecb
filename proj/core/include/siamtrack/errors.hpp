#pragma once

#include <stdexcept>
#include <string>

namespace siamtrack {

/// Invalid layer table, preset, or config field. The message names the
/// offending layer or key.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes that do not fit together at an op boundary.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dataset, image, checkpoint or report I/O failure.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite loss or gradient during optimisation.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace siamtrack

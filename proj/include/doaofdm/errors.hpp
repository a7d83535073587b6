#pragma once

#include <stdexcept>
#include <string>

namespace doaofdm {

/// Operand shapes do not agree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A scalar argument is outside its valid domain.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The angular CFAR found nothing; the harness counts this as a frame failure.
class NoPathsDetected : public std::runtime_error {
 public:
  NoPathsDetected() : std::runtime_error("no paths detected in the pilot angular spectrum") {}
};

/// The decision-directed tracker hit a non-finite gain it could not recover from.
class TrackingFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Regressor training produced a non-finite validation loss.
class TrainingDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or invalid experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace doaofdm

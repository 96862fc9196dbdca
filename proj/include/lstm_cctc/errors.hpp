#pragma once

#include <stdexcept>
#include <string>

namespace lstm_cctc {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Count label cannot be realized by any alignment of the given length.
class InfeasibleCount : public Error {
 public:
  using Error::Error;
};

// A row of log-probabilities does not sum to one.
class NonDistribution : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class PlacementFailure : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

// Input validation failure; field() names the offending configuration key.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace lstm_cctc

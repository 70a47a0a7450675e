#pragma once

#include <stdexcept>
#include <string>

namespace faro {

/// Vector length does not match the model it is used with.
class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A categorical coordinate holds a value outside its declared level set.
class InvalidLevel : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InvalidIntervention : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InvalidModel : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A closed form was requested for a structural model that is not affine.
class NonLinearModel : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The classifier cannot be flipped by any admissible change.
class NoRecourse : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Fair robust recourse is undefined for an instance whose twins receive
/// different labels.
class UnfairInstance : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace faro

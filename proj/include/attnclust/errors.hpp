#pragma once

#include <stdexcept>
#include <string>

namespace attnclust {

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct EmptySequenceError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct StepError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace attnclust

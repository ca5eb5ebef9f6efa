#pragma once

#include <stdexcept>
#include <string>

namespace ofs {

class InvalidConfiguration : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DegenerateFilter : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class NotRepresentable : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class ExplorationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SamplingDegeneracy : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ofs

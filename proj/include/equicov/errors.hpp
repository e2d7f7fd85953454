#pragma once

#include <stdexcept>
#include <string>

namespace equicov {

// Invalid model or sampler parameters (non-positive intensity, bad window, ...).
class ParameterError : public std::invalid_argument {
 public:
  explicit ParameterError(const std::string& what) : std::invalid_argument(what) {}
};

// Argument outside the mathematical domain of a function (e.g. pathloss at z <= 0).
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

// Association attempted against an empty base-station pattern.
class NoServerError : public std::runtime_error {
 public:
  explicit NoServerError(const std::string& what) : std::runtime_error(what) {}
};

// A sampler exhausted its retry budget.
class SamplingError : public std::runtime_error {
 public:
  explicit SamplingError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace equicov

#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace optex {

using ParamVector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Non-finite input, out-of-range parameter or violated precondition.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Kernel system could not be factorized even after jitter escalation.
class EstimatorSingular : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

inline void require_same_dim(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": dimension mismatch (" + std::to_string(a) + " vs " +
                         std::to_string(b) + ")");
  }
}

inline void require_finite(const ParamVector& v, const char* what) {
  if (!v.allFinite()) throw DomainError(std::string(what) + ": non-finite input");
}

}  // namespace optex

#pragma once

#include <stdexcept>
#include <string>

namespace ckm {

/// Base class for all library errors.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameter or argument outside its mathematical domain.
class domain_error : public error {
 public:
  using error::error;
};

/// Iterative method failed to converge (root finding, optimization).
class convergence_error : public error {
 public:
  using error::error;
};

/// File or stream problem.
class io_error : public error {
 public:
  using error::error;
};

inline const char* version() { return "0.1.0"; }

}  // namespace ckm

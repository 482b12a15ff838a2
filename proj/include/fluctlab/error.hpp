#pragma once

#include <stdexcept>
#include <string>

namespace fluctlab {

// Precondition violations (bad sizes, out-of-range parameters, mismatched grids).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A numerical procedure could not deliver its post-condition (instability,
// solvability failure, solver non-convergence).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A path outside the continuity-equation set; its rate is +infinity.
class InfeasiblePath : public std::runtime_error {
 public:
  InfeasiblePath(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

inline void require(bool ok, const std::string& message) {
  if (!ok) throw InvalidArgument(message);
}

}  // namespace fluctlab

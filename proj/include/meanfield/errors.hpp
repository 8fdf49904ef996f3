#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace meanfield {

/// Non-finite value produced by a numeric kernel. Carries enough context
/// (particle index, step) for the caller to locate the fault.
class NumericFault : public std::runtime_error {
 public:
  NumericFault(const std::string& what, long index = -1, long step = -1)
      : std::runtime_error(what), index_(index), step_(step) {}
  long index() const { return index_; }
  long step() const { return step_; }

 private:
  long index_;
  long step_;
};

/// Iterative scheme did not reach its tolerance. Keeps the tail of the
/// residual history for diagnosis.
class ConvergenceFailure : public std::runtime_error {
 public:
  ConvergenceFailure(const std::string& what, std::vector<double> residuals)
      : std::runtime_error(what), residuals_(std::move(residuals)) {}
  const std::vector<double>& residuals() const { return residuals_; }

 private:
  std::vector<double> residuals_;
};

}  // namespace meanfield

#pragma once

#include <stdexcept>
#include <string>

namespace spinid {

/// Bad input: violated precondition, malformed file, schema mismatch.
class ValidationError : public std::runtime_error {
  public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// An iterative solver ran out of iterations without meeting its tolerance.
class ConvergenceError : public std::runtime_error {
  public:
    ConvergenceError(const std::string& what, double best_residual)
        : std::runtime_error(what), best_residual_(best_residual) {}
    double best_residual() const { return best_residual_; }

  private:
    double best_residual_;
};

/// A measurement set that no model parameterization can explain.
class InconsistencyError : public std::runtime_error {
  public:
    InconsistencyError(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}
    double residual() const { return residual_; }

  private:
    double residual_;
};

} // namespace spinid

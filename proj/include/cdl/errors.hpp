#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cdl {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument, shape mismatch, or bad configuration.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents (bad magic, version, dtype, syntax).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Payload shorter or longer than its declared dimensions.
class LengthError : public FormatError {
 public:
  using FormatError::FormatError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Singular or ill-posed linear system.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// An iterative solver hit its iteration cap. Carries the best iterate it
/// reached and, for outer loops, the objective trace so far.
class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, Eigen::VectorXd best_iterate,
                   std::vector<double> trace = {})
      : NumericalError(what), best_(std::move(best_iterate)), trace_(std::move(trace)) {}

  const Eigen::VectorXd& best_iterate() const { return best_; }
  const std::vector<double>& trace() const { return trace_; }

 private:
  Eigen::VectorXd best_;
  std::vector<double> trace_;
};

}  // namespace cdl

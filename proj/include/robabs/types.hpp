#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace robabs {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition or construction invariant was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// An iterative routine failed to converge or diverged.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double last_residual,
                   std::vector<double> trace = {})
      : Error(what), last_residual_(last_residual), trace_(std::move(trace)) {}

  double last_residual() const { return last_residual_; }
  const std::vector<double>& trace() const { return trace_; }

 private:
  double last_residual_;
  std::vector<double> trace_;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidArgument(msg);
}

}  // namespace robabs

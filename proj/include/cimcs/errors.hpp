#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cimcs {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid distribution, instance or solver parameters.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Vector/matrix shapes that do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// The SDE integrator left the finite / bounded region.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, double t, std::size_t index)
      : Error(what), time_(t), index_(index) {}
  double time() const noexcept { return time_; }
  std::size_t index() const noexcept { return index_; }

 private:
  double time_;
  std::size_t index_;
};

/// Support Gram matrix is singular or too badly conditioned to solve.
class RankDeficiencyError : public Error {
 public:
  RankDeficiencyError(const std::string& what, std::size_t support_size)
      : Error(what), support_size_(support_size) {}
  std::size_t support_size() const noexcept { return support_size_; }

 private:
  std::size_t support_size_;
};

/// Iterative method did not reach its tolerance.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// File format or I/O failure.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace cimcs

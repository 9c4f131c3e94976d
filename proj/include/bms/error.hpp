#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace bms {

// Stable error identifiers. The CLI maps each one to a distinct exit status
// and prints the name in its JSON error report.
enum class ErrorCode {
  InvalidArgument = 10,
  EmptyInput = 11,
  MissingFile = 12,
  MalformedInput = 13,
  DimensionMismatch = 14,
  InvalidKernel = 15,
  IsolatedCenter = 20,
  UnsupportedDimension = 21,
  CounterexampleBreakdown = 22,
  NonConvergence = 23,
  StdUndefined = 24,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::EmptyInput: return "empty_input";
    case ErrorCode::MissingFile: return "missing_file";
    case ErrorCode::MalformedInput: return "malformed_input";
    case ErrorCode::DimensionMismatch: return "dimension_mismatch";
    case ErrorCode::InvalidKernel: return "invalid_kernel";
    case ErrorCode::IsolatedCenter: return "isolated_center";
    case ErrorCode::UnsupportedDimension: return "unsupported_dimension";
    case ErrorCode::CounterexampleBreakdown: return "counterexample_breakdown";
    case ErrorCode::NonConvergence: return "non_convergence";
    case ErrorCode::StdUndefined: return "std_undefined";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& what)
      : Error(ErrorCode::InvalidArgument, what) {}
};

class KernelError : public Error {
 public:
  explicit KernelError(const std::string& what)
      : Error(ErrorCode::InvalidKernel, what) {}
};

/// Raised by the nonblurring update when a center has zero total influence
/// (it lies outside the support of every data point).
class IsolatedCenterError : public Error {
 public:
  explicit IsolatedCenterError(std::size_t center)
      : Error(ErrorCode::IsolatedCenter,
              "center " + std::to_string(center) +
                  " receives no influence from any data point"),
        center_(center) {}

  std::size_t center() const noexcept { return center_; }

 private:
  std::size_t center_;
};

class UnsupportedDimensionError : public Error {
 public:
  explicit UnsupportedDimensionError(std::size_t dim)
      : Error(ErrorCode::UnsupportedDimension,
              "exact hulls are available for dimension 1 and 2 only (got " +
                  std::to_string(dim) +
                  "); use radius_trace or directional_containment instead") {}
};

class CounterexampleBreakdown : public Error {
 public:
  explicit CounterexampleBreakdown(int iteration, const std::string& why)
      : Error(ErrorCode::CounterexampleBreakdown,
              "no admissible weights at iteration " +
                  std::to_string(iteration) + ": " + why),
        iteration_(iteration) {}

  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ArgumentError(message);
}

}  // namespace detail

}  // namespace bms

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bms/error.hpp"

namespace bms {

/// N points in p dimensions, stored row-major, with one fixed positive weight
/// per point. Weights are bound to the point index for the lifetime of a run.
class PointSet {
 public:
  PointSet() = default;

  /// Unit weights.
  PointSet(std::size_t dim, std::vector<double> coords)
      : PointSet(dim, std::move(coords), {}) {}

  PointSet(std::size_t dim, std::vector<double> coords,
           std::vector<double> weights)
      : dim_(dim), coords_(std::move(coords)), weights_(std::move(weights)) {
    if (dim_ == 0) throw ArgumentError("point set dimension must be >= 1");
    if (coords_.empty()) throw Error(ErrorCode::EmptyInput, "empty input");
    if (coords_.size() % dim_ != 0)
      throw Error(ErrorCode::DimensionMismatch,
                  "coordinate count is not a multiple of the dimension");
    const std::size_t n = coords_.size() / dim_;
    if (weights_.empty()) weights_.assign(n, 1.0);
    if (weights_.size() != n)
      throw Error(ErrorCode::DimensionMismatch,
                  "expected " + std::to_string(n) + " weights, got " +
                      std::to_string(weights_.size()));
    for (double c : coords_)
      if (!std::isfinite(c))
        throw ArgumentError("point coordinates must be finite");
    for (double w : weights_)
      if (!(w > 0.0) || !std::isfinite(w))
        throw ArgumentError("point weights must be positive and finite");
  }

  /// One-dimensional convenience constructor.
  static PointSet line(std::vector<double> xs, std::vector<double> weights = {}) {
    return PointSet(1, std::move(xs), std::move(weights));
  }

  std::size_t size() const noexcept { return dim_ == 0 ? 0 : coords_.size() / dim_; }
  std::size_t dim() const noexcept { return dim_; }

  std::span<const double> point(std::size_t i) const {
    return {coords_.data() + i * dim_, dim_};
  }
  std::span<double> point(std::size_t i) { return {coords_.data() + i * dim_, dim_}; }

  double coord(std::size_t i, std::size_t d) const { return coords_[i * dim_ + d]; }

  double weight(std::size_t i) const { return weights_[i]; }

  const std::vector<double>& coords() const noexcept { return coords_; }
  const std::vector<double>& weights() const noexcept { return weights_; }

  /// Same weights, new positions. Used by the update rules.
  PointSet with_coords(std::vector<double> coords) const {
    PointSet out;
    out.dim_ = dim_;
    out.coords_ = std::move(coords);
    out.weights_ = weights_;
    return out;
  }

  /// Same positions, new weights. Only the counterexample schedule varies
  /// weights between iterations.
  PointSet with_weights(std::vector<double> weights) const {
    return PointSet(dim_, coords_, std::move(weights));
  }

 private:
  std::size_t dim_ = 0;
  std::vector<double> coords_;
  std::vector<double> weights_;
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double diff = a[d] - b[d];
    s += diff * diff;
  }
  return s;
}

inline double distance(std::span<const double> a, std::span<const double> b) {
  return std::sqrt(squared_distance(a, b));
}

}  // namespace bms

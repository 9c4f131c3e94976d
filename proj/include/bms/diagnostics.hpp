#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "bms/engine.hpp"
#include "bms/error.hpp"
#include "bms/kernel.hpp"
#include "bms/point_set.hpp"

namespace bms {

using Vertex2 = std::array<double, 2>;

/// Per-iteration convex hulls of a full-position trace. In 1D each hull is the
/// interval [min, max]; in 2D a counterclockwise, strictly convex vertex list
/// (one vertex for a coincident cloud, two for a collinear one).
struct HullTrace {
  std::size_t dim = 0;
  std::vector<std::array<double, 2>> intervals;
  std::vector<std::vector<Vertex2>> polygons;
  bool nested = true;
  std::optional<int> first_violation;  // iteration whose hull leaks out of its predecessor

  std::size_t size() const { return dim == 1 ? intervals.size() : polygons.size(); }
};

struct RadiusTrace {
  std::vector<double> radii;
  bool nonincreasing = true;
  std::optional<int> first_increase;
};

struct DirectionalReport {
  bool contained = true;
  std::optional<int> first_violation;
  std::size_t directions = 0;
};

/// Largest kernel value between points in different clusters. Empty and
/// `vacuous` when there is only one cluster.
struct InfluenceReport {
  bool vacuous = false;
  std::vector<double> per_iteration;
  double final_max = 0.0;
};

inline constexpr double kHullTolerance = 1e-12;

namespace detail {

inline const PointSet& positions_at(const IterationTrace& trace, std::size_t k) {
  if (!trace.records[k].positions)
    throw ArgumentError("diagnostics need a full-position trace");
  return *trace.records[k].positions;
}

inline double cross(const Vertex2& o, const Vertex2& a, const Vertex2& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

inline double point_segment_distance(const Vertex2& q, const Vertex2& a, const Vertex2& b) {
  const double dx = b[0] - a[0], dy = b[1] - a[1];
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((q[0] - a[0]) * dx + (q[1] - a[1]) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(q[0] - (a[0] + t * dx), q[1] - (a[1] + t * dy));
}

// Vertex-in-polygon with absolute slack `tol`. Points within `tol` of the
// boundary count as inside; others go by crossing parity. Orientation tests
// against the polygon's own edges are avoided: on thin hulls of collapsing
// clusters the vertex turns are at rounding level and their sign is noise.
inline bool contains(const std::vector<Vertex2>& hull, const Vertex2& q, double tol) {
  if (hull.size() == 1) return std::hypot(q[0] - hull[0][0], q[1] - hull[0][1]) <= tol;
  bool inside = false;
  for (std::size_t k = 0; k < hull.size(); ++k) {
    const Vertex2& a = hull[k];
    const Vertex2& b = hull[(k + 1) % hull.size()];
    if (point_segment_distance(q, a, b) <= tol) return true;
    if ((a[1] > q[1]) != (b[1] > q[1]) &&
        q[0] < a[0] + (q[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]))
      inside = !inside;
  }
  return hull.size() > 2 && inside;
}

}  // namespace detail

/// Andrew's monotone chain; collinear boundary points are dropped.
inline std::vector<Vertex2> convex_hull(std::vector<Vertex2> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Vertex2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && detail::cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && detail::cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

/// Hulls of every recorded iteration plus the verdict that each contains the
/// next. The slack is kHullTolerance times the initial radius (at least 1).
inline HullTrace hull_trace(const IterationTrace& trace) {
  const std::size_t p = trace.dim;
  if (p > 2) throw UnsupportedDimensionError(p);
  if (p == 0 || trace.records.empty()) throw ArgumentError("hull_trace: empty trace");

  HullTrace out;
  out.dim = p;
  for (std::size_t k = 0; k < trace.records.size(); ++k) {
    const PointSet& pts = detail::positions_at(trace, k);
    if (p == 1) {
      const auto [lo, hi] = std::minmax_element(pts.coords().begin(), pts.coords().end());
      out.intervals.push_back({*lo, *hi});
    } else {
      std::vector<Vertex2> v(pts.size());
      for (std::size_t i = 0; i < pts.size(); ++i) v[i] = {pts.coord(i, 0), pts.coord(i, 1)};
      out.polygons.push_back(convex_hull(std::move(v)));
    }
  }

  const double tol = kHullTolerance * std::max(1.0, trace.records.front().radius);
  for (std::size_t k = 1; k < out.size(); ++k) {
    bool inside = true;
    if (p == 1) {
      inside = out.intervals[k][0] >= out.intervals[k - 1][0] - tol &&
               out.intervals[k][1] <= out.intervals[k - 1][1] + tol;
    } else {
      for (const auto& v : out.polygons[k])
        if (!detail::contains(out.polygons[k - 1], v, tol)) {
          inside = false;
          break;
        }
    }
    if (!inside && out.nested) {
      out.nested = false;
      out.first_violation = trace.records[k].iteration;
    }
  }
  return out;
}

/// Max pairwise distance per iteration, recomputed from positions when the
/// trace has them and taken from the records otherwise.
inline RadiusTrace radius_trace(const IterationTrace& trace) {
  RadiusTrace out;
  const bool recompute = trace.has_positions();
  for (std::size_t k = 0; k < trace.records.size(); ++k)
    out.radii.push_back(recompute ? max_pairwise_distance(detail::positions_at(trace, k))
                                  : trace.records[k].radius);
  if (out.radii.empty()) return out;
  const double tol = kHullTolerance * std::max(1.0, out.radii.front());
  for (std::size_t k = 1; k < out.radii.size(); ++k)
    if (out.radii[k] > out.radii[k - 1] + tol && out.nonincreasing) {
      out.nonincreasing = false;
      out.first_increase = trace.records[k].iteration;
    }
  return out;
}

/// Hull containment seen through random projections: along each direction the
/// projected range must shrink. Works in any dimension; agreeing with it is
/// necessary for the exact hull check to pass.
inline DirectionalReport directional_containment(const IterationTrace& trace,
                                                 std::size_t directions = 20,
                                                 std::uint64_t seed = 20240607) {
  if (directions == 0) throw ArgumentError("directional_containment: need >= 1 direction");
  const std::size_t p = trace.dim;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::vector<std::vector<double>> dirs(directions, std::vector<double>(p));
  for (auto& u : dirs) {
    double norm = 0.0;
    do {
      norm = 0.0;
      for (double& c : u) {
        c = z(rng);
        norm += c * c;
      }
    } while (norm == 0.0);
    for (double& c : u) c /= std::sqrt(norm);
  }

  auto range = [&](const PointSet& pts, const std::vector<double>& u) {
    std::array<double, 2> r{kInfinity, -kInfinity};
    for (std::size_t i = 0; i < pts.size(); ++i) {
      double s = 0.0;
      for (std::size_t d = 0; d < p; ++d) s += u[d] * pts.coord(i, d);
      r[0] = std::min(r[0], s);
      r[1] = std::max(r[1], s);
    }
    return r;
  };

  DirectionalReport out;
  out.directions = directions;
  if (trace.records.empty()) return out;
  const double tol = kHullTolerance * std::max(1.0, trace.records.front().radius);
  for (std::size_t k = 1; k < trace.records.size() && out.contained; ++k) {
    const PointSet& before = detail::positions_at(trace, k - 1);
    const PointSet& after = detail::positions_at(trace, k);
    for (const auto& u : dirs) {
      const auto a = range(before, u), b = range(after, u);
      if (b[0] < a[0] - tol || b[1] > a[1] + tol) {
        out.contained = false;
        out.first_violation = trace.records[k].iteration;
        break;
      }
    }
  }
  return out;
}

/// For every recorded iteration, the largest f(||x_i - x_j||) over pairs that
/// end up in different clusters of `clusters`.
inline InfluenceReport influence_decay(const IterationTrace& trace, const Kernel& kernel,
                                       const ClusterResult& clusters) {
  InfluenceReport out;
  if (clusters.count() < 2) {
    out.vacuous = true;
    return out;
  }
  for (std::size_t k = 0; k < trace.records.size(); ++k) {
    const PointSet& pts = detail::positions_at(trace, k);
    if (pts.size() != clusters.labels.size())
      throw Error(ErrorCode::DimensionMismatch, "influence_decay: label count mismatch");
    double best = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i)
      for (std::size_t j = i + 1; j < pts.size(); ++j)
        if (clusters.labels[i] != clusters.labels[j])
          best = std::max(best, kernel.evaluate(distance(pts.point(i), pts.point(j))));
    out.per_iteration.push_back(best);
  }
  if (!out.per_iteration.empty()) out.final_max = out.per_iteration.back();
  return out;
}

/// Rule choosing the weights used for the update from iteration t to t + 1.
/// Fixed-weight runs never need one; it exists to show what breaks without.
using AdaptiveWeightSchedule =
    std::function<std::vector<double>(int iteration, const PointSet& current)>;

struct AdaptiveRun {
  IterationTrace trace;                       // full positions, iteration 0..T
  std::vector<std::vector<double>> weights;   // weights[t] produced iteration t + 1
};

/// Blurring iteration whose weights are re-chosen by `schedule` before every
/// update.
inline AdaptiveRun run_adaptive(const PointSet& points, const Kernel& kernel,
                                const AdaptiveWeightSchedule& schedule, int iterations) {
  if (iterations < 0) throw ArgumentError("iterations must be >= 0");
  AdaptiveRun out;
  out.trace.dim = points.dim();
  PointSet current = points;
  detail::record(out.trace, TraceLevel::Full, 0, 0.0, current);
  for (int t = 0; t < iterations; ++t) {
    std::vector<double> w = schedule(t, current);
    if (w.size() != current.size())
      throw Error(ErrorCode::DimensionMismatch, "schedule returned the wrong weight count");
    for (double v : w)
      if (!(v > 0.0) || !std::isfinite(v))
        throw ArgumentError("schedule weights must be positive and finite");
    PointSet next = blurring_step(current.with_weights(w), kernel);
    const double moved = max_displacement(current, next);
    out.weights.push_back(std::move(w));
    current = std::move(next);
    detail::record(out.trace, TraceLevel::Full, t + 1, moved, current);
  }
  return out;
}

struct CounterexampleRow {
  int t = 0;
  double x1 = 0.0, x2 = 0.0, x3 = 0.0;
  double w1 = 1.0, w2 = 1.0, w3 = 1.0;
};

struct CounterexampleResult {
  std::vector<CounterexampleRow> rows;  // row t: positions at t, weights that produced them
  bool alternates = true;               // sign of x1 flips every step with |x1| >= min_offset
  double min_offset = 0.0;              // smallest |x1| over t >= 1
  double min_step = 0.0;                // smallest |x1(t) - x1(t-1)|
  AdaptiveRun run;
};

inline constexpr double kCounterexampleMinOffset = 0.05;

namespace detail {

// Weights for the three-point configuration. w1 stays 1. w2 and w3 are the
// smallest powers of two that keep x2 > 1/2 and x3 < -1/2 while their drift
// toward x1 stays inside a budget of d / (2 (t + 2)^2) per step. The budgets
// sum to under d / 3, so the outer points never come within kernel range of
// each other, and the weights grow only quadratically in t. The weight on the side x1 must jump
// to is then doubled until x1 lands at least min_offset past 0; if doubling
// overshoots the admissible band it is bisected back into it.
class CounterexampleSchedule {
 public:
  CounterexampleSchedule(std::array<double, 3> deltas, double min_offset)
      : deltas_(deltas), min_offset_(min_offset) {}

  std::vector<double> operator()(int t, const PointSet& pts) const {
    const double x1 = pts.coord(0, 0), x2 = pts.coord(1, 0), x3 = pts.coord(2, 0);
    const double budget = 0.5 / ((t + 2.0) * (t + 2.0));
    // Update of an outer point, which only sees itself and x1.
    auto outer = [x1](double x, double w) { return (w * x + 0.5 * x1) / (w + 0.5); };
    auto inner = [&](double w2, double w3) {
      return (x1 + 0.5 * w2 * x2 + 0.5 * w3 * x3) / (1.0 + 0.5 * w2 + 0.5 * w3);
    };

    double w2 = 1.0, w3 = 1.0;
    while (!(outer(x2, w2) > 0.5 && x2 - outer(x2, w2) <= deltas_[1] * budget)) grow(w2, t);
    while (!(outer(x3, w3) < -0.5 && outer(x3, w3) - x3 <= deltas_[2] * budget)) grow(w3, t);
    const double x2n = outer(x2, w2), x3n = outer(x3, w3);

    // Admissible band for the new x1, on the side opposite to the current one.
    const double sign = x1 > 0.0 ? -1.0 : 1.0;
    const double far = sign > 0.0 ? std::min(0.5, x3n + 1.0) : std::min(0.5, 1.0 - x2n);
    if (!(far > min_offset_))
      throw CounterexampleBreakdown(t, "outer points left no room for x1");
    auto offset = [&](double w) {
      return sign * (sign > 0.0 ? inner(w, w3) : inner(w2, w));
    };
    double& pull = sign > 0.0 ? w2 : w3;
    if (offset(pull) >= far)
      throw CounterexampleBreakdown(t, "x1 already overshoots the admissible band");

    double lo = pull;
    while (offset(pull) < min_offset_) {
      lo = pull;
      grow(pull, t);
    }
    if (offset(pull) >= far) {
      double hi = pull;
      for (int k = 0; k < 200 && offset(hi) >= far; ++k) {
        const double mid = 0.5 * (lo + hi);
        (offset(mid) < min_offset_ ? lo : hi) = mid;
      }
      if (!(offset(hi) >= min_offset_ && offset(hi) < far))
        throw CounterexampleBreakdown(t, "bisection found no weight in the admissible band");
      pull = hi;
    }
    return {1.0, w2, w3};
  }

 private:
  static void grow(double& w, int t) {
    w *= 2.0;
    if (!std::isfinite(w) || w > 1e300)
      throw CounterexampleBreakdown(t, "weights overflowed");
  }

  std::array<double, 3> deltas_;
  double min_offset_;
};

}  // namespace detail

/// Points x1 = d1, x2 = 1/2 + d2, x3 = -1/2 - d3 under the counterexample
/// kernel, with weights re-chosen every step to throw x1 across 0.
inline std::vector<double> counterexample_points(const std::array<double, 3>& deltas) {
  for (double d : deltas)
    if (!(d > 0.0 && d < 0.25)) throw ArgumentError("counterexample deltas must lie in (0, 1/4)");
  return {deltas[0], 0.5 + deltas[1], -0.5 - deltas[2]};
}

inline CounterexampleResult run_counterexample(const std::array<double, 3>& deltas,
                                               int iterations,
                                               double min_offset = kCounterexampleMinOffset) {
  const PointSet start = PointSet::line(counterexample_points(deltas));
  if (iterations < 1) throw ArgumentError("iterations must be >= 1");
  if (!(min_offset > 0.0 && min_offset < 0.5))
    throw ArgumentError("min_offset must lie in (0, 1/2)");

  CounterexampleResult out;
  out.run = run_adaptive(start, Kernel::counterexample(),
                         detail::CounterexampleSchedule(deltas, min_offset), iterations);
  const auto& recs = out.run.trace.records;
  out.min_offset = kInfinity;
  out.min_step = kInfinity;
  for (std::size_t t = 0; t < recs.size(); ++t) {
    const PointSet& pts = *recs[t].positions;
    CounterexampleRow row{static_cast<int>(t), pts.coord(0, 0), pts.coord(1, 0), pts.coord(2, 0)};
    if (t > 0) {
      const auto& w = out.run.weights[t - 1];
      row.w1 = w[0];
      row.w2 = w[1];
      row.w3 = w[2];
      const double prev = out.rows.back().x1;
      out.min_offset = std::min(out.min_offset, std::abs(row.x1));
      out.min_step = std::min(out.min_step, std::abs(row.x1 - prev));
      if (!(row.x1 * prev < 0.0) || std::abs(row.x1) < min_offset) out.alternates = false;
    }
    out.rows.push_back(row);
  }
  return out;
}

/// Reruns the counterexample start with one weight snapshot held fixed, the
/// setting under which blurring iteration is guaranteed to settle.
inline RunResult run_frozen_counterexample(const std::array<double, 3>& deltas,
                                           std::vector<double> weights,
                                           RunConfig config = {}) {
  config.mode = Mode::Blurring;
  config.kernel = Kernel::counterexample();
  const PointSet start = PointSet::line(counterexample_points(deltas), std::move(weights));
  return run(start, config);
}

}  // namespace bms

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "bms/detail/simd_math.hpp"
#include "bms/error.hpp"
#include "bms/kernel.hpp"
#include "bms/point_set.hpp"

namespace bms {

enum class Mode { Blurring, Nonblurring };
enum class TraceLevel { None, Summary, Full };

inline std::string to_string(Mode m) {
  return m == Mode::Blurring ? "blurring" : "nonblurring";
}

inline std::string to_string(TraceLevel t) {
  switch (t) {
    case TraceLevel::None: return "none";
    case TraceLevel::Summary: return "summary";
    case TraceLevel::Full: return "full";
  }
  return "summary";
}

struct RunConfig {
  Mode mode = Mode::Blurring;
  Kernel kernel = Kernel::gaussian(1.0);
  double stop_displacement = 1e-10;
  int max_iterations = 500;
  TraceLevel trace_level = TraceLevel::Summary;

  void validate() const {
    if (!(stop_displacement > 0.0))
      throw ArgumentError("stop_displacement must be positive");
    if (max_iterations < 1) throw ArgumentError("max_iterations must be >= 1");
  }
};

/// Summary of the point cloud after `iteration` updates (0 = input).
struct IterationRecord {
  int iteration = 0;
  double max_displacement = 0.0;
  double radius = 0.0;
  std::vector<double> mean;
  std::vector<double> std;
  std::optional<PointSet> positions;
};

struct IterationTrace {
  std::size_t dim = 0;
  std::vector<IterationRecord> records;

  bool has_positions() const {
    return !records.empty() &&
           std::all_of(records.begin(), records.end(),
                       [](const IterationRecord& r) { return r.positions.has_value(); });
  }
};

struct RunResult {
  PointSet final;
  IterationTrace trace;
  bool converged = false;
  int iterations_used = 0;
};

struct ClusterResult {
  std::vector<int> labels;
  std::vector<std::vector<double>> centers;
  std::vector<std::size_t> sizes;
  bool converged = true;
  int iterations_used = 0;

  std::size_t count() const noexcept { return sizes.size(); }
};

namespace detail {

// Column-major copy of the coordinates: soa[d * n + i].
inline std::vector<double> to_soa(const PointSet& points) {
  const std::size_t n = points.size(), p = points.dim();
  std::vector<double> soa(n * p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < p; ++d) soa[d * n + i] = points.coord(i, d);
  return soa;
}

inline constexpr std::size_t kTile = 256;

// Accumulates, for every i, sum_j f_ij w_j and sum_j f_ij w_j x_j over the
// upper triangle j > i, adding each kernel value to both endpoints. The
// caller seeds the accumulators with the self terms. The summation order per
// point is a fixed function of (n, tile size), independent of any threading.
template <std::size_t P, class Influence>
void accumulate_symmetric(std::size_t n, std::size_t dim, const double* x,
                          const double* w, const Influence& f, double* acc_w,
                          double* acc_x) {
  constexpr bool kStatic = P > 0;
  const std::size_t p = kStatic ? P : dim;
  std::array<double, kTile> k{};
  std::array<double, kStatic ? P : 1> xi_s{};
  std::array<double, kStatic ? P : 1> rx_s{};
  std::vector<double> xi_d(kStatic ? 0 : p), rx_d(kStatic ? 0 : p);
  double* xi = kStatic ? xi_s.data() : xi_d.data();
  double* rx = kStatic ? rx_s.data() : rx_d.data();

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < p; ++d) xi[d] = x[d * n + i], rx[d] = 0.0;
    const double wi = w[i];
    double rw = 0.0;
    for (std::size_t j0 = i + 1; j0 < n; j0 += kTile) {
      const std::size_t m = std::min(kTile, n - j0);
      double* kt = k.data();
      if constexpr (kStatic) {
        // Unused dimensions stay zero; P <= 3 on this path.
        const double xw0 = xi[0] * wi, xw1 = P > 1 ? xi[1] * wi : 0.0,
                     xw2 = P > 2 ? xi[2] * wi : 0.0;
        double r0 = 0.0, r1 = 0.0, r2 = 0.0;
        BMS_SIMD_REDUCTION(rw, r0, r1, r2)
        for (std::size_t t = 0; t < m; ++t) {
          const std::size_t j = j0 + t;
          double d2 = 0.0;
          for (std::size_t d = 0; d < P; ++d) {
            const double diff = x[d * n + j] - xi[d];
            d2 += diff * diff;
          }
          const double kv = f(d2);
          const double kw = kv * w[j];
          rw += kw;
          r0 += kw * x[j];
          acc_w[j] += kv * wi;
          acc_x[j] += kv * xw0;
          if constexpr (P > 1) {
            r1 += kw * x[n + j];
            acc_x[n + j] += kv * xw1;
          }
          if constexpr (P > 2) {
            r2 += kw * x[2 * n + j];
            acc_x[2 * n + j] += kv * xw2;
          }
        }
        rx[0] += r0;
        if constexpr (P > 1) rx[1] += r1;
        if constexpr (P > 2) rx[2] += r2;
      } else {
        for (std::size_t t = 0; t < m; ++t) {
          double d2 = 0.0;
          for (std::size_t d = 0; d < p; ++d) {
            const double diff = x[d * n + j0 + t] - xi[d];
            d2 += diff * diff;
          }
          kt[t] = f(d2);
        }
        for (std::size_t t = 0; t < m; ++t) {
          const double kw = kt[t] * w[j0 + t];
          rw += kw;
          for (std::size_t d = 0; d < p; ++d) rx[d] += kw * x[d * n + j0 + t];
          acc_w[j0 + t] += kt[t] * wi;
          for (std::size_t d = 0; d < p; ++d) acc_x[d * n + j0 + t] += kt[t] * wi * xi[d];
        }
      }
    }
    acc_w[i] += rw;
    for (std::size_t d = 0; d < p; ++d) acc_x[d * n + i] += rx[d];
  }
}

// Row sums of f(||y_i - x_j||) w_j and f(...) w_j x_j over all data j.
template <std::size_t P, class Influence>
void accumulate_rows(std::size_t m, std::size_t n, std::size_t dim,
                     const double* y, const double* x, const double* w,
                     const Influence& f, double* acc_w, double* acc_x) {
  constexpr bool kStatic = P > 0;
  const std::size_t p = kStatic ? P : dim;
  std::array<double, kTile> k{};
  std::vector<double> yi(p), ry(p);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t d = 0; d < p; ++d) yi[d] = y[d * m + i], ry[d] = 0.0;
    double rw = 0.0;
    for (std::size_t j0 = 0; j0 < n; j0 += kTile) {
      const std::size_t cnt = std::min(kTile, n - j0);
      double* kt = k.data();
      const double* yp = yi.data();
      BMS_SIMD
      for (std::size_t t = 0; t < cnt; ++t) {
        double d2 = 0.0;
        for (std::size_t d = 0; d < p; ++d) {
          const double diff = x[d * n + j0 + t] - yp[d];
          d2 += diff * diff;
        }
        kt[t] = f(d2);
      }
      BMS_SIMD_REDUCTION(rw)
      for (std::size_t t = 0; t < cnt; ++t) rw += kt[t] * w[j0 + t];
      for (std::size_t d = 0; d < p; ++d) {
        const double* xd = x + d * n + j0;
        double s = 0.0;
        BMS_SIMD_REDUCTION(s)
        for (std::size_t t = 0; t < cnt; ++t) s += kt[t] * w[j0 + t] * xd[t];
        ry[d] += s;
      }
    }
    acc_w[i] = rw;
    for (std::size_t d = 0; d < p; ++d) acc_x[d * m + i] = ry[d];
  }
}

template <class Fn>
decltype(auto) dispatch_dim(std::size_t p, Fn&& fn) {
  switch (p) {
    case 1: return fn(std::integral_constant<std::size_t, 1>{});
    case 2: return fn(std::integral_constant<std::size_t, 2>{});
    case 3: return fn(std::integral_constant<std::size_t, 3>{});
    default: return fn(std::integral_constant<std::size_t, 0>{});
  }
}

inline std::vector<double> from_soa(const std::vector<double>& soa, std::size_t n,
                                    std::size_t p) {
  std::vector<double> rows(n * p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < p; ++d) rows[i * p + d] = soa[d * n + i];
  return rows;
}

}  // namespace detail

/// One synchronous blurring update: every point moves to the kernel-weighted
/// average of the current snapshot, self term included (f(0) = 1, so the
/// denominator is at least w_i). Weights are carried over unchanged.
inline PointSet blurring_step(const PointSet& points, const Kernel& kernel) {
  const std::size_t n = points.size(), p = points.dim();
  const std::vector<double> x = detail::to_soa(points);
  const std::vector<double>& w = points.weights();

  std::vector<double> acc_w(w);
  std::vector<double> acc_x(n * p);
  for (std::size_t d = 0; d < p; ++d)
    for (std::size_t i = 0; i < n; ++i) acc_x[d * n + i] = w[i] * x[d * n + i];

  kernel.with_squared_influence([&](const auto& f) {
    detail::dispatch_dim(p, [&](auto dim_tag) {
      detail::accumulate_symmetric<decltype(dim_tag)::value>(
          n, p, x.data(), w.data(), f, acc_w.data(), acc_x.data());
    });
  });

  for (std::size_t d = 0; d < p; ++d)
    for (std::size_t i = 0; i < n; ++i) acc_x[d * n + i] /= acc_w[i];
  return points.with_coords(detail::from_soa(acc_x, n, p));
}

/// One nonblurring update: each center moves to the kernel-weighted average
/// of the fixed data. Centers keep their own weights (unused by the update).
inline PointSet nonblurring_step(const PointSet& centers, const PointSet& data,
                                 const Kernel& kernel) {
  if (centers.dim() != data.dim())
    throw Error(ErrorCode::DimensionMismatch,
                "centers and data must share the same dimension");
  const std::size_t m = centers.size(), n = data.size(), p = data.dim();
  const std::vector<double> y = detail::to_soa(centers);
  const std::vector<double> x = detail::to_soa(data);

  std::vector<double> acc_w(m), acc_y(m * p);
  kernel.with_squared_influence([&](const auto& f) {
    detail::dispatch_dim(p, [&](auto dim_tag) {
      detail::accumulate_rows<decltype(dim_tag)::value>(
          m, n, p, y.data(), x.data(), data.weights().data(), f, acc_w.data(),
          acc_y.data());
    });
  });

  for (std::size_t i = 0; i < m; ++i)
    if (!(acc_w[i] > 0.0)) throw IsolatedCenterError(i);
  for (std::size_t d = 0; d < p; ++d)
    for (std::size_t i = 0; i < m; ++i) acc_y[d * m + i] /= acc_w[i];
  return centers.with_coords(detail::from_soa(acc_y, m, p));
}

/// Largest pairwise Euclidean distance.
inline double max_pairwise_distance(const PointSet& points) {
  const std::size_t n = points.size(), p = points.dim();
  const std::vector<double> x = detail::to_soa(points);
  double best = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      double d2 = 0.0;
      for (std::size_t d = 0; d < p; ++d) {
        const double diff = x[d * n + j] - x[d * n + i];
        d2 += diff * diff;
      }
      row = std::max(row, d2);
    }
    best = std::max(best, row);
  }
  return std::sqrt(best);
}

inline double max_displacement(const PointSet& before, const PointSet& after) {
  double best = 0.0;
  for (std::size_t i = 0; i < before.size(); ++i)
    best = std::max(best, squared_distance(before.point(i), after.point(i)));
  return std::sqrt(best);
}

/// Per-dimension mean and sample standard deviation (n - 1 denominator,
/// 0 for a single point).
inline void coordinate_moments(const PointSet& points, std::vector<double>& mean,
                               std::vector<double>& sd) {
  const std::size_t n = points.size(), p = points.dim();
  mean.assign(p, 0.0);
  sd.assign(p, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < p; ++d) mean[d] += points.coord(i, d);
  for (double& m : mean) m /= static_cast<double>(n);
  if (n < 2) return;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < p; ++d) {
      const double diff = points.coord(i, d) - mean[d];
      sd[d] += diff * diff;
    }
  for (double& s : sd) s = std::sqrt(s / static_cast<double>(n - 1));
}

namespace detail {

inline void record(IterationTrace& trace, TraceLevel level, int iteration,
                   double displacement, const PointSet& points) {
  if (level == TraceLevel::None) return;
  IterationRecord r;
  r.iteration = iteration;
  r.max_displacement = displacement;
  r.radius = max_pairwise_distance(points);
  coordinate_moments(points, r.mean, r.std);
  if (level == TraceLevel::Full) r.positions = points;
  trace.records.push_back(std::move(r));
}

}  // namespace detail

/// Iterates until the largest per-point displacement drops below
/// `stop_displacement` or the iteration budget runs out. Running out is
/// reported through `converged = false`, not an exception. Nonblurring runs
/// start their centers at `centers` when given, otherwise at the data.
inline RunResult run(const PointSet& points, const RunConfig& config,
                     const std::optional<PointSet>& centers = std::nullopt) {
  config.validate();
  if (centers && config.mode == Mode::Blurring)
    throw ArgumentError("separate centers apply to nonblurring runs only");

  RunResult result;
  result.trace.dim = points.dim();
  PointSet current = centers ? *centers : points;
  if (current.dim() != points.dim())
    throw Error(ErrorCode::DimensionMismatch,
                "centers and data must share the same dimension");
  detail::record(result.trace, config.trace_level, 0, 0.0, current);

  for (int t = 1; t <= config.max_iterations; ++t) {
    PointSet next = config.mode == Mode::Blurring
                        ? blurring_step(current, config.kernel)
                        : nonblurring_step(current, points, config.kernel);
    const double moved = max_displacement(current, next);
    current = std::move(next);
    result.iterations_used = t;
    detail::record(result.trace, config.trace_level, t, moved, current);
    if (moved < config.stop_displacement) {
      result.converged = true;
      break;
    }
  }
  result.final = std::move(current);
  return result;
}

/// Single-linkage grouping: points i and j share a cluster when a chain of
/// hops of length <= merge_tolerance connects them. Labels follow the index
/// of each cluster's first member; centers are weighted member means.
inline ClusterResult extract_clusters(const PointSet& points, double merge_tolerance) {
  if (!(merge_tolerance > 0.0)) throw ArgumentError("merge_tolerance must be positive");
  const std::size_t n = points.size(), p = points.dim();
  const double tol2 = merge_tolerance * merge_tolerance;

  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&parent](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (squared_distance(points.point(i), points.point(j)) <= tol2) {
        const std::size_t a = find(i), b = find(j);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }

  ClusterResult out;
  out.labels.assign(n, -1);
  std::vector<int> label_of_root(n, -1);
  std::vector<double> weight_sum;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = find(i);
    if (label_of_root[r] < 0) {
      label_of_root[r] = static_cast<int>(out.sizes.size());
      out.sizes.push_back(0);
      out.centers.emplace_back(p, 0.0);
      weight_sum.push_back(0.0);
    }
    const int label = label_of_root[r];
    out.labels[i] = label;
    out.sizes[label] += 1;
    weight_sum[label] += points.weight(i);
    for (std::size_t d = 0; d < p; ++d)
      out.centers[label][d] += points.weight(i) * points.coord(i, d);
  }
  for (std::size_t k = 0; k < out.centers.size(); ++k)
    for (double& c : out.centers[k]) c /= weight_sum[k];
  return out;
}

inline ClusterResult extract_clusters(const RunResult& run_result, double merge_tolerance) {
  ClusterResult out = extract_clusters(run_result.final, merge_tolerance);
  out.converged = run_result.converged;
  out.iterations_used = run_result.iterations_used;
  return out;
}

/// Center of the largest cluster; ties go to the lowest label.
inline std::vector<double> majority_mode(const ClusterResult& result) {
  if (result.sizes.empty()) throw ArgumentError("majority_mode: no clusters");
  const auto it = std::max_element(result.sizes.begin(), result.sizes.end());
  return result.centers[static_cast<std::size_t>(it - result.sizes.begin())];
}

}  // namespace bms

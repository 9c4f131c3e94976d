#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "bms/detail/simd_math.hpp"
#include "bms/error.hpp"

namespace bms {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Gaussian profile exp(-d^2 / (2 tau^2)), optionally cut to zero beyond
/// `support`. The cut keeps PDD and makes cross-cluster influence exactly 0.
struct GaussianProfile {
  double tau = 1.0;
  double support = kInfinity;
};

/// One step of a piecewise-constant profile: `value` applies on
/// (previous threshold, threshold]. Distance 0 always evaluates to 1.
struct FlatLevel {
  double threshold = 0.0;
  double value = 0.0;
};

/// Piecewise-constant profile; zero beyond the last threshold.
struct TruncatedFlatProfile {
  std::vector<FlatLevel> levels;
};

/// Piecewise-linear radial profile through (distance, value) knots. The first
/// knot must be (0, 1); the profile is zero beyond the last knot.
struct TabulatedProfile {
  std::vector<double> distances;
  std::vector<double> values;
};

/// Result of one clause check of the PDD condition on a distance grid.
struct ClauseCheck {
  bool passed = true;
  std::optional<double> first_violation;
};

/// Grid-based verdict on the PDD condition. Clause (i): 0 <= f <= 1 and
/// f = 1 only at distance 0. Clause (ii): radial, true by construction for
/// every profile here. Clause (iii): nonincreasing in distance.
struct PddReport {
  ClauseCheck unit_at_zero;
  ClauseCheck bounded;
  ClauseCheck radial;
  ClauseCheck nonincreasing;

  bool clause_i() const { return unit_at_zero.passed && bounded.passed; }
  bool passed() const {
    return clause_i() && radial.passed && nonincreasing.passed;
  }
};

/// A radial influence function f(||u - v||). Immutable after construction.
class Kernel {
 public:
  using Profile =
      std::variant<GaussianProfile, TruncatedFlatProfile, TabulatedProfile>;

  static Kernel gaussian(double tau, double support = kInfinity) {
    if (!(tau > 0.0) || !std::isfinite(tau))
      throw KernelError("gaussian bandwidth tau must be positive and finite");
    if (!(support > 0.0))
      throw KernelError("gaussian support radius must be positive");
    return Kernel(GaussianProfile{tau, support});
  }

  static Kernel truncated_flat(std::vector<FlatLevel> levels) {
    if (levels.empty())
      throw KernelError("truncated_flat kernel needs at least one level");
    double previous = -1.0;
    for (const auto& level : levels) {
      if (!std::isfinite(level.threshold) || level.threshold < 0.0)
        throw KernelError("truncated_flat thresholds must be finite and >= 0");
      if (level.threshold <= previous)
        throw KernelError("truncated_flat thresholds must be strictly increasing");
      if (!std::isfinite(level.value) || level.value < 0.0)
        throw KernelError("truncated_flat values must be finite and >= 0");
      if (level.threshold == 0.0 && level.value != 1.0)
        throw KernelError("the level covering distance 0 must have value 1");
      previous = level.threshold;
    }
    return Kernel(TruncatedFlatProfile{std::move(levels)});
  }

  static Kernel tabulated(std::vector<double> distances,
                          std::vector<double> values) {
    if (distances.size() != values.size() || distances.size() < 2)
      throw KernelError("tabulated kernel needs >= 2 matching knots");
    if (distances.front() != 0.0 || values.front() != 1.0)
      throw KernelError("tabulated kernel must start at knot (0, 1)");
    for (std::size_t k = 0; k < distances.size(); ++k) {
      if (!std::isfinite(distances[k]) || !std::isfinite(values[k]) ||
          values[k] < 0.0)
        throw KernelError("tabulated knots must be finite with values >= 0");
      if (k > 0 && distances[k] <= distances[k - 1])
        throw KernelError("tabulated distances must be strictly increasing");
    }
    return Kernel(TabulatedProfile{std::move(distances), std::move(values)});
  }

  /// The kernel of the adaptive-weight counterexample: 1 at 0, 1/2 on (0, 1],
  /// 0 beyond 1.
  static Kernel counterexample() {
    return truncated_flat({{0.0, 1.0}, {1.0, 0.5}});
  }

  const Profile& profile() const noexcept { return profile_; }

  std::string family() const {
    return std::visit(
        [](const auto& p) -> std::string {
          using P = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<P, GaussianProfile>) return "gaussian";
          else if constexpr (std::is_same_v<P, TruncatedFlatProfile>)
            return "truncated_flat";
          else return "tabulated";
        },
        profile_);
  }

  double evaluate(double distance) const {
    if (!(distance >= 0.0))
      throw ArgumentError("kernel distance must be nonnegative");
    if (distance == 0.0) return 1.0;
    return std::visit([distance](const auto& p) { return eval(p, distance); },
                      profile_);
  }

  /// Smallest r with f(d) = 0 for every d > r; infinite for the plain Gaussian.
  double support_radius() const {
    return std::visit([](const auto& p) { return support_of(p); }, profile_);
  }

  /// Calls `visitor` with a functor mapping squared distance to influence.
  /// The Gaussian functor is branch-free so pairwise loops can vectorize.
  template <class Visitor>
  decltype(auto) with_squared_influence(Visitor&& visitor) const {
    return std::visit(
        [&](const auto& p) -> decltype(auto) {
          using P = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<P, GaussianProfile>) {
            const double scale = 1.0 / (2.0 * p.tau * p.tau);
            const double cut = p.support * p.support;
            return visitor([scale, cut](double d2) {
              const double inside = d2 <= cut ? 1.0 : 0.0;
              return inside * exp(-d2 * scale);
            });
          } else {
            return visitor([&p](double d2) {
              return d2 == 0.0 ? 1.0 : eval(p, std::sqrt(d2));
            });
          }
        },
        profile_);
  }

 private:
  explicit Kernel(Profile profile) : profile_(std::move(profile)) {}

  static double eval(const GaussianProfile& p, double d) {
    if (d > p.support) return 0.0;
    return std::exp(-(d * d) / (2.0 * p.tau * p.tau));
  }

  static double eval(const TruncatedFlatProfile& p, double d) {
    for (const auto& level : p.levels)
      if (d <= level.threshold) return level.value;
    return 0.0;
  }

  static double eval(const TabulatedProfile& p, double d) {
    if (d >= p.distances.back()) return d == p.distances.back() ? p.values.back() : 0.0;
    const auto hi = std::upper_bound(p.distances.begin(), p.distances.end(), d);
    const auto k = static_cast<std::size_t>(hi - p.distances.begin());
    const double d0 = p.distances[k - 1], d1 = p.distances[k];
    const double t = (d - d0) / (d1 - d0);
    return p.values[k - 1] + t * (p.values[k] - p.values[k - 1]);
  }

  static double support_of(const GaussianProfile& p) { return p.support; }

  static double support_of(const TruncatedFlatProfile& p) {
    for (auto it = p.levels.rbegin(); it != p.levels.rend(); ++it)
      if (it->value > 0.0) return it->threshold;
    return 0.0;
  }

  static double support_of(const TabulatedProfile& p) {
    const std::size_t n = p.values.size();
    for (std::size_t k = n; k-- > 0;) {
      if (p.values[k] > 0.0) return k + 1 < n ? p.distances[k + 1] : p.distances[k];
    }
    return 0.0;
  }

  Profile profile_;
};

/// Checks the PDD clauses on the supplied distances. The grid must contain 0
/// and at least two positive distances; it is sorted internally. Passing is
/// necessary, not sufficient.
inline PddReport verify_pdd(const Kernel& kernel, std::vector<double> grid) {
  if (grid.empty()) throw ArgumentError("verify_pdd: empty distance grid");
  for (double d : grid)
    if (!(d >= 0.0) || !std::isfinite(d))
      throw ArgumentError("verify_pdd: grid distances must be finite and >= 0");
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  if (grid.front() != 0.0 || grid.size() < 3)
    throw ArgumentError(
        "verify_pdd: grid must contain 0 and at least two positive distances");

  PddReport report;
  auto fail = [](ClauseCheck& clause, double d) {
    if (clause.passed) {
      clause.passed = false;
      clause.first_violation = d;
    }
  };

  if (kernel.evaluate(0.0) != 1.0) fail(report.unit_at_zero, 0.0);
  double previous = kInfinity;
  for (double d : grid) {
    const double v = kernel.evaluate(d);
    if (d > 0.0 && v >= 1.0) fail(report.unit_at_zero, d);
    if (v < 0.0 || v > 1.0) fail(report.bounded, d);
    if (v > previous) fail(report.nonincreasing, d);
    previous = v;
  }
  return report;
}

}  // namespace bms

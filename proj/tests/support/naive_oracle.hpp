#pragma once

// Independent reference evaluations of the two update rules: a plain double
// loop over row-major points with a caller-supplied profile of distance.
// Shares no code with the library's tiled accumulation.

#include <cmath>
#include <functional>
#include <vector>

namespace bms::testing {

using Profile = std::function<double(double)>;

struct NaivePoints {
  std::size_t dim;
  std::vector<double> x;  // row-major
  std::vector<double> w;
  std::size_t size() const { return w.size(); }
};

inline double naive_distance(const double* a, const double* b, std::size_t p) {
  double s = 0.0;
  for (std::size_t d = 0; d < p; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
  return std::sqrt(s);
}

/// x_i' = sum_j f(|x_i - x_j|) w_j x_j / sum_k f(|x_i - x_k|) w_k
inline std::vector<double> naive_blurring(const NaivePoints& pts, const Profile& f) {
  const std::size_t n = pts.size(), p = pts.dim;
  std::vector<double> out(n * p);
  for (std::size_t i = 0; i < n; ++i) {
    double den = 0.0;
    std::vector<double> num(p, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      const double k = f(naive_distance(&pts.x[i * p], &pts.x[j * p], p)) * pts.w[j];
      den += k;
      for (std::size_t d = 0; d < p; ++d) num[d] += k * pts.x[j * p + d];
    }
    for (std::size_t d = 0; d < p; ++d) out[i * p + d] = num[d] / den;
  }
  return out;
}

/// y_i' = sum_j f(|x_j - y_i|) w_j x_j / sum_k f(|x_k - y_i|) w_k
inline std::vector<double> naive_nonblurring(const std::vector<double>& centers,
                                             const NaivePoints& data, const Profile& f) {
  const std::size_t p = data.dim, m = centers.size() / p, n = data.size();
  std::vector<double> out(m * p);
  for (std::size_t i = 0; i < m; ++i) {
    double den = 0.0;
    std::vector<double> num(p, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      const double k = f(naive_distance(&centers[i * p], &data.x[j * p], p)) * data.w[j];
      den += k;
      for (std::size_t d = 0; d < p; ++d) num[d] += k * data.x[j * p + d];
    }
    for (std::size_t d = 0; d < p; ++d) out[i * p + d] = num[d] / den;
  }
  return out;
}

inline Profile naive_gaussian(double tau) {
  return [tau](double d) { return std::exp(-d * d / (2.0 * tau * tau)); };
}

/// Piecewise-constant: value_k on (t_{k-1}, t_k], 1 at 0, 0 beyond the last.
inline Profile naive_flat(std::vector<std::pair<double, double>> levels) {
  return [levels](double d) {
    if (d == 0.0) return 1.0;
    for (const auto& [t, v] : levels)
      if (d <= t) return v;
    return 0.0;
  };
}

}  // namespace bms::testing

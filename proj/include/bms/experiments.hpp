#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "bms/engine.hpp"
#include "bms/error.hpp"
#include "bms/kernel.hpp"
#include "bms/point_set.hpp"

namespace bms {

using Rng = std::mt19937_64;

inline constexpr std::uint64_t kDefaultSeed = 20240607;

/// Independent stream for replication `index` of an experiment seeded with
/// `seed`. Results never depend on which worker ran the replication.
inline Rng substream(std::uint64_t seed, std::uint64_t index, std::uint32_t tag = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    tag};
  return Rng(seq);
}

/// n i.i.d. draws from N(mean, cov) with unit weights.
inline PointSet sample_gaussian(std::size_t n, const Eigen::VectorXd& mean,
                                const Eigen::MatrixXd& cov, Rng& rng) {
  if (n == 0) throw ArgumentError("sample_gaussian: n must be >= 1");
  const Eigen::Index p = mean.size();
  if (p == 0 || cov.rows() != p || cov.cols() != p)
    throw Error(ErrorCode::DimensionMismatch, "sample_gaussian: mean/covariance size mismatch");
  if (!cov.allFinite() || !mean.allFinite())
    throw ArgumentError("sample_gaussian: parameters must be finite");
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, cov.cwiseAbs().maxCoeff()))
    throw ArgumentError("sample_gaussian: covariance is not symmetric");
  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw ArgumentError("sample_gaussian: covariance is not positive definite");
  const Eigen::MatrixXd l = llt.matrixL();

  std::normal_distribution<double> z;
  std::vector<double> coords(n * static_cast<std::size_t>(p));
  Eigen::VectorXd draw(p);
  for (std::size_t i = 0; i < n; ++i) {
    for (Eigen::Index d = 0; d < p; ++d) draw(d) = z(rng);
    const Eigen::VectorXd x = mean + l * draw;
    for (Eigen::Index d = 0; d < p; ++d) coords[i * p + d] = x(d);
  }
  return PointSet(static_cast<std::size_t>(p), std::move(coords));
}

inline PointSet sample_gaussian(std::size_t n, double mean, double sd, Rng& rng) {
  if (!(sd > 0.0)) throw ArgumentError("sample_gaussian: sd must be positive");
  return sample_gaussian(n, Eigen::VectorXd::Constant(1, mean),
                         Eigen::MatrixXd::Constant(1, 1, sd * sd), rng);
}

/// Gaussian component with diagonal covariance.
struct MixtureComponent {
  std::string label;
  double proportion = 1.0;
  std::vector<double> mean{0.0};
  std::vector<double> sd{1.0};
};

struct MixtureSpec {
  std::vector<MixtureComponent> components;

  std::size_t dim() const { return components.empty() ? 0 : components.front().mean.size(); }

  void validate() const {
    if (components.empty()) throw ArgumentError("mixture needs at least one component");
    double total = 0.0;
    for (const auto& c : components) {
      if (!(c.proportion > 0.0)) throw ArgumentError("mixture proportions must be positive");
      if (c.mean.empty() || c.mean.size() != dim() || c.sd.size() != dim())
        throw Error(ErrorCode::DimensionMismatch, "mixture components disagree on dimension");
      for (double s : c.sd)
        if (!(s > 0.0)) throw ArgumentError("mixture standard deviations must be positive");
      total += c.proportion;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ArgumentError("mixture proportions must sum to 1");
  }

  /// Exact per-component counts for n points.
  std::vector<std::size_t> counts(std::size_t n) const {
    std::vector<std::size_t> out;
    std::size_t sum = 0;
    for (const auto& c : components) {
      const double exact = c.proportion * static_cast<double>(n);
      const auto k = static_cast<std::size_t>(std::llround(exact));
      if (std::abs(exact - static_cast<double>(k)) > 1e-9 * std::max(1.0, exact))
        throw ArgumentError("mixture proportions do not split n points exactly");
      out.push_back(k);
      sum += k;
    }
    if (sum != n) throw ArgumentError("mixture component counts do not sum to n");
    return out;
  }
};

/// 95% N(0, 1) inliers and 5% N(5, 1) outliers.
inline MixtureSpec contaminated_normal() {
  return {{{"inlier", 0.95, {0.0}, {1.0}}, {"outlier", 0.05, {5.0}, {1.0}}}};
}

struct MixtureSample {
  PointSet points;
  std::vector<std::size_t> component;  // index into MixtureSpec::components
};

/// Fixed design: component k contributes exactly proportion_k * n points,
/// drawn in component order.
inline MixtureSample sample_mixture(const MixtureSpec& spec, std::size_t n, Rng& rng) {
  spec.validate();
  if (n == 0) throw ArgumentError("sample_mixture: n must be >= 1");
  const auto counts = spec.counts(n);
  const std::size_t p = spec.dim();
  MixtureSample out;
  std::vector<double> coords;
  coords.reserve(n * p);
  std::normal_distribution<double> z;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    const auto& c = spec.components[k];
    for (std::size_t i = 0; i < counts[k]; ++i) {
      for (std::size_t d = 0; d < p; ++d) coords.push_back(c.mean[d] + c.sd[d] * z(rng));
      out.component.push_back(k);
    }
  }
  out.points = PointSet(p, std::move(coords));
  return out;
}

struct SummaryStat {
  double mean = 0.0;
  double std = 0.0;
  std::size_t count = 0;
};

/// Arithmetic mean and unbiased standard deviation.
inline SummaryStat summarize(const std::vector<double>& values) {
  if (values.size() < 2)
    throw Error(ErrorCode::StdUndefined, "standard deviation needs at least 2 values");
  SummaryStat s;
  s.count = values.size();
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(s.count);
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(s.count - 1));
  return s;
}

enum class ExperimentKind { ConvergenceRate, Efficiency, Robustness, Consistency };

inline std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::ConvergenceRate: return "convergence-rate";
    case ExperimentKind::Efficiency: return "efficiency";
    case ExperimentKind::Robustness: return "robustness";
    case ExperimentKind::Consistency: return "consistency";
  }
  return "unknown";
}

inline ExperimentKind parse_experiment_kind(const std::string& s) {
  if (s == "convergence-rate" || s == "convergence_rate") return ExperimentKind::ConvergenceRate;
  if (s == "efficiency") return ExperimentKind::Efficiency;
  if (s == "robustness") return ExperimentKind::Robustness;
  if (s == "consistency") return ExperimentKind::Consistency;
  throw ArgumentError("unknown experiment kind '" + s + "'");
}

/// What to do with a replication whose run exhausts its iteration budget.
enum class NonconvergencePolicy { Exclude, Abort };

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Efficiency;
  std::size_t n_points = 100;
  double tau = 1.0;
  int replications = 2000;
  std::uint64_t seed = kDefaultSeed;
  std::optional<MixtureSpec> mixture;
  // Engine settings shared by every run.
  double stop_displacement = 1e-10;
  int max_iterations = 500;
  double merge_tolerance = 1e-6;
  // Robustness runs cut the Gaussian to zero beyond truncation * tau;
  // pure_gaussian restores the untruncated profile.
  double truncation = 3.0;
  bool pure_gaussian = false;
  NonconvergencePolicy on_nonconvergence = NonconvergencePolicy::Exclude;
  std::vector<std::size_t> consistency_sizes{100, 400, 1600};
  unsigned workers = 0;  // 0 = hardware concurrency

  void validate() const {
    if (n_points < 2) throw ArgumentError("n_points must be >= 2");
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ArgumentError("tau must be positive");
    if (replications < 1) throw ArgumentError("replications must be >= 1");
    if (!(stop_displacement > 0.0)) throw ArgumentError("stop_displacement must be positive");
    if (max_iterations < 1) throw ArgumentError("max_iterations must be >= 1");
    if (!(merge_tolerance > 0.0)) throw ArgumentError("merge_tolerance must be positive");
    if (!pure_gaussian && !(truncation > 0.0)) throw ArgumentError("truncation must be positive");
    if (mixture) mixture->validate();
    if (kind == ExperimentKind::Consistency && consistency_sizes.empty())
      throw ArgumentError("consistency needs at least one sample size");
  }

  /// Kernel used by both processes: truncated Gaussian for robustness
  /// (unless pure_gaussian), plain Gaussian otherwise.
  Kernel kernel() const {
    if (kind == ExperimentKind::Robustness && !pure_gaussian)
      return Kernel::gaussian(tau, truncation * tau);
    return Kernel::gaussian(tau);
  }

  RunConfig run_config(Mode mode) const {
    RunConfig c;
    c.mode = mode;
    c.kernel = kernel();
    c.stop_displacement = stop_displacement;
    c.max_iterations = max_iterations;
    c.trace_level = TraceLevel::None;
    return c;
  }
};

inline ExperimentConfig efficiency_config(double tau) {
  ExperimentConfig c;
  c.kind = ExperimentKind::Efficiency;
  c.tau = tau;
  return c;
}

inline ExperimentConfig robustness_config(double tau) {
  ExperimentConfig c;
  c.kind = ExperimentKind::Robustness;
  c.tau = tau;
  c.mixture = contaminated_normal();
  return c;
}

inline ExperimentConfig convergence_rate_config() {
  ExperimentConfig c;
  c.kind = ExperimentKind::ConvergenceRate;
  c.tau = 2.0;
  c.replications = 1;
  return c;
}

inline ExperimentConfig consistency_config(double tau = 1.0) {
  ExperimentConfig c;
  c.kind = ExperimentKind::Consistency;
  c.tau = tau;
  c.replications = 500;
  return c;
}

/// Outcome of one replication. Location statistics are NaN when the
/// corresponding run did not converge.
struct Replication {
  int index = 0;
  double sample_mean = 0.0;
  double blurring = std::numeric_limits<double>::quiet_NaN();
  double nonblurring = std::numeric_limits<double>::quiet_NaN();
  bool blurring_converged = false;
  bool nonblurring_converged = false;
  int blurring_iterations = 0;
  int nonblurring_iterations = 0;
  std::size_t blurring_clusters = 0;
  std::size_t nonblurring_clusters = 0;
};

struct TableRow {
  ExperimentConfig config;
  SummaryStat sample_mean;
  SummaryStat blurring;
  SummaryStat nonblurring;
  int excluded_blurring = 0;
  int excluded_nonblurring = 0;
  std::vector<Replication> replications;
};

struct SeriesPoint {
  int iteration = 0;
  double mean = 0.0;
  double std = 0.0;
  double log10_std = 0.0;
};

struct ConvergenceSeries {
  ExperimentConfig config;
  std::vector<SeriesPoint> blurring;
  std::vector<SeriesPoint> nonblurring;
  bool blurring_converged = false;
  bool nonblurring_converged = false;
};

struct ConsistencyRow {
  std::size_t n = 0;
  SummaryStat blurring;
  int excluded = 0;
};

struct ConsistencyReport {
  ExperimentConfig config;
  std::vector<ConsistencyRow> rows;
};

namespace detail {

inline unsigned worker_count(unsigned requested, int jobs) {
  unsigned w = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
  return std::max(1u, std::min<unsigned>(w, static_cast<unsigned>(jobs)));
}

// Runs job(i) for i in [0, count) on a pool of workers. Each job writes only
// its own slot, so results are identical for any worker count. The first
// failure by index is rethrown after all workers stop.
template <class Job>
void parallel_for(int count, unsigned workers, Job&& job) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (int i = next++; i < count && !failed; i = next++) {
      try {
        job(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
        failed = true;
      }
    }
  };
  const unsigned w = worker_count(workers, count);
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < w; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline double sample_mean_1d(const PointSet& pts) {
  double s = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) s += pts.coord(i, 0);
  return s / static_cast<double>(pts.size());
}

inline void check_converged(const ExperimentConfig& cfg, const RunResult& r, int index,
                            Mode mode) {
  if (!r.converged && cfg.on_nonconvergence == NonconvergencePolicy::Abort)
    throw Error(ErrorCode::NonConvergence,
                "replication " + std::to_string(index) + ": " + to_string(mode) +
                    " run did not converge within " + std::to_string(cfg.max_iterations) +
                    " iterations");
}

inline PointSet draw_data(const ExperimentConfig& cfg, Rng& rng) {
  if (cfg.mixture) return sample_mixture(*cfg.mixture, cfg.n_points, rng).points;
  return sample_gaussian(cfg.n_points, 0.0, 1.0, rng);
}

// Location statistic of one process: the center of the largest cluster. With
// a single cluster this is the common limit point.
inline double location(const ExperimentConfig& cfg, const RunResult& r) {
  return majority_mode(extract_clusters(r, cfg.merge_tolerance))[0];
}

inline Replication replicate(const ExperimentConfig& cfg, int index) {
  Rng rng = substream(cfg.seed, static_cast<std::uint64_t>(index));
  const PointSet data = draw_data(cfg, rng);
  Replication rep;
  rep.index = index;
  rep.sample_mean = sample_mean_1d(data);

  const RunResult b = run(data, cfg.run_config(Mode::Blurring));
  check_converged(cfg, b, index, Mode::Blurring);
  const ClusterResult bc = extract_clusters(b, cfg.merge_tolerance);
  rep.blurring_converged = b.converged;
  rep.blurring_iterations = b.iterations_used;
  rep.blurring_clusters = bc.count();
  if (b.converged) rep.blurring = majority_mode(bc)[0];

  const RunResult nb = run(data, cfg.run_config(Mode::Nonblurring));
  check_converged(cfg, nb, index, Mode::Nonblurring);
  const ClusterResult nc = extract_clusters(nb, cfg.merge_tolerance);
  rep.nonblurring_converged = nb.converged;
  rep.nonblurring_iterations = nb.iterations_used;
  rep.nonblurring_clusters = nc.count();
  if (nb.converged) rep.nonblurring = majority_mode(nc)[0];
  return rep;
}

inline SummaryStat summarize_or_empty(const std::vector<double>& v) {
  if (v.size() < 2) {
    SummaryStat s;
    s.count = v.size();
    s.mean = v.empty() ? std::numeric_limits<double>::quiet_NaN() : v.front();
    s.std = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  return summarize(v);
}

inline TableRow run_table(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.mixture && cfg.mixture->dim() != 1)
    throw Error(ErrorCode::DimensionMismatch, "location experiments are one-dimensional");
  TableRow row;
  row.config = cfg;
  row.replications.resize(static_cast<std::size_t>(cfg.replications));
  parallel_for(cfg.replications, cfg.workers,
               [&](int i) { row.replications[static_cast<std::size_t>(i)] = replicate(cfg, i); });

  std::vector<double> sm, bl, nb;
  for (const auto& r : row.replications) {
    sm.push_back(r.sample_mean);
    if (r.blurring_converged) bl.push_back(r.blurring);
    else ++row.excluded_blurring;
    if (r.nonblurring_converged) nb.push_back(r.nonblurring);
    else ++row.excluded_nonblurring;
  }
  row.sample_mean = summarize_or_empty(sm);
  row.blurring = summarize_or_empty(bl);
  row.nonblurring = summarize_or_empty(nb);
  return row;
}

inline std::vector<SeriesPoint> series(const IterationTrace& trace) {
  std::vector<SeriesPoint> out;
  for (const auto& r : trace.records)
    out.push_back({r.iteration, r.mean[0], r.std[0],
                   r.std[0] > 0.0 ? std::log10(r.std[0]) : -kInfinity});
  return out;
}

}  // namespace detail

/// Sample mean, blurring limit and nonblurring majority mode on N(0, 1) data,
/// summarized over replications.
inline TableRow run_efficiency(ExperimentConfig cfg) {
  if (cfg.kind != ExperimentKind::Efficiency)
    throw ArgumentError("run_efficiency needs an efficiency config");
  return detail::run_table(cfg);
}

/// Same statistics on contaminated data; both processes report the center
/// of their largest cluster.
inline TableRow run_robustness(ExperimentConfig cfg) {
  if (cfg.kind != ExperimentKind::Robustness)
    throw ArgumentError("run_robustness needs a robustness config");
  if (!cfg.mixture) cfg.mixture = contaminated_normal();
  return detail::run_table(cfg);
}

/// Per-iteration mean and spread of one N(0, 1) sample under both processes.
/// Only the first replication is traced.
inline ConvergenceSeries run_convergence_rate(ExperimentConfig cfg) {
  if (cfg.kind != ExperimentKind::ConvergenceRate)
    throw ArgumentError("run_convergence_rate needs a convergence-rate config");
  cfg.validate();
  Rng rng = substream(cfg.seed, 0);
  const PointSet data = detail::draw_data(cfg, rng);
  ConvergenceSeries out;
  out.config = cfg;
  for (Mode mode : {Mode::Blurring, Mode::Nonblurring}) {
    RunConfig rc = cfg.run_config(mode);
    rc.trace_level = TraceLevel::Summary;
    const RunResult r = run(data, rc);
    (mode == Mode::Blurring ? out.blurring : out.nonblurring) = detail::series(r.trace);
    (mode == Mode::Blurring ? out.blurring_converged : out.nonblurring_converged) = r.converged;
  }
  return out;
}

/// Spread of the blurring limit across replications for growing sample sizes.
inline ConsistencyReport run_consistency(ExperimentConfig cfg) {
  if (cfg.kind != ExperimentKind::Consistency)
    throw ArgumentError("run_consistency needs a consistency config");
  const std::size_t n0 = cfg.n_points;
  cfg.validate();
  ConsistencyReport out;
  out.config = cfg;
  for (std::size_t k = 0; k < cfg.consistency_sizes.size(); ++k) {
    const std::size_t n = cfg.consistency_sizes[k];
    if (n < 2) throw ArgumentError("consistency sample sizes must be >= 2");
    std::vector<double> value(static_cast<std::size_t>(cfg.replications));
    std::vector<char> ok(value.size(), 0);
    ExperimentConfig sub = cfg;
    sub.n_points = n;
    detail::parallel_for(cfg.replications, cfg.workers, [&](int i) {
      // Size index goes into the stream tag so sizes use unrelated samples.
      Rng rng = substream(cfg.seed, static_cast<std::uint64_t>(i), static_cast<std::uint32_t>(k + 1));
      const PointSet data = detail::draw_data(sub, rng);
      const RunResult r = run(data, sub.run_config(Mode::Blurring));
      detail::check_converged(sub, r, i, Mode::Blurring);
      if (r.converged) {
        value[static_cast<std::size_t>(i)] = detail::location(sub, r);
        ok[static_cast<std::size_t>(i)] = 1;
      }
    });
    ConsistencyRow row;
    row.n = n;
    std::vector<double> kept;
    for (std::size_t i = 0; i < value.size(); ++i) {
      if (ok[i]) kept.push_back(value[i]);
      else ++row.excluded;
    }
    row.blurring = detail::summarize_or_empty(kept);
    out.rows.push_back(row);
  }
  out.config.n_points = n0;
  return out;
}

}  // namespace bms

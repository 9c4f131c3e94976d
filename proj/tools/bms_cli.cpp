// Command-line front end: cluster, theory, experiment, diagnose, counterexample.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "bms/diagnostics.hpp"
#include "bms/engine.hpp"
#include "bms/experiments.hpp"
#include "bms/gaussian_theory.hpp"
#include "bms/io.hpp"

namespace {

namespace io = bms::io;
using json = io::json;

constexpr int kUsageExit = 2;
constexpr int kInternalExit = 1;

// Writes to `path`, or stdout when the path is empty or "-".
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty() && path != "-") file_ = std::make_unique<std::ofstream>(io::detail::open_output(path));
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

std::uint64_t default_seed() {
  if (auto v = env("BMS_SEED")) {
    try {
      return std::stoull(*v);
    } catch (const std::exception&) {
      throw bms::ArgumentError("BMS_SEED is not an unsigned integer");
    }
  }
  return bms::kDefaultSeed;
}

unsigned default_workers() {
  if (auto v = env("BMS_WORKERS")) {
    try {
      return static_cast<unsigned>(std::stoul(*v));
    } catch (const std::exception&) {
      throw bms::ArgumentError("BMS_WORKERS is not an unsigned integer");
    }
  }
  return 0;
}

std::string read_text_or_literal(const std::string& arg) {
  if (!arg.empty() && arg.front() == '{') return arg;
  auto in = io::detail::open_input(arg);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct KernelFlags {
  std::string family = "gaussian";
  double tau = 1.0;
  double support = bms::kInfinity;
  std::string spec;

  void add(CLI::App* app) {
    app->add_option("--kernel", family, "Kernel family: gaussian or counterexample")
        ->check(CLI::IsMember({"gaussian", "counterexample"}));
    app->add_option("--tau", tau, "Gaussian bandwidth")->check(CLI::PositiveNumber);
    app->add_option("--support", support, "Cut the Gaussian to zero beyond this distance")
        ->check(CLI::PositiveNumber);
    app->add_option("--kernel-spec", spec, "Kernel as JSON text or a JSON file path");
  }

  bms::Kernel build() const {
    if (!spec.empty()) return io::kernel_from_string(read_text_or_literal(spec));
    if (family == "counterexample") return bms::Kernel::counterexample();
    return bms::Kernel::gaussian(tau, support);
  }
};

struct ClusterFlags {
  std::string input, output, trace, positions, centers;
  std::string mode = "blurring";
  KernelFlags kernel;
  double stop = 1e-10;
  int max_iterations = 500;
  double merge_tolerance = 1e-6;
  bool weight_column = false;
};

int cmd_cluster(const ClusterFlags& f) {
  bms::RunConfig cfg;
  cfg.mode = io::parse_mode(f.mode);
  cfg.kernel = f.kernel.build();
  cfg.stop_displacement = f.stop;
  cfg.max_iterations = f.max_iterations;
  cfg.trace_level = !f.positions.empty() ? bms::TraceLevel::Full
                    : !f.trace.empty()   ? bms::TraceLevel::Summary
                                         : bms::TraceLevel::None;
  const bms::PointSet points = io::read_points_csv(f.input, f.weight_column);
  std::optional<bms::PointSet> centers;
  if (!f.centers.empty()) centers = io::read_points_csv(f.centers);

  const bms::RunResult result = bms::run(points, cfg, centers);
  const bms::ClusterResult clusters = bms::extract_clusters(result, f.merge_tolerance);

  json extra{{"input", f.input}, {"merge_tolerance", f.merge_tolerance},
             {"weight_column", f.weight_column}};
  if (!f.centers.empty()) extra["centers"] = f.centers;
  Sink out(f.output);
  out.stream() << io::result_to_json(result, clusters, cfg, extra).dump(2) << '\n';
  if (!f.trace.empty()) {
    Sink t(f.trace);
    io::write_trace_csv(t.stream(), result.trace);
  }
  if (!f.positions.empty()) {
    Sink p(f.positions);
    io::write_positions_csv(p.stream(), result.trace);
  }
  return 0;
}

struct TheoryFlags {
  double sigma0 = 1.0;
  double tau = 2.0;
  int steps = 3;
  std::string output;
};

int cmd_theory(const TheoryFlags& f) {
  const auto blurring = bms::blurring_std_sequence(f.sigma0, f.tau, f.steps);
  const auto nonblurring = bms::nonblurring_std_sequence(f.sigma0, f.tau, f.steps);
  Sink out(f.output);
  out.stream() << "# config: "
               << json{{"sigma0", f.sigma0}, {"tau", f.tau}, {"steps", f.steps}}.dump() << '\n';
  io::write_theory_csv(out.stream(), blurring, nonblurring);
  return 0;
}

struct ExperimentFlags {
  std::string kind = "efficiency";
  double tau = 1.0;
  int reps = 2000;
  std::uint64_t seed = 0;
  std::string output, csv;
  std::size_t n_points = 100;
  double stop = 1e-10;
  int max_iterations = 500;
  double merge_tolerance = 1e-6;
  double truncation = 3.0;
  bool pure_gaussian = false;
  bool abort_on_nonconvergence = false;
  unsigned workers = 0;
  std::vector<std::size_t> sizes{100, 400, 1600};
};

int cmd_experiment(const ExperimentFlags& f, bool tau_given, bool reps_given) {
  bms::ExperimentConfig cfg;
  cfg.kind = bms::parse_experiment_kind(f.kind);
  switch (cfg.kind) {
    case bms::ExperimentKind::ConvergenceRate: cfg = bms::convergence_rate_config(); break;
    case bms::ExperimentKind::Efficiency: cfg = bms::efficiency_config(f.tau); break;
    case bms::ExperimentKind::Robustness: cfg = bms::robustness_config(f.tau); break;
    case bms::ExperimentKind::Consistency: cfg = bms::consistency_config(f.tau); break;
  }
  if (tau_given) cfg.tau = f.tau;
  if (reps_given) cfg.replications = f.reps;
  cfg.seed = f.seed;
  cfg.n_points = f.n_points;
  cfg.stop_displacement = f.stop;
  cfg.max_iterations = f.max_iterations;
  cfg.merge_tolerance = f.merge_tolerance;
  cfg.truncation = f.truncation;
  cfg.pure_gaussian = f.pure_gaussian;
  cfg.on_nonconvergence = f.abort_on_nonconvergence ? bms::NonconvergencePolicy::Abort
                                                    : bms::NonconvergencePolicy::Exclude;
  cfg.workers = f.workers;
  cfg.consistency_sizes = f.sizes;

  json report;
  auto write_csv = [&](const auto& result) {
    if (f.csv.empty()) return;
    Sink c(f.csv);
    io::write_long_csv(c.stream(), result);
  };
  switch (cfg.kind) {
    case bms::ExperimentKind::ConvergenceRate: {
      const auto s = bms::run_convergence_rate(cfg);
      report = io::to_json(s);
      write_csv(s);
      break;
    }
    case bms::ExperimentKind::Efficiency:
    case bms::ExperimentKind::Robustness: {
      const auto row = cfg.kind == bms::ExperimentKind::Efficiency ? bms::run_efficiency(cfg)
                                                                   : bms::run_robustness(cfg);
      report = io::to_json(row);
      write_csv(row);
      break;
    }
    case bms::ExperimentKind::Consistency: {
      const auto r = bms::run_consistency(cfg);
      report = io::to_json(r);
      write_csv(r);
      break;
    }
  }
  Sink out(f.output);
  out.stream() << report.dump(2) << '\n';
  return 0;
}

struct DiagnoseFlags {
  std::string trace, positions, result, output;
  KernelFlags kernel;
  std::size_t directions = 20;
  std::uint64_t seed = 20240607;
};

int cmd_diagnose(const DiagnoseFlags& f) {
  bms::IterationTrace trace = [&] {
    auto in = io::detail::open_input(f.trace);
    return io::read_trace_csv(in);
  }();
  if (!f.positions.empty()) {
    auto in = io::detail::open_input(f.positions);
    io::attach_positions(trace, in);
  }

  json report{{"config",
               {{"trace", f.trace},
                {"positions", f.positions.empty() ? json(nullptr) : json(f.positions)},
                {"result", f.result.empty() ? json(nullptr) : json(f.result)},
                {"directions", f.directions},
                {"direction_seed", f.seed}}}};
  report["radius"] = io::to_json(bms::radius_trace(trace));
  if (trace.has_positions()) {
    if (trace.dim <= 2) report["hull"] = io::to_json(bms::hull_trace(trace));
    else report["hull"] = {{"skipped", "exact hulls cover dimensions 1 and 2; see directional"}};
    report["directional"] = io::to_json(bms::directional_containment(trace, f.directions, f.seed));
  }
  if (!f.result.empty()) {
    if (!trace.has_positions())
      throw bms::ArgumentError("influence check needs --positions from a full trace");
    const auto res = io::read_result_json(f.result);
    const bms::Kernel kernel = f.kernel.spec.empty() ? res.config.kernel : f.kernel.build();
    report["config"]["kernel"] = io::to_json(kernel);
    report["influence"] =
        io::to_json(bms::influence_decay(trace, kernel, io::clusters_from_labels(res.labels)));
  }
  Sink out(f.output);
  out.stream() << report.dump(2) << '\n';
  return 0;
}

struct CounterexampleFlags {
  std::vector<double> deltas{0.1, 0.1, 0.1};
  int iterations = 50;
  double min_offset = bms::kCounterexampleMinOffset;
  std::string output;
};

int cmd_counterexample(const CounterexampleFlags& f) {
  const auto cx = bms::run_counterexample({f.deltas[0], f.deltas[1], f.deltas[2]}, f.iterations,
                                          f.min_offset);
  Sink out(f.output);
  out.stream() << "# config: "
               << json{{"deltas", f.deltas}, {"iterations", f.iterations}, {"min_offset", f.min_offset},
                       {"kernel", io::to_json(bms::Kernel::counterexample())},
                       {"alternates", cx.alternates}}
                      .dump()
               << '\n';
  io::write_counterexample_csv(out.stream(), cx);
  return 0;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"Blurring and nonblurring mean-shift toolkit"};
  app.require_subcommand(1);

  ClusterFlags cf;
  auto* cluster = app.add_subcommand("cluster", "Run mean-shift on a points CSV and write result JSON");
  cluster->add_option("-i,--input", cf.input, "Points CSV")->required();
  cluster->add_option("-o,--out", cf.output, "Result JSON path (default stdout)");
  cluster->add_option("--mode", cf.mode, "blurring or nonblurring")
      ->check(CLI::IsMember({"blurring", "nonblurring"}));
  cf.kernel.add(cluster);
  cluster->add_option("--stop", cf.stop, "Stop when every point moves less than this")
      ->check(CLI::PositiveNumber);
  cluster->add_option("--max-iter", cf.max_iterations, "Iteration budget")->check(CLI::PositiveNumber);
  cluster->add_option("--merge-tol", cf.merge_tolerance, "Single-linkage merge distance")
      ->check(CLI::PositiveNumber);
  cluster->add_option("--trace", cf.trace, "Write the per-iteration trace CSV here");
  cluster->add_option("--positions", cf.positions, "Write per-iteration positions CSV here");
  cluster->add_option("--centers", cf.centers, "Starting centers CSV (nonblurring only)");
  cluster->add_flag("--weight-column", cf.weight_column, "Last column of a headerless CSV is the weight");

  TheoryFlags tf;
  auto* theory = app.add_subcommand("theory", "Closed-form standard deviation sequences as CSV");
  theory->add_option("--sigma0", tf.sigma0, "Initial standard deviation")->check(CLI::PositiveNumber);
  theory->add_option("--tau", tf.tau, "Gaussian bandwidth")->check(CLI::PositiveNumber);
  theory->add_option("--steps", tf.steps, "Number of iterations")->check(CLI::NonNegativeNumber);
  theory->add_option("-o,--out", tf.output, "CSV path (default stdout)");

  ExperimentFlags ef;
  ef.seed = default_seed();
  ef.workers = default_workers();
  auto* experiment = app.add_subcommand("experiment", "Monte Carlo studies");
  experiment->add_option("--kind", ef.kind, "efficiency, robustness, convergence-rate or consistency")
      ->check(CLI::IsMember({"efficiency", "robustness", "convergence-rate", "consistency"}));
  auto* tau_opt = experiment->add_option("--tau", ef.tau, "Gaussian bandwidth")->check(CLI::PositiveNumber);
  auto* reps_opt = experiment->add_option("--reps", ef.reps, "Replications")->check(CLI::PositiveNumber);
  experiment->add_option("--seed", ef.seed, "Master seed (env BMS_SEED)");
  experiment->add_option("-o,--out", ef.output, "Report JSON path (default stdout)");
  experiment->add_option("--emit-csv", ef.csv, "Also write long-format CSV here");
  experiment->add_option("--n", ef.n_points, "Points per replication")->check(CLI::Range(2, 100000000));
  experiment->add_option("--stop", ef.stop, "Engine stop displacement")->check(CLI::PositiveNumber);
  experiment->add_option("--max-iter", ef.max_iterations, "Engine iteration budget")->check(CLI::PositiveNumber);
  experiment->add_option("--merge-tol", ef.merge_tolerance, "Merge distance")->check(CLI::PositiveNumber);
  experiment->add_option("--truncation", ef.truncation, "Robustness kernel cut, in multiples of tau")
      ->check(CLI::PositiveNumber);
  experiment->add_flag("--pure-gaussian", ef.pure_gaussian, "Robustness runs without the kernel cut");
  experiment->add_flag("--abort-on-nonconvergence", ef.abort_on_nonconvergence,
                       "Fail instead of excluding replications that run out of iterations");
  experiment->add_option("--workers", ef.workers, "Worker threads, 0 = all cores (env BMS_WORKERS)");
  experiment->add_option("--sizes", ef.sizes, "Sample sizes for the consistency study");

  DiagnoseFlags df;
  auto* diagnose = app.add_subcommand("diagnose", "Hull, radius and influence checks on a trace");
  diagnose->add_option("--trace", df.trace, "Trace CSV from cluster --trace")->required();
  diagnose->add_option("--positions", df.positions, "Positions CSV from cluster --positions");
  diagnose->add_option("--result", df.result, "Result JSON; enables the cross-cluster influence check");
  diagnose->add_option("--kernel-spec", df.kernel.spec, "Override the kernel recorded in --result");
  diagnose->add_option("--directions", df.directions, "Random projection directions")
      ->check(CLI::PositiveNumber);
  diagnose->add_option("--direction-seed", df.seed, "Seed for projection directions");
  diagnose->add_option("-o,--out", df.output, "Report JSON path (default stdout)");

  CounterexampleFlags xf;
  auto* counter = app.add_subcommand("counterexample", "Adaptive-weight oscillation as CSV");
  counter->add_option("--deltas", xf.deltas, "Offsets d1 d2 d3, each in (0, 1/4)")->expected(3);
  counter->add_option("--iterations", xf.iterations, "Number of updates")->check(CLI::PositiveNumber);
  counter->add_option("--min-offset", xf.min_offset, "Smallest |x1| after each flip");
  counter->add_option("-o,--out", xf.output, "CSV path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsageExit;
  }

  if (*cluster) return cmd_cluster(cf);
  if (*theory) return cmd_theory(tf);
  if (*experiment) return cmd_experiment(ef, tau_opt->count() > 0, reps_opt->count() > 0);
  if (*diagnose) return cmd_diagnose(df);
  if (*counter) return cmd_counterexample(xf);
  return kUsageExit;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const bms::Error& e) {
    std::cerr << io::error_json(e).dump() << '\n';
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "internal"}, {"code", kInternalExit}, {"message", e.what()}}.dump() << '\n';
    return kInternalExit;
  }
}

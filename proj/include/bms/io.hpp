#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bms/diagnostics.hpp"
#include "bms/engine.hpp"
#include "bms/error.hpp"
#include "bms/experiments.hpp"
#include "bms/kernel.hpp"
#include "bms/point_set.hpp"

namespace bms::io {

using json = nlohmann::ordered_json;

/// Shortest text that reads back to the same double (17 significant digits).
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::string trim(std::string s) {
  auto space = [](unsigned char c) { return std::isspace(c) != 0; };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), space));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), space).base(), s.end());
  return s;
}

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open input file '" + path + "'");
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write output file '" + path + "'");
  return out;
}

// Numeric table with an optional header row. Blank lines and lines starting
// with '#' are skipped.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

inline Table read_table(std::istream& in, const std::string& what) {
  Table t;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string trimmed = trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    const auto cells = split(trimmed);
    std::vector<double> row;
    bool numeric = true;
    for (const auto& c : cells) {
      const auto v = parse_double(c);
      if (!v) {
        numeric = false;
        break;
      }
      row.push_back(*v);
    }
    if (!numeric) {
      if (t.header.empty() && t.rows.empty()) {
        t.header = cells;
        width = cells.size();
        continue;
      }
      throw Error(ErrorCode::MalformedInput,
                  what + " line " + std::to_string(line_no) + ": non-numeric field");
    }
    if (width == 0) width = row.size();
    if (row.size() != width)
      throw Error(ErrorCode::DimensionMismatch,
                  what + " line " + std::to_string(line_no) + ": expected " +
                      std::to_string(width) + " columns, got " + std::to_string(row.size()));
    t.rows.push_back(std::move(row));
  }
  if (t.rows.empty()) throw Error(ErrorCode::EmptyInput, "empty input");
  return t;
}

inline std::size_t column(const Table& t, const std::string& name, const std::string& what) {
  for (std::size_t k = 0; k < t.header.size(); ++k)
    if (lower(t.header[k]) == name) return k;
  throw Error(ErrorCode::MalformedInput, what + ": missing column '" + name + "'");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Points

/// One point per row. A final column headed "weight" holds the point
/// weights; `weight_column` forces that reading for headerless files.
inline PointSet read_points_csv(std::istream& in, bool weight_column = false) {
  const auto t = detail::read_table(in, "points");
  const bool weighted =
      weight_column || (!t.header.empty() && detail::lower(t.header.back()) == "weight");
  const std::size_t width = t.rows.front().size();
  if (weighted && width < 2)
    throw Error(ErrorCode::DimensionMismatch, "points: weight column needs at least one coordinate");
  const std::size_t p = weighted ? width - 1 : width;
  std::vector<double> coords, weights;
  for (const auto& row : t.rows) {
    coords.insert(coords.end(), row.begin(), row.begin() + static_cast<std::ptrdiff_t>(p));
    if (weighted) weights.push_back(row.back());
  }
  return PointSet(p, std::move(coords), std::move(weights));
}

inline PointSet read_points_csv(const std::string& path, bool weight_column = false) {
  auto in = detail::open_input(path);
  return read_points_csv(in, weight_column);
}

inline void write_points_csv(std::ostream& out, const PointSet& pts, bool with_weights = true) {
  for (std::size_t d = 0; d < pts.dim(); ++d) out << (d ? "," : "") << "x_" << d + 1;
  if (with_weights) out << ",weight";
  out << '\n';
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t d = 0; d < pts.dim(); ++d)
      out << (d ? "," : "") << format_number(pts.coord(i, d));
    if (with_weights) out << ',' << format_number(pts.weight(i));
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Kernels and run configuration

inline json to_json(const Kernel& k) {
  return std::visit(
      [](const auto& p) -> json {
        using P = std::decay_t<decltype(p)>;
        json j;
        if constexpr (std::is_same_v<P, GaussianProfile>) {
          j["family"] = "gaussian";
          j["tau"] = p.tau;
          if (std::isfinite(p.support)) j["support"] = p.support;
        } else if constexpr (std::is_same_v<P, TruncatedFlatProfile>) {
          j["family"] = "truncated_flat";
          j["levels"] = json::array();
          for (const auto& l : p.levels) j["levels"].push_back({l.threshold, l.value});
        } else {
          j["family"] = "tabulated";
          j["distances"] = p.distances;
          j["values"] = p.values;
        }
        return j;
      },
      k.profile());
}

inline Kernel kernel_from_json(const json& j) {
  try {
    if (!j.is_object() || !j.contains("family")) throw KernelError("kernel spec needs a \"family\"");
    const std::string family = j.at("family").get<std::string>();
    if (family == "gaussian")
      return Kernel::gaussian(j.at("tau").get<double>(), j.value("support", kInfinity));
    if (family == "truncated_flat") {
      std::vector<FlatLevel> levels;
      for (const auto& l : j.at("levels")) {
        if (!l.is_array() || l.size() != 2) throw KernelError("levels must be [threshold, value] pairs");
        levels.push_back({l[0].get<double>(), l[1].get<double>()});
      }
      return Kernel::truncated_flat(std::move(levels));
    }
    if (family == "tabulated")
      return Kernel::tabulated(j.at("distances").get<std::vector<double>>(),
                               j.at("values").get<std::vector<double>>());
    throw KernelError("unknown kernel family '" + family + "'");
  } catch (const json::exception& e) {
    throw KernelError(std::string("malformed kernel spec: ") + e.what());
  }
}

inline Kernel kernel_from_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw KernelError(std::string("kernel spec is not valid JSON: ") + e.what());
  }
  return kernel_from_json(j);
}

inline Mode parse_mode(const std::string& s) {
  if (s == "blurring") return Mode::Blurring;
  if (s == "nonblurring") return Mode::Nonblurring;
  throw ArgumentError("unknown mode '" + s + "'");
}

inline TraceLevel parse_trace_level(const std::string& s) {
  if (s == "none") return TraceLevel::None;
  if (s == "summary") return TraceLevel::Summary;
  if (s == "full") return TraceLevel::Full;
  throw ArgumentError("unknown trace level '" + s + "'");
}

inline json to_json(const RunConfig& c) {
  return {{"mode", to_string(c.mode)},
          {"kernel", to_json(c.kernel)},
          {"stop_displacement", c.stop_displacement},
          {"max_iterations", c.max_iterations},
          {"trace_level", to_string(c.trace_level)}};
}

inline RunConfig run_config_from_json(const json& j) {
  try {
    RunConfig c;
    c.mode = parse_mode(j.at("mode").get<std::string>());
    c.kernel = kernel_from_json(j.at("kernel"));
    c.stop_displacement = j.at("stop_displacement").get<double>();
    c.max_iterations = j.at("max_iterations").get<int>();
    c.trace_level = parse_trace_level(j.value("trace_level", std::string("summary")));
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedInput, std::string("malformed run config: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Cluster results

inline json rows_json(const PointSet& pts) {
  json rows = json::array();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto p = pts.point(i);
    rows.push_back(std::vector<double>(p.begin(), p.end()));
  }
  return rows;
}

/// `extra` is merged into the echoed config (input path, merge tolerance).
inline json result_to_json(const RunResult& run, const ClusterResult& clusters,
                           const RunConfig& config, const json& extra = json::object()) {
  json cfg = to_json(config);
  for (const auto& [k, v] : extra.items()) cfg[k] = v;
  return {{"final_positions", rows_json(run.final)},
          {"weights", run.final.weights()},
          {"labels", clusters.labels},
          {"centers", clusters.centers},
          {"sizes", clusters.sizes},
          {"iterations_used", run.iterations_used},
          {"converged", run.converged},
          {"config", cfg}};
}

struct ResultFile {
  std::vector<int> labels;
  RunConfig config;
  json raw;
};

inline ResultFile read_result_json(const std::string& path) {
  auto in = detail::open_input(path);
  ResultFile r;
  try {
    r.raw = json::parse(in);
    r.labels = r.raw.at("labels").get<std::vector<int>>();
    r.config = run_config_from_json(r.raw.at("config"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedInput, "malformed result file '" + path + "': " + e.what());
  }
  return r;
}

inline ClusterResult clusters_from_labels(const std::vector<int>& labels) {
  ClusterResult c;
  c.labels = labels;
  for (int l : labels) {
    if (l < 0) throw Error(ErrorCode::MalformedInput, "cluster labels must be >= 0");
    if (static_cast<std::size_t>(l) >= c.sizes.size()) c.sizes.resize(static_cast<std::size_t>(l) + 1, 0);
    ++c.sizes[static_cast<std::size_t>(l)];
  }
  c.centers.resize(c.sizes.size());
  return c;
}

// ---------------------------------------------------------------------------
// Traces

/// iteration,max_displacement,radius,std_1..std_p
inline void write_trace_csv(std::ostream& out, const IterationTrace& trace) {
  out << "iteration,max_displacement,radius";
  for (std::size_t d = 0; d < trace.dim; ++d) out << ",std_" << d + 1;
  out << '\n';
  for (const auto& r : trace.records) {
    out << r.iteration << ',' << format_number(r.max_displacement) << ','
        << format_number(r.radius);
    for (double s : r.std) out << ',' << format_number(s);
    out << '\n';
  }
}

/// Long format: iteration,point,x_1..x_p,weight. Only full traces have rows.
inline void write_positions_csv(std::ostream& out, const IterationTrace& trace) {
  out << "iteration,point";
  for (std::size_t d = 0; d < trace.dim; ++d) out << ",x_" << d + 1;
  out << ",weight\n";
  for (const auto& r : trace.records) {
    if (!r.positions) continue;
    const PointSet& pts = *r.positions;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      out << r.iteration << ',' << i;
      for (std::size_t d = 0; d < pts.dim(); ++d) out << ',' << format_number(pts.coord(i, d));
      out << ',' << format_number(pts.weight(i)) << '\n';
    }
  }
}

inline IterationTrace read_trace_csv(std::istream& in) {
  const auto t = detail::read_table(in, "trace");
  if (t.header.empty()) throw Error(ErrorCode::MalformedInput, "trace: missing header row");
  const std::size_t it = detail::column(t, "iteration", "trace");
  const std::size_t md = detail::column(t, "max_displacement", "trace");
  const std::size_t rad = detail::column(t, "radius", "trace");
  std::vector<std::size_t> std_cols;
  for (std::size_t d = 1;; ++d) {
    const std::string name = "std_" + std::to_string(d);
    const auto found = std::find_if(t.header.begin(), t.header.end(),
                                    [&](const std::string& h) { return detail::lower(h) == name; });
    if (found == t.header.end()) break;
    std_cols.push_back(static_cast<std::size_t>(found - t.header.begin()));
  }
  if (std_cols.empty()) throw Error(ErrorCode::MalformedInput, "trace: no std_1 column");
  IterationTrace trace;
  trace.dim = std_cols.size();
  for (const auto& row : t.rows) {
    IterationRecord r;
    r.iteration = static_cast<int>(row[it]);
    r.max_displacement = row[md];
    r.radius = row[rad];
    for (std::size_t c : std_cols) r.std.push_back(row[c]);
    trace.records.push_back(std::move(r));
  }
  return trace;
}

/// Attaches positions from a long-format positions CSV to matching records.
inline void attach_positions(IterationTrace& trace, std::istream& in) {
  const auto t = detail::read_table(in, "positions");
  if (t.header.empty()) throw Error(ErrorCode::MalformedInput, "positions: missing header row");
  const std::size_t it = detail::column(t, "iteration", "positions");
  const std::size_t pt = detail::column(t, "point", "positions");
  const std::size_t wt = detail::column(t, "weight", "positions");
  std::vector<std::size_t> xs;
  for (std::size_t d = 1; d <= trace.dim; ++d) xs.push_back(detail::column(t, "x_" + std::to_string(d), "positions"));

  std::map<int, std::vector<const std::vector<double>*>> by_iter;
  for (const auto& row : t.rows) by_iter[static_cast<int>(row[it])].push_back(&row);
  for (auto& rec : trace.records) {
    const auto found = by_iter.find(rec.iteration);
    if (found == by_iter.end())
      throw Error(ErrorCode::MalformedInput,
                  "positions: no rows for iteration " + std::to_string(rec.iteration));
    auto rows = found->second;
    std::sort(rows.begin(), rows.end(), [pt](auto* a, auto* b) { return (*a)[pt] < (*b)[pt]; });
    std::vector<double> coords, weights;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (static_cast<std::size_t>((*rows[i])[pt]) != i)
        throw Error(ErrorCode::MalformedInput, "positions: point indices must be 0..N-1");
      for (std::size_t c : xs) coords.push_back((*rows[i])[c]);
      weights.push_back((*rows[i])[wt]);
    }
    rec.positions = PointSet(trace.dim, std::move(coords), std::move(weights));
  }
}

// ---------------------------------------------------------------------------
// Theory, counterexample, diagnostics

inline void write_theory_csv(std::ostream& out, const std::vector<double>& blurring,
                             const std::vector<double>& nonblurring) {
  out << "step,blurring_std,nonblurring_std\n";
  for (std::size_t s = 0; s < blurring.size(); ++s)
    out << s << ',' << format_number(blurring[s]) << ',' << format_number(nonblurring[s]) << '\n';
}

inline void write_counterexample_csv(std::ostream& out, const CounterexampleResult& cx) {
  out << "t,x1,x2,x3,w1,w2,w3\n";
  for (const auto& r : cx.rows)
    out << r.t << ',' << format_number(r.x1) << ',' << format_number(r.x2) << ','
        << format_number(r.x3) << ',' << format_number(r.w1) << ',' << format_number(r.w2)
        << ',' << format_number(r.w3) << '\n';
}

inline json optional_int(const std::optional<int>& v) { return v ? json(*v) : json(nullptr); }

inline json to_json(const HullTrace& h) {
  json j{{"dimension", h.dim}, {"nested", h.nested}, {"first_violation", optional_int(h.first_violation)}};
  if (h.dim == 1) {
    j["intervals"] = h.intervals;
  } else {
    j["vertex_counts"] = json::array();
    for (const auto& p : h.polygons) j["vertex_counts"].push_back(p.size());
  }
  return j;
}

inline json to_json(const RadiusTrace& r) {
  return {{"radii", r.radii}, {"nonincreasing", r.nonincreasing},
          {"first_increase", optional_int(r.first_increase)}};
}

inline json to_json(const DirectionalReport& d) {
  return {{"directions", d.directions}, {"contained", d.contained},
          {"first_violation", optional_int(d.first_violation)}};
}

inline json to_json(const InfluenceReport& r) {
  return {{"vacuous", r.vacuous}, {"per_iteration", r.per_iteration}, {"final_max", r.final_max}};
}

// ---------------------------------------------------------------------------
// Experiments

inline json to_json(const SummaryStat& s) {
  return {{"mean", s.mean}, {"std", s.std}, {"count", s.count}};
}

inline json to_json(const MixtureSpec& m) {
  json comps = json::array();
  for (const auto& c : m.components)
    comps.push_back({{"label", c.label}, {"proportion", c.proportion}, {"mean", c.mean}, {"sd", c.sd}});
  return {{"components", comps}};
}

inline json to_json(const ExperimentConfig& c) {
  json j{{"experiment", to_string(c.kind)},
         {"n_points", c.n_points},
         {"tau", c.tau},
         {"replications", c.replications},
         {"seed", c.seed},
         {"kernel", to_json(c.kernel())},
         {"stop_displacement", c.stop_displacement},
         {"max_iterations", c.max_iterations},
         {"merge_tolerance", c.merge_tolerance},
         {"truncation", c.pure_gaussian ? json(nullptr) : json(c.truncation)},
         {"pure_gaussian", c.pure_gaussian},
         {"on_nonconvergence", c.on_nonconvergence == NonconvergencePolicy::Exclude ? "exclude" : "abort"},
         {"workers", c.workers}};
  j["mixture"] = c.mixture ? to_json(*c.mixture) : json(nullptr);
  if (c.kind == ExperimentKind::Consistency) j["sample_sizes"] = c.consistency_sizes;
  return j;
}

inline json to_json(const TableRow& row) {
  return {{"config", to_json(row.config)},
          {"seed", row.config.seed},
          {"sample_mean", to_json(row.sample_mean)},
          {"blurring", to_json(row.blurring)},
          {"nonblurring", to_json(row.nonblurring)},
          {"excluded", {{"blurring", row.excluded_blurring}, {"nonblurring", row.excluded_nonblurring}}}};
}

inline json series_json(const std::vector<SeriesPoint>& s) {
  json a = json::array();
  for (const auto& p : s)
    a.push_back({{"iteration", p.iteration}, {"mean", p.mean}, {"std", p.std},
                 {"log10_std", std::isfinite(p.log10_std) ? json(p.log10_std) : json(nullptr)}});
  return a;
}

inline json to_json(const ConvergenceSeries& s) {
  return {{"config", to_json(s.config)},
          {"seed", s.config.seed},
          {"blurring", {{"converged", s.blurring_converged}, {"series", series_json(s.blurring)}}},
          {"nonblurring", {{"converged", s.nonblurring_converged}, {"series", series_json(s.nonblurring)}}}};
}

inline json to_json(const ConsistencyReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"n", row.n}, {"blurring", to_json(row.blurring)}, {"excluded", row.excluded}});
  return {{"config", to_json(r.config)}, {"seed", r.config.seed}, {"rows", rows}};
}

/// statistic,replication,value
inline void write_long_csv(std::ostream& out, const TableRow& row) {
  out << "statistic,replication,value\n";
  for (const auto& r : row.replications) out << "sample_mean," << r.index << ',' << format_number(r.sample_mean) << '\n';
  for (const auto& r : row.replications) out << "blurring," << r.index << ',' << format_number(r.blurring) << '\n';
  for (const auto& r : row.replications) out << "nonblurring," << r.index << ',' << format_number(r.nonblurring) << '\n';
}

/// mode,iteration,mean,std,log10_std
inline void write_long_csv(std::ostream& out, const ConvergenceSeries& s) {
  out << "mode,iteration,mean,std,log10_std\n";
  auto emit = [&out](const char* mode, const std::vector<SeriesPoint>& pts) {
    for (const auto& p : pts)
      out << mode << ',' << p.iteration << ',' << format_number(p.mean) << ','
          << format_number(p.std) << ',' << format_number(p.log10_std) << '\n';
  };
  emit("blurring", s.blurring);
  emit("nonblurring", s.nonblurring);
}

/// n,statistic,mean,std,count,excluded
inline void write_long_csv(std::ostream& out, const ConsistencyReport& r) {
  out << "n,statistic,mean,std,count,excluded\n";
  for (const auto& row : r.rows)
    out << row.n << ",blurring," << format_number(row.blurring.mean) << ','
        << format_number(row.blurring.std) << ',' << row.blurring.count << ',' << row.excluded << '\n';
}

/// Machine-readable error report for stderr.
inline json error_json(const Error& e) {
  return {{"error", std::string(to_string(e.code()))}, {"code", static_cast<int>(e.code())}, {"message", e.what()}};
}

}  // namespace bms::io

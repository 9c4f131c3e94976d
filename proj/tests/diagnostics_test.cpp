#include "bms/diagnostics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace {

using bms::Kernel;
using bms::PointSet;
using bms::RunConfig;

RunConfig full_config(Kernel kernel, int iterations) {
  RunConfig c;
  c.kernel = std::move(kernel);
  c.max_iterations = iterations;
  c.trace_level = bms::TraceLevel::Full;
  return c;
}

TEST(ConvexHull, SquareWithInteriorAndCollinearPoints) {
  const auto hull = bms::convex_hull(
      {{0, 0}, {1, 0}, {0.5, 0}, {1, 1}, {0, 1}, {0.5, 0.5}, {1, 0.5}, {0, 0}});
  ASSERT_EQ(hull.size(), 4u);
  EXPECT_EQ(hull[0], (bms::Vertex2{0, 0}));
  EXPECT_EQ(hull[1], (bms::Vertex2{1, 0}));
  EXPECT_EQ(hull[2], (bms::Vertex2{1, 1}));
  EXPECT_EQ(hull[3], (bms::Vertex2{0, 1}));
}

TEST(ConvexHull, DegenerateInputs) {
  EXPECT_EQ(bms::convex_hull({{2, 3}, {2, 3}}).size(), 1u);
  const auto seg = bms::convex_hull({{0, 0}, {1, 1}, {2, 2}, {0.5, 0.5}});
  ASSERT_EQ(seg.size(), 2u);
  EXPECT_EQ(seg[0], (bms::Vertex2{0, 0}));
  EXPECT_EQ(seg[1], (bms::Vertex2{2, 2}));
}

TEST(HullTrace, OneDimensionalIntervalsShrinkTowardZero) {
  const auto res = bms::run(PointSet::line({-1, 0, 1}), full_config(Kernel::gaussian(1), 5));
  const auto hulls = bms::hull_trace(res.trace);
  ASSERT_EQ(hulls.intervals.size(), 6u);
  EXPECT_TRUE(hulls.nested);
  for (std::size_t k = 1; k < hulls.intervals.size(); ++k) {
    EXPECT_GT(hulls.intervals[k][0], hulls.intervals[k - 1][0]);
    EXPECT_LT(hulls.intervals[k][1], hulls.intervals[k - 1][1]);
    EXPECT_NEAR(hulls.intervals[k][0], -hulls.intervals[k][1], 1e-15);
  }
}

TEST(HullTrace, SinglePointIsTriviallyNested) {
  const auto res = bms::run(PointSet(2, {0.3, -0.2}), full_config(Kernel::gaussian(1), 3));
  const auto hulls = bms::hull_trace(res.trace);
  EXPECT_TRUE(hulls.nested);
  for (const auto& poly : hulls.polygons) EXPECT_EQ(poly.size(), 1u);
}

TEST(HullTrace, UnitSquareCornersStayInsidePredecessor) {
  const PointSet square(2, {0, 0, 1, 0, 1, 1, 0, 1});
  auto cfg = full_config(Kernel::gaussian(1), 3);
  cfg.stop_displacement = 1e-300;
  const auto res = bms::run(square, cfg);
  const auto hulls = bms::hull_trace(res.trace);
  ASSERT_EQ(hulls.polygons.size(), 4u);
  EXPECT_TRUE(hulls.nested);
  for (std::size_t k = 1; k < hulls.polygons.size(); ++k)
    for (const auto& v : hulls.polygons[k]) {
      EXPECT_GT(v[0], 0.0);
      EXPECT_LT(v[0], 1.0);
    }
}

TEST(HullTrace, DetectsEscapeAndRejectsHighDimension) {
  bms::IterationTrace trace;
  trace.dim = 2;
  for (double s : {1.0, 1.5}) {
    bms::IterationRecord r;
    r.iteration = static_cast<int>(trace.records.size());
    r.positions = PointSet(2, {0, 0, s, 0, 0, s});
    r.radius = bms::max_pairwise_distance(*r.positions);
    trace.records.push_back(r);
  }
  const auto hulls = bms::hull_trace(trace);
  EXPECT_FALSE(hulls.nested);
  EXPECT_EQ(hulls.first_violation, 1);
  EXPECT_FALSE(bms::directional_containment(trace).contained);

  trace.dim = 3;
  EXPECT_THROW(bms::hull_trace(trace), bms::UnsupportedDimensionError);

  bms::IterationTrace summary;
  summary.dim = 1;
  summary.records.resize(2);
  EXPECT_THROW(bms::hull_trace(summary), bms::ArgumentError);
}

TEST(HullTrace, RandomFixedWeightRunsAreNested) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0), wd(0.2, 3.0), td(0.3, 2.0);
  std::uniform_int_distribution<int> nd(1, 50);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t p = 1 + trial % 2;
    const int n = nd(rng);
    std::vector<double> x(n * p), w(n);
    for (double& c : x) c = u(rng);
    for (double& v : w) v = wd(rng);
    const Kernel k = trial % 3 == 0 ? Kernel::truncated_flat({{0, 1}, {0.8, 0.6}, {1.6, 0.3}})
                                    : Kernel::gaussian(td(rng), trial % 3 == 1 ? 2.5 : bms::kInfinity);
    const auto res = bms::run(PointSet(p, x, w), full_config(k, 15));
    const auto hulls = bms::hull_trace(res.trace);
    EXPECT_TRUE(hulls.nested) << "trial " << trial;
    EXPECT_EQ(bms::directional_containment(res.trace).contained, hulls.nested);
    EXPECT_TRUE(bms::radius_trace(res.trace).nonincreasing);
  }
}

TEST(RadiusTrace, FromPositionsAndFromRecords) {
  const auto full = bms::run(PointSet::line({0, 0.4, 2, 2.3}), full_config(Kernel::gaussian(0.7), 20));
  const auto r = bms::radius_trace(full.trace);
  ASSERT_EQ(r.radii.size(), full.trace.records.size());
  EXPECT_TRUE(r.nonincreasing);
  EXPECT_DOUBLE_EQ(r.radii.front(), 2.3);

  auto summary_cfg = full_config(Kernel::gaussian(0.7), 20);
  summary_cfg.trace_level = bms::TraceLevel::Summary;
  const auto summary = bms::run(PointSet::line({0, 0.4, 2, 2.3}), summary_cfg);
  EXPECT_EQ(bms::radius_trace(summary.trace).radii, r.radii);
}

TEST(RadiusTrace, CoincidentPointsStayAtZero) {
  const auto res = bms::run(PointSet::line({1.5, 1.5, 1.5}), full_config(Kernel::gaussian(1), 4));
  for (double v : bms::radius_trace(res.trace).radii) EXPECT_EQ(v, 0.0);
}

TEST(InfluenceDecay, SeparatedBlobsUnderTruncatedKernel) {
  const PointSet pts = PointSet::line({-3.2, -3.0, -2.7, 2.8, 3.0, 3.1});
  const Kernel k = Kernel::truncated_flat({{0, 1}, {1, 0.5}});
  const auto res = bms::run(pts, full_config(k, 100));
  ASSERT_TRUE(res.converged);
  const auto clusters = bms::extract_clusters(res, 1e-6);
  ASSERT_EQ(clusters.count(), 2u);
  const auto report = bms::influence_decay(res.trace, k, clusters);
  EXPECT_FALSE(report.vacuous);
  ASSERT_EQ(report.per_iteration.size(), res.trace.records.size());
  for (double v : report.per_iteration) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(report.final_max, 0.0);
}

TEST(InfluenceDecay, SingleGaussianClusterIsVacuous) {
  const auto res = bms::run(PointSet::line({-1, 0.2, 1.4}), full_config(Kernel::gaussian(1), 200));
  const auto clusters = bms::extract_clusters(res, 1e-6);
  ASSERT_EQ(clusters.count(), 1u);
  const auto report = bms::influence_decay(res.trace, Kernel::gaussian(1), clusters);
  EXPECT_TRUE(report.vacuous);
  EXPECT_TRUE(report.per_iteration.empty());
}

TEST(InfluenceDecay, GaussianSupportCutDecaysToZero) {
  // Inner points start 2.4 apart, inside the 2.5 cut; contraction severs them.
  const PointSet pts = PointSet::line({-2.6, -2, -1.2, 1.2, 2, 2.6});
  const Kernel k = Kernel::gaussian(0.8, 2.5);
  const auto res = bms::run(pts, full_config(k, 300));
  const auto clusters = bms::extract_clusters(res, 1e-6);
  ASSERT_EQ(clusters.count(), 2u);
  const auto report = bms::influence_decay(res.trace, k, clusters);
  EXPECT_GT(report.per_iteration.front(), 0.0);
  EXPECT_EQ(report.final_max, 0.0);
}

TEST(Counterexample, AlternatesForFiftySteps) {
  const auto cx = bms::run_counterexample({0.1, 0.1, 0.1}, 50);
  ASSERT_EQ(cx.rows.size(), 51u);
  EXPECT_TRUE(cx.alternates);
  EXPECT_GE(cx.min_offset, bms::kCounterexampleMinOffset);
  EXPECT_GT(cx.min_step, 1e-10);
  for (const auto& row : cx.rows) {
    if (row.t % 2 == 0) EXPECT_GT(row.x1, 0.0);
    else EXPECT_LT(row.x1, 0.0);
    EXPECT_GT(row.x2, 0.5);
    EXPECT_LT(row.x3, -0.5);
    EXPECT_LT(row.x2 - row.x1, 1.0 + 1e-15);
    EXPECT_LT(row.x1 - row.x3, 1.0 + 1e-15);
    EXPECT_EQ(row.w1, 1.0);
  }
}

TEST(Counterexample, OuterPointsSettle) {
  const double d2 = 0.05, d3 = 0.05;
  const auto cx = bms::run_counterexample({0.2, d2, d3}, 50);
  EXPECT_TRUE(cx.alternates);
  // Per-step drift is summable, so x2 and x3 are Cauchy sequences.
  for (std::size_t t = 1; t < cx.rows.size(); ++t) {
    const double cap = 0.5 / ((t + 1.0) * (t + 1.0));
    EXPECT_LE(cx.rows[t - 1].x2 - cx.rows[t].x2, d2 * cap);
    EXPECT_LE(cx.rows[t].x3 - cx.rows[t - 1].x3, d3 * cap);
  }
  const auto& last = cx.rows.back();
  EXPECT_GT(last.x2, 0.5 + d2 * 2.0 / 3.0);
  EXPECT_LT(last.x3, -0.5 - d3 * 2.0 / 3.0);
}

TEST(Counterexample, RadiusIsNotForcedDown) {
  const auto cx = bms::run_counterexample({0.1, 0.1, 0.1}, 20);
  // x1 keeps moving while the hull barely changes: the stop rule never fires.
  for (std::size_t t = 1; t < cx.run.trace.records.size(); ++t)
    EXPECT_GT(cx.run.trace.records[t].max_displacement, 0.09);
}

TEST(Counterexample, FrozenWeightsConverge) {
  // Frozen, the outer points creep toward x1 at a rate ~1/w until they see
  // each other, then all three merge.
  const auto cx = bms::run_counterexample({0.1, 0.1, 0.1}, 50);
  RunConfig cfg;
  cfg.max_iterations = 1'000'000;
  cfg.trace_level = bms::TraceLevel::None;
  for (const auto& r : cx.rows) {
    const auto frozen = bms::run_frozen_counterexample({0.1, 0.1, 0.1}, {r.w1, r.w2, r.w3}, cfg);
    EXPECT_TRUE(frozen.converged) << "snapshot " << r.t;
    EXPECT_EQ(bms::extract_clusters(frozen, 1e-6).count(), 1u) << "snapshot " << r.t;
  }
}

TEST(Counterexample, RejectsBadInputs) {
  EXPECT_THROW(bms::run_counterexample({0.3, 0.1, 0.1}, 5), bms::ArgumentError);
  EXPECT_THROW(bms::run_counterexample({0.1, 0.0, 0.1}, 5), bms::ArgumentError);
  EXPECT_THROW(bms::run_counterexample({0.1, 0.1, 0.1}, 0), bms::ArgumentError);
}

TEST(Counterexample, BreakdownCarriesIteration) {
  // Nothing fits once the required offset exceeds the room left beside x2.
  try {
    bms::run_counterexample({0.1, 0.2, 0.1}, 5, 0.32);
    FAIL() << "expected breakdown";
  } catch (const bms::CounterexampleBreakdown& e) {
    EXPECT_GE(e.iteration(), 0);
    EXPECT_EQ(e.code(), bms::ErrorCode::CounterexampleBreakdown);
  }
}

TEST(AdaptiveRun, RejectsBadSchedules) {
  const PointSet pts = PointSet::line({0, 1});
  EXPECT_THROW(bms::run_adaptive(pts, Kernel::gaussian(1),
                                 [](int, const PointSet&) { return std::vector<double>{1}; }, 2),
               bms::Error);
  EXPECT_THROW(bms::run_adaptive(pts, Kernel::gaussian(1),
                                 [](int, const PointSet&) { return std::vector<double>{1, -1}; }, 2),
               bms::ArgumentError);
}

}  // namespace

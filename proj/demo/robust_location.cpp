// Location of a contaminated sample: sample mean vs the blurring majority
// mode, across a few bandwidths.
//
//   bms_demo [seed]

#include <cstdio>
#include <cstdlib>

#include "bms/experiments.hpp"

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : bms::kDefaultSeed;
  auto rng = bms::substream(seed, 0);
  const auto sample = bms::sample_mixture(bms::contaminated_normal(), 100, rng);

  double mean = 0.0;
  for (double x : sample.points.coords()) mean += x;
  mean /= static_cast<double>(sample.points.size());
  std::printf("100 points, 5 drawn around 5.0\nsample mean      %8.4f\n", mean);

  for (double tau : {0.5, 1.0, 2.0}) {
    bms::RunConfig cfg;
    cfg.kernel = bms::Kernel::gaussian(tau, 3.0 * tau);
    cfg.trace_level = bms::TraceLevel::None;
    const auto result = bms::run(sample.points, cfg);
    const auto clusters = bms::extract_clusters(result, 1e-6);
    std::printf("tau = %.1f  mode %8.4f  clusters %zu  sizes", tau,
                bms::majority_mode(clusters)[0], clusters.count());
    for (std::size_t s : clusters.sizes) std::printf(" %zu", s);
    std::printf("  iterations %d\n", result.iterations_used);
  }
}

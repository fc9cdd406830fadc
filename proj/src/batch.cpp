#include "ncsmpc/batch.hpp"

#include <numeric>

namespace ncsmpc {
namespace {

BatchItem run_one(const Scenario& scenario, std::uint64_t seed) {
  BatchItem item;
  item.seed = seed;
  try {
    const RunTrace trace = scenario.run(seed);
    item.report = scenario.audit(trace);
    item.summary = scenario.summarize(trace, item.report);
  } catch (const std::exception& e) {
    item.error = e.what();
  }
  return item;
}

}  // namespace

std::vector<BatchItem> run_batch(const Scenario& scenario, const std::vector<std::uint64_t>& seeds) {
  std::vector<BatchItem> out(seeds.size());
  const auto count = static_cast<long>(seeds.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < count; ++i) {
    out[static_cast<std::size_t>(i)] = run_one(scenario, seeds[static_cast<std::size_t>(i)]);
  }
  return out;
}

std::vector<BatchItem> run_batch_serial(const Scenario& scenario,
                                        const std::vector<std::uint64_t>& seeds) {
  std::vector<BatchItem> out;
  out.reserve(seeds.size());
  for (std::uint64_t s : seeds) out.push_back(run_one(scenario, s));
  return out;
}

std::vector<std::uint64_t> seed_range(std::uint64_t first, std::size_t count) {
  std::vector<std::uint64_t> seeds(count);
  std::iota(seeds.begin(), seeds.end(), first);
  return seeds;
}

}  // namespace ncsmpc

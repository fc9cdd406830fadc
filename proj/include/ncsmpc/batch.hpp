#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ncsmpc/scenario.hpp"

namespace ncsmpc {

struct BatchItem {
  std::uint64_t seed = 0;
  RunSummary summary;
  AuditReport report;
  std::string error;  // exception text if the run itself threw
};

/// Runs and audits one scenario per seed, in parallel with OpenMP. Results
/// are in seed order and identical to run_batch_serial.
std::vector<BatchItem> run_batch(const Scenario& scenario, const std::vector<std::uint64_t>& seeds);
std::vector<BatchItem> run_batch_serial(const Scenario& scenario,
                                        const std::vector<std::uint64_t>& seeds);

std::vector<std::uint64_t> seed_range(std::uint64_t first, std::size_t count);

}  // namespace ncsmpc

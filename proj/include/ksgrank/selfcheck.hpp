#pragma once

#include "ksgrank/kg.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace ksgrank::selfcheck {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

// Literal line-by-line simulation of the partition algorithm, written
// independently of the production path (relaxation-based distances,
// direct parent scan). Membership labeling.
struct RefSubKsg {
  EntityId anchor = -1;
  std::vector<EntityId> nodes;
  int label = 0;
};

std::vector<RefSubKsg> reference_partition(std::size_t n_nodes,
                                           const std::vector<std::pair<EntityId, EntityId>>& edges,
                                           EntityId root, const std::vector<EntityId>& answers);

CheckResult check_partition_oracle();
CheckResult check_fig1(const std::filesystem::path& fig1_dir);
CheckResult check_gradients();
CheckResult check_overfit();
CheckResult check_metric_oracles();
CheckResult check_dimension_contracts();
CheckResult check_end_to_end(const std::filesystem::path& synth_config,
                             const std::filesystem::path& scratch);
CheckResult check_determinism(const std::filesystem::path& synth_config,
                              const std::filesystem::path& scratch);

// quick = skip the two pipeline-level checks
std::vector<CheckResult> run_all(const std::filesystem::path& repo_root,
                                 const std::filesystem::path& scratch, bool quick = false);

}  // namespace ksgrank::selfcheck

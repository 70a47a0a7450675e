#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace faro {

struct TwinCost {
  double level = 0.0;
  double cost = 0.0;
};

/// Cost of one instance and of each of its counterfactual twins (the twin at the
/// instance's own level may be included; its gap is zero).
struct InstanceRecord {
  std::size_t instance = 0;
  double level = 0.0;
  double cost = 0.0;
  std::vector<TwinCost> twins;
  bool unfair_area = false;
  bool infeasible = false;
};

using CostTable = std::vector<InstanceRecord>;

struct ExclusionCounts {
  std::size_t unfair_area = 0;
  std::size_t infeasible = 0;
};

ExclusionCounts count_excluded(const CostTable& table);

/// max over included instances and twins of |r(v) - r(v''_a)|. Throws
/// std::invalid_argument when an included record has no twin costs.
double sigma_ind(const CostTable& table);

/// sigma_ind divided by the mean cost of the included instances. Throws
/// std::domain_error when that mean is zero. An empty table yields 0.
double sigma_relative(const CostTable& table);

struct RatioEntry {
  std::size_t instance = 0;
  double twin_level = 0.0;
  double ratio = 0.0;
};

struct RatioDistribution {
  std::vector<RatioEntry> ratios;
  std::size_t skipped_zero_twin = 0;
};

/// r(v) / r(v''_a) for every twin at a different level.
RatioDistribution cost_ratio_distribution(const CostTable& table);

}  // namespace faro

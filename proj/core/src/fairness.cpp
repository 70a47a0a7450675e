#include "faro/fairness.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace faro {

namespace {

bool included(const InstanceRecord& r) { return !r.unfair_area && !r.infeasible; }

}  // namespace

ExclusionCounts count_excluded(const CostTable& table) {
  ExclusionCounts out;
  for (const auto& r : table) {
    if (r.unfair_area) ++out.unfair_area;
    else if (r.infeasible) ++out.infeasible;
  }
  return out;
}

double sigma_ind(const CostTable& table) {
  double worst = 0.0;
  for (const auto& r : table) {
    if (!included(r)) continue;
    if (r.twins.empty()) {
      throw std::invalid_argument("instance " + std::to_string(r.instance) + " has no twin costs");
    }
    for (const auto& t : r.twins) worst = std::max(worst, std::abs(r.cost - t.cost));
  }
  return worst;
}

double sigma_relative(const CostTable& table) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& r : table) {
    if (!included(r)) continue;
    sum += r.cost;
    ++count;
  }
  if (count == 0) return 0.0;
  const double gap = sigma_ind(table);
  const double mean = sum / static_cast<double>(count);
  if (mean == 0.0) throw std::domain_error("mean recourse cost is zero");
  return gap / mean;
}

RatioDistribution cost_ratio_distribution(const CostTable& table) {
  RatioDistribution out;
  for (const auto& r : table) {
    if (!included(r)) continue;
    for (const auto& t : r.twins) {
      if (t.level == r.level) continue;
      if (t.cost == 0.0) {
        ++out.skipped_zero_twin;
        continue;
      }
      out.ratios.push_back({r.instance, t.level, r.cost / t.cost});
    }
  }
  return out;
}

}  // namespace faro

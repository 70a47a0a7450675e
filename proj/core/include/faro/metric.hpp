#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "faro/norm.hpp"
#include "faro/scm.hpp"

namespace faro {

/// d(x, y) = 1 if x != y, else 0.
struct DiscreteMetric {};
/// d == 0. Makes every level of a variable interchangeable.
struct ZeroPseudometric {};
/// |x - y| on integer levels.
struct AbsDiffMetric {};
/// Explicit symmetric distance table indexed by level position.
struct LevelTableMetric {
  std::vector<int> levels;
  std::vector<std::vector<double>> table;
};
/// L_q distance over a continuous block.
struct LqMetric {
  LpExponent q{2.0};
};

using Pseudometric =
    std::variant<DiscreteMetric, ZeroPseudometric, AbsDiffMetric, LevelTableMetric, LqMetric>;

/// Distance between two coordinate blocks of equal length. The categorical
/// metrics read the first entry only.
double block_distance(const Pseudometric& m, std::span<const double> x, std::span<const double> y);
std::string metric_name(const Pseudometric& m);

struct MetricBlock {
  std::vector<std::size_t> indices;
  Pseudometric metric;
};

/// N(d_1(v_B1, w_B1), ..., d_k(v_Bk, w_Bk)) with N an L_q norm. Coordinates outside
/// every block do not contribute.
class ProductMetric {
 public:
  ProductMetric() = default;
  ProductMetric(std::vector<MetricBlock> blocks, LpExponent combine);

  [[nodiscard]] double distance(std::span<const double> v, std::span<const double> w) const;
  [[nodiscard]] const std::vector<MetricBlock>& blocks() const { return blocks_; }
  [[nodiscard]] LpExponent combine() const { return combine_; }
  /// Block holding coordinate i, if any.
  [[nodiscard]] const MetricBlock* block_of(std::size_t i) const;

 private:
  std::vector<MetricBlock> blocks_;
  LpExponent combine_{2.0};
};

/// Perturbation ball of radius Delta under a product metric, with I the
/// categorical coordinates that may be re-set and J the continuous coordinates
/// that may be shifted.
struct PerturbationSpec {
  ProductMetric metric;
  double radius = 0.0;
  std::vector<std::size_t> categorical;
  std::vector<std::size_t> continuous;

  void validate(const Scm& scm) const;
};

enum class ProtectedMetricKind { zero, discrete };

/// Product metric with one block per categorical variable (protected variable
/// gets `protected_kind`, others the discrete metric) and one L_q block over the
/// perturbed continuous variables, combined by `combine`.
/// `continuous` defaults to every continuous variable.
PerturbationSpec make_perturbation(const Scm& scm, ProtectedMetricKind protected_kind,
                                   double radius, LpExponent q, LpExponent combine,
                                   std::optional<std::vector<std::size_t>> continuous = {});
/// Continuous-only ball (protected level fixed), the additive perturbation used for
/// plain adversarial robustness.
PerturbationSpec make_additive_perturbation(const Scm& scm, double radius, LpExponent q,
                                            std::optional<std::vector<std::size_t>> continuous = {});

double distance(const ProductMetric& m, std::span<const double> v, std::span<const double> w);
bool ball_contains(const PerturbationSpec& spec, std::span<const double> center,
                   std::span<const double> candidate);

/// Categorical part of the metric between a level tuple (aligned with spec.categorical)
/// and the categorical coordinates of v.
double categorical_distance(const PerturbationSpec& spec, std::span<const double> theta,
                            std::span<const double> v);

/// All level tuples theta with d_cat(theta, v_I) <= Delta, lexicographic in level order.
std::vector<std::vector<double>> levels_in_ball(const Scm& scm, const PerturbationSpec& spec,
                                                std::span<const double> v);

/// Largest continuous radius r with N(d_cat, r) <= Delta. Throws InvalidLevel when
/// theta lies outside the ball.
double residual_radius(const PerturbationSpec& spec, std::span<const double> theta,
                       std::span<const double> v);
double residual_radius(double radius, double categorical_dist, LpExponent combine);

enum class ProtectionVerdict { protected_feature, partially_protected, unprotected };

struct ProtectedSpec {
  std::size_t index = 0;
  ProtectionVerdict verdict = ProtectionVerdict::unprotected;
};

ProtectionVerdict classify_protection(const std::vector<int>& levels, const Pseudometric& metric);
ProtectedSpec classify_protection(const Scm& scm, std::size_t index, const ProductMetric& metric);
std::string to_string(ProtectionVerdict v);

/// One element of a counterfactual perturbation: the categorical levels theta
/// (aligned with spec.categorical) and the continuous shift delta (aligned with
/// spec.continuous).
struct PerturbationDraw {
  std::vector<double> theta;
  std::vector<double> delta;
};

/// Draws via the level/residual decomposition: one zero-shift centre per level
/// tuple, then round-robin over level tuples with positive residual radius, the
/// first n/4 on the ball boundary and the rest uniform inside it. Deterministic in
/// `rng` and in v's categorical coordinates.
std::vector<PerturbationDraw> draw_perturbations(const Scm& scm, const PerturbationSpec& spec,
                                                 std::span<const double> v,
                                                 std::size_t n_samples, std::mt19937_64& rng);

/// Middle intervention for one draw.
MiddleIntervention to_intervention(const PerturbationSpec& spec, const PerturbationDraw& d);

std::vector<Instance> sample_counterfactual_perturbation(const Scm& scm,
                                                         std::span<const double> v,
                                                         const PerturbationSpec& spec,
                                                         std::size_t n_samples,
                                                         std::uint64_t seed);

/// Two-sided sampled containment: every point of each set has a point of the other
/// within `tolerance` in max-norm.
bool sampled_sets_match(const std::vector<Instance>& a, const std::vector<Instance>& b,
                        double tolerance = 1e-6);

struct DecompositionResult {
  bool holds = false;
  std::vector<Instance> direct;
  std::vector<Instance> via_twins;
};

/// Compares the counterfactual perturbation of v (middle interventions on the
/// factual model) with the union of additive perturbations of each twin computed
/// in the model where the protected variable is fixed to the twin's level.
DecompositionResult decomposition_check(const Scm& scm, std::span<const double> v,
                                        const PerturbationSpec& spec, std::size_t n_samples,
                                        std::uint64_t seed);

}  // namespace faro

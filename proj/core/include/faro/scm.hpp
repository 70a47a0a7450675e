#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace faro {

/// Endogenous values in variable order. Categorical coordinates hold one of the
/// declared integer levels stored as a double.
using Instance = std::vector<double>;
/// Exogenous values in variable order.
using Noise = std::vector<double>;

/// Absolute tolerance for every "equals" contract between exact computations.
inline constexpr double kEqualityTolerance = 1e-9;

enum class VariableKind { categorical, continuous };

struct VariableSpec {
  std::string name;
  VariableKind kind = VariableKind::continuous;
  std::vector<int> levels;  // categorical only, strictly increasing
  bool actionable = false;
  bool is_protected = false;

  static VariableSpec continuous(std::string name, bool actionable);
  static VariableSpec categorical(std::string name, std::vector<int> levels,
                                  bool actionable, bool is_protected);

  [[nodiscard]] bool is_categorical() const { return kind == VariableKind::categorical; }
  [[nodiscard]] bool has_level(double value) const;
};

struct NormalNoise {
  double mean = 0.0;
  double stddev = 1.0;
};
/// Draws 0 or 1; 1 with probability p.
struct BernoulliNoise {
  double p = 0.5;
};
struct GammaNoise {
  double shape = 1.0;
  double scale = 1.0;
};
struct ConstantNoise {
  double value = 0.0;
};
using NoiseDistribution = std::variant<NormalNoise, BernoulliNoise, GammaNoise, ConstantNoise>;

double draw(const NoiseDistribution& dist, std::mt19937_64& rng);

/// f_i as an affine function of the parent values (coefficients aligned with parents()).
struct LinearForm {
  std::vector<double> coefficients;
  double intercept = 0.0;
};

/// One structural assignment V_i := f_i(V_pa(i), U_i). Additive equations have the
/// form f_i(pa) + U_i; non-additive ones must supply an explicit inverse in U_i.
class StructuralEquation {
 public:
  using Mean = std::function<double(std::span<const double>)>;
  using Link = std::function<double(std::span<const double>, double)>;

  /// V_i := U_i
  static StructuralEquation exogenous();
  static StructuralEquation additive(std::vector<std::size_t> parents, Mean f);
  static StructuralEquation linear(std::vector<std::size_t> parents,
                                   std::vector<double> coefficients, double intercept = 0.0);
  static StructuralEquation invertible(std::vector<std::size_t> parents, Link forward,
                                       Link inverse);

  [[nodiscard]] const std::vector<std::size_t>& parents() const { return parents_; }
  [[nodiscard]] bool is_additive() const { return !forward_; }
  [[nodiscard]] const std::optional<LinearForm>& linear_form() const { return linear_; }
  [[nodiscard]] bool is_constant() const { return constant_.has_value(); }

  [[nodiscard]] double evaluate(std::span<const double> parent_values, double noise) const;
  /// Recovers U_i from the parent values and V_i.
  [[nodiscard]] double invert(std::span<const double> parent_values, double value) const;

  /// V_i := theta, parents severed.
  [[nodiscard]] static StructuralEquation constant(double theta);
  /// V_i := f_i(pa, U_i) + delta, edges preserved.
  [[nodiscard]] StructuralEquation shifted(double delta) const;

 private:
  std::vector<std::size_t> parents_;
  Mean mean_;
  Link forward_;
  Link inverse_;
  std::optional<LinearForm> linear_;
  std::optional<double> constant_;
};

struct HardIntervention {
  std::vector<std::size_t> indices;
  std::vector<double> values;
};

struct AdditiveIntervention {
  std::vector<std::size_t> indices;
  std::vector<double> shifts;
};

/// Hard on categorical indices, additive on continuous indices.
struct MiddleIntervention {
  std::vector<std::size_t> categorical;
  std::vector<double> values;
  std::vector<std::size_t> continuous;
  std::vector<double> shifts;
};

using Intervention = std::variant<HardIntervention, AdditiveIntervention, MiddleIntervention>;

[[nodiscard]] bool is_empty(const Intervention& iv);
[[nodiscard]] std::string describe(const Intervention& iv);

class Scm;

/// Dense per-variable view of an intervention, validated against one model.
/// The brute-force solver mutates plans in place instead of rebuilding models.
class InterventionPlan {
 public:
  enum class Op : std::uint8_t { keep, set, shift };

  explicit InterventionPlan(std::size_t size);
  InterventionPlan(const Scm& scm, const Intervention& iv);

  void keep(std::size_t i);
  void set(std::size_t i, double value);
  void shift(std::size_t i, double delta);

  [[nodiscard]] Op op(std::size_t i) const { return ops_[i]; }
  [[nodiscard]] double value(std::size_t i) const { return values_[i]; }
  [[nodiscard]] std::size_t size() const { return ops_.size(); }

 private:
  std::vector<Op> ops_;
  std::vector<double> values_;
};

/// Acyclic, invertible structural causal model. Immutable after construction and
/// safe for concurrent reads.
class Scm {
 public:
  static constexpr std::size_t kMaxParents = 32;

  struct Draw {
    Instance values;
    Noise noise;
  };

  Scm(std::string name, std::vector<VariableSpec> variables,
      std::vector<StructuralEquation> equations, std::vector<NoiseDistribution> noise);

  [[nodiscard]] const std::string& name() const { return name_; }
  [[nodiscard]] std::size_t size() const { return variables_.size(); }
  [[nodiscard]] const std::vector<VariableSpec>& variables() const { return variables_; }
  [[nodiscard]] const VariableSpec& variable(std::size_t i) const { return variables_.at(i); }
  [[nodiscard]] const StructuralEquation& equation(std::size_t i) const { return equations_.at(i); }
  [[nodiscard]] const NoiseDistribution& noise(std::size_t i) const { return noise_.at(i); }
  [[nodiscard]] const std::vector<std::size_t>& topological_order() const { return order_; }
  [[nodiscard]] std::size_t index_of(const std::string& name) const;

  [[nodiscard]] std::vector<std::size_t> categorical_indices() const;
  [[nodiscard]] std::vector<std::size_t> continuous_indices() const;
  [[nodiscard]] std::vector<std::size_t> actionable_indices() const;
  /// The single protected variable, if one is declared.
  [[nodiscard]] std::optional<std::size_t> protected_index() const;
  [[nodiscard]] bool is_additive() const;
  [[nodiscard]] bool is_linear() const;
  /// True when `ancestor` reaches `node` through directed edges.
  [[nodiscard]] bool is_ancestor(std::size_t ancestor, std::size_t node) const;

  /// Throws DimensionMismatch or InvalidLevel.
  void validate(std::span<const double> v) const;

  [[nodiscard]] Noise abduct(std::span<const double> v) const;
  [[nodiscard]] Instance generate(std::span<const double> u) const;
  [[nodiscard]] Instance generate(std::span<const double> u, const InterventionPlan& plan) const;
  /// Allocation-free variant of generate(u, plan); `out` must have size() entries.
  void generate_into(std::span<const double> u, const InterventionPlan& plan,
                     std::span<double> out) const;

  [[nodiscard]] Scm apply_intervention(const Intervention& iv) const;
  /// Abduction, action, prediction.
  [[nodiscard]] Instance counterfactual(std::span<const double> v, const Intervention& iv) const;
  /// One counterfactual per level of the protected variable, in level order.
  [[nodiscard]] std::vector<Instance> twins(std::span<const double> v,
                                            std::size_t protected_index) const;

  [[nodiscard]] std::vector<Draw> sample(std::size_t n, std::mt19937_64& rng) const;
  [[nodiscard]] std::vector<Draw> sample(std::size_t n, std::uint64_t seed) const;

 private:
  void check_dimension(std::span<const double> x, const char* what) const;

  std::string name_;
  std::vector<VariableSpec> variables_;
  std::vector<StructuralEquation> equations_;
  std::vector<NoiseDistribution> noise_;
  std::vector<std::size_t> order_;
};

}  // namespace faro

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "faro/classifier.hpp"
#include "faro/metric.hpp"
#include "faro/recourse.hpp"
#include "faro/scm.hpp"

namespace faro {

struct LpCost {
  LpExponent p{2.0};
};
/// sum alpha_i ||d||_{p_i}; the alphas must sum to 1.
struct WeightedLpCost {
  std::vector<WeightedTerm> terms;
};
using CostSpec = std::variant<LpCost, WeightedLpCost>;

/// Cost of moving from v to its counterfactual, given the displacement v - v^CF.
double cost_of(const CostSpec& cost, std::span<const double> displacement);
void validate(const CostSpec& cost);

enum class Validity { plain, robust, afrr, faro };
enum class SolverKind { closed_form, brute_force };
enum class SolveStatus { solved, infeasible_in_grid, undefined_unfair };

std::string to_string(Validity v);
std::string to_string(SolverKind s);
std::string to_string(SolveStatus s);

struct RecourseProblem {
  const Scm* scm = nullptr;
  ClassifierModel model;
  CostSpec cost = LpCost{};
  ActionKind kind = ActionKind::additive;
  std::vector<std::size_t> actionable;
  std::optional<std::size_t> protected_index;
  /// Unset for plain recourse. A continuous-only ball gives adversarially robust
  /// recourse; a ball over the protected level as well gives fair robust recourse.
  std::optional<PerturbationSpec> perturbation;
  Instance instance;
};

/// One decision of the action grid for a single variable.
struct AxisChoice {
  InterventionPlan::Op op = InterventionPlan::Op::keep;
  double value = 0.0;
};

struct ActionAxis {
  std::size_t index = 0;
  std::vector<AxisChoice> choices;
};

struct GridSpec {
  /// Points per continuous axis; forced odd so the zero shift is on the grid.
  std::size_t points = 201;
  /// Half-width of each continuous axis in units of `scale`.
  double sigmas = 5.0;
  /// Per-variable scale (training marginal standard deviation); 1 when empty.
  std::vector<double> scale;
  std::size_t perturbation_samples = 2000;
  std::uint64_t seed = 0;
  /// When no grid action is valid, retry with the range doubled up to this many times.
  std::size_t widen_attempts = 0;
  /// Overrides the generated axes when non-empty.
  std::vector<ActionAxis> axes;
};

struct RecourseSolution {
  SolveStatus status = SolveStatus::infeasible_in_grid;
  Intervention action = AdditiveIntervention{};
  Instance counterfactual;
  double cost = 0.0;
  Validity validity = Validity::plain;
  double delta = 0.0;
  SolverKind solver = SolverKind::brute_force;
  /// Grid spacing per axis, in axis order (empty for closed forms).
  std::vector<double> grid_step;
  std::size_t actions_checked = 0;
};

/// Axes implied by the problem: hard axes on categorical actionable variables,
/// additive or hard axes on continuous ones.
std::vector<ActionAxis> build_axes(const RecourseProblem& problem, const GridSpec& grid);

/// Exhaustive grid search. The cost of an action is the largest displacement it
/// causes over the instance and, for fair robust problems, every level tuple the
/// perturbation can reach, so all members of a twin orbit share one objective.
/// Feasibility is checked on the instance and on every sampled perturbation point.
RecourseSolution solve_bruteforce(const RecourseProblem& problem, const GridSpec& grid);

/// Closed-form solution for a linear model and linear classifier with additive or
/// hard actions on continuous variables and an Lp cost.
RecourseSolution solve_closed_form(const RecourseProblem& problem, const LinearScm& scm);

struct FaroResult {
  RecourseSolution solution;
  std::vector<double> deltas;
  std::vector<RecourseSolution> trajectory;
  bool converged = false;
  std::string message;
};

inline const std::vector<double> kDefaultFaroDeltas = {1.0, 0.5, 0.1, 0.01};

/// Solves the fair robust problem for each radius of a decreasing sequence and
/// returns the last solution. Convergence means the last two solutions differ by
/// less than max(1e-3, grid spacing) in cost and in max-norm action distance.
/// `problem.perturbation` supplies the metric; its radius is replaced.
FaroResult solve_faro(const RecourseProblem& problem, const GridSpec& grid,
                      const std::vector<double>& deltas = kDefaultFaroDeltas);

/// Dense per-variable action values (set value or shift; 0 for untouched).
std::vector<double> action_vector(const Scm& scm, const Intervention& iv);

}  // namespace faro

#pragma once

#include <Eigen/Dense>
#include <span>
#include <utility>
#include <vector>

#include "faro/classifier.hpp"
#include "faro/linear_scm.hpp"
#include "faro/norm.hpp"
#include "faro/scm.hpp"

namespace faro {

// Closed forms for a linear classifier h(v) = sign(w.v - b). `movable` lists the
// continuous coordinates an action may change; w_X is w restricted to them and
// every distance is measured in that subspace.

/// ||w_X||_{p*}
double weight_dual_norm(const LinearClassifier& h, std::span<const std::size_t> movable,
                        LpExponent p);

/// |w.v - b| / ||w_X||_{p*}. Throws NoRecourse when w_X = 0 and v is unfavorable.
double recourse_cost_immutable(const LinearClassifier& h, std::span<const double> v,
                               LpExponent p, std::span<const std::size_t> movable);

/// Minimum over levels a' of (|a - a'|^p + |w.v + w_a (a' - a) - b|^p / ||w_X||_{p*}^p)^(1/p).
double recourse_cost_mutable(const LinearClassifier& h, std::span<const double> v, LpExponent p,
                             std::span<const std::size_t> movable, std::size_t level_index,
                             const std::vector<int>& levels);

enum class ActionKind { hard, additive, middle };

struct LinearAction {
  /// Displacement of the landing point, zero outside `movable`.
  std::vector<double> eta;
  Intervention action;
  Instance landing;
  double cost = 0.0;
};

/// Cheapest displacement onto the hyperplane w.x = target_b:
/// eta_i = -r |w_i|^(p*-1) sign((w.v - b)/w_i) / ||w_X||_{p*}^(p*-1).
/// p = 1 moves only the largest |w_i| (lowest index on ties). `scm` is needed for
/// additive actions (delta = S^-1 eta).
LinearAction optimal_action_linear(const LinearClassifier& h, std::span<const double> v,
                                   LpExponent p, std::span<const std::size_t> movable,
                                   ActionKind kind, const LinearScm* scm = nullptr);

struct WeightedTerm {
  double alpha = 1.0;
  LpExponent p{2.0};
};

/// lower = sum alpha_i r_{p_i}(v); upper = r at the smallest p_i.
std::pair<double, double> weighted_cost_bounds(const LinearClassifier& h,
                                               std::span<const double> v,
                                               const std::vector<WeightedTerm>& terms,
                                               std::span<const std::size_t> movable);

/// w . S_{*,a}: how much a unit change of the protected root moves the score.
double protected_effect(const LinearClassifier& h, const LinearScm& scm,
                        std::size_t protected_index);

/// Twin decision values w.v'' - b for every level, in level order.
std::vector<double> twin_scores(const LinearClassifier& h, const LinearScm& scm,
                                std::span<const double> v, std::size_t protected_index);

/// Half-width of the band around the boundary in which some twin can sit on the
/// other side: max over level pairs |(a' - a) w.S_{*,a}| / ||w_X||_{p*}.
double unfair_band_halfwidth(const LinearClassifier& h, const LinearScm& scm, LpExponent p,
                             std::size_t protected_index, std::span<const std::size_t> movable);

/// True iff some twin of v receives a different label than v. Inside the band above,
/// only instances on the side toward which the twin shift points qualify.
bool unfair_area_contains(const LinearClassifier& h, const LinearScm& scm,
                          std::span<const double> v, std::size_t protected_index);

/// |w.S_{*,a}| <= 1e-12.
bool fair_recourse_possible(const LinearClassifier& h, const LinearScm& scm,
                            std::size_t protected_index);

/// Delta ||w^T S_{*,J}||_{p*} / ||w_X||_{p*}, the extra cost of robustness to an
/// additive perturbation of radius Delta on the coordinates J.
double robust_extra_cost(const LinearClassifier& h, const LinearScm& scm, LpExponent p,
                         double delta, std::span<const std::size_t> movable,
                         std::span<const std::size_t> perturbed);

double robust_recourse_cost(const LinearClassifier& h, const LinearScm& scm,
                            std::span<const double> v, LpExponent p, double delta,
                            std::span<const std::size_t> movable,
                            std::span<const std::size_t> perturbed);

/// max over levels a of (|w.v''_a - b| + Delta ||w^T S_J||_{p*}) / ||w_X||_{p*}.
/// Twin scores are taken relative to the lowest level so every member of a twin
/// orbit produces the same value. Throws UnfairInstance inside the unfair area.
double afrr_cost(const LinearClassifier& h, const LinearScm& scm, std::span<const double> v,
                 LpExponent p, double delta, std::size_t protected_index,
                 std::span<const std::size_t> movable, std::span<const std::size_t> perturbed);

/// (w, b + Delta ||w^T S||_{p*}) for a block S of perturbation directions.
LinearClassifier modified_classifier(const LinearClassifier& h, double delta,
                                     const Eigen::MatrixXd& directions, LpExponent p);

}  // namespace faro

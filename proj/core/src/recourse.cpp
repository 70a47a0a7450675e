#include "faro/recourse.hpp"

#include <algorithm>
#include <cmath>

#include "faro/errors.hpp"

namespace faro {

namespace {

std::vector<double> restrict(std::span<const double> x, std::span<const std::size_t> idx) {
  std::vector<double> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) {
    if (i >= x.size()) throw DimensionMismatch("coordinate index out of range");
    out.push_back(x[i]);
  }
  return out;
}

double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

/// w^T S_{*,J}
std::vector<double> score_response(const LinearClassifier& h, const LinearScm& scm,
                                   std::span<const std::size_t> perturbed) {
  if (h.w.size() != scm.size()) throw DimensionMismatch("classifier and model sizes differ");
  const Eigen::VectorXd w = to_vector(h.w);
  std::vector<double> out;
  out.reserve(perturbed.size());
  for (std::size_t j : perturbed) out.push_back(w.dot(scm.column(j)));
  return out;
}

}  // namespace

double weight_dual_norm(const LinearClassifier& h, std::span<const std::size_t> movable,
                        LpExponent p) {
  return lp_norm(restrict(h.w, movable), p.conjugate());
}

double recourse_cost_immutable(const LinearClassifier& h, std::span<const double> v,
                               LpExponent p, std::span<const std::size_t> movable) {
  const double s = h.decision(v);
  const double denom = weight_dual_norm(h, movable, p);
  if (denom == 0.0) {
    if (s >= 0.0) return 0.0;
    throw NoRecourse("no movable coordinate carries classifier weight");
  }
  return std::abs(s) / denom;
}

double recourse_cost_mutable(const LinearClassifier& h, std::span<const double> v, LpExponent p,
                             std::span<const std::size_t> movable, std::size_t level_index,
                             const std::vector<int>& levels) {
  if (levels.empty()) throw InvalidLevel("empty level set");
  const double s = h.decision(v);
  const double denom = weight_dual_norm(h, movable, p);
  const double a = v[level_index];
  double best = kInfinity;
  for (int level : levels) {
    const double jump = std::abs(level - a);
    const double moved = s + h.w[level_index] * (level - a);
    double dist = 0.0;
    if (denom == 0.0) {
      if (moved < 0.0) continue;
    } else {
      dist = std::abs(moved) / denom;
    }
    const double total = lp_combine(jump, dist, p);
    best = std::min(best, total);
  }
  if (best == kInfinity) throw NoRecourse("no level admits recourse");
  return best;
}

LinearAction optimal_action_linear(const LinearClassifier& h, std::span<const double> v,
                                   LpExponent p, std::span<const std::size_t> movable,
                                   ActionKind kind, const LinearScm* scm) {
  const double s = h.decision(v);
  const double r = recourse_cost_immutable(h, v, p, movable);
  const LpExponent q = p.conjugate();
  const double wnorm = weight_dual_norm(h, movable, p);

  LinearAction out;
  out.eta.assign(v.size(), 0.0);
  if (s != 0.0 && wnorm > 0.0) {
    if (q.is_infinite()) {
      std::size_t best = movable.front();
      for (std::size_t i : movable)
        if (std::abs(h.w[i]) > std::abs(h.w[best])) best = i;
      out.eta[best] = -s / h.w[best];
    } else if (q.value() == 1.0) {
      for (std::size_t i : movable)
        if (h.w[i] != 0.0) out.eta[i] = -r * sign_of(s / h.w[i]);
    } else {
      const double e = q.value() - 1.0;
      const double scale = std::pow(wnorm, e);
      for (std::size_t i : movable) {
        if (h.w[i] == 0.0) continue;
        out.eta[i] = -r * std::pow(std::abs(h.w[i]), e) * sign_of(s / h.w[i]) / scale;
      }
    }
  }

  out.landing.assign(v.begin(), v.end());
  for (std::size_t i = 0; i < v.size(); ++i) out.landing[i] += out.eta[i];
  out.cost = lp_norm(restrict(out.eta, movable), p);

  const bool moves = std::any_of(out.eta.begin(), out.eta.end(), [](double x) { return x != 0.0; });
  if (!moves) {
    out.action = AdditiveIntervention{};
    return out;
  }
  if (kind == ActionKind::hard) {
    HardIntervention hard;
    for (std::size_t i : movable) {
      hard.indices.push_back(i);
      hard.values.push_back(out.landing[i]);
    }
    out.action = hard;
  } else {
    if (scm == nullptr) throw std::invalid_argument("additive closed form needs the linear model");
    const Eigen::VectorXd delta = scm->S_inv() * to_vector(out.eta);
    AdditiveIntervention add;
    for (std::size_t i : scm->scm().continuous_indices()) {
      if (delta(static_cast<Eigen::Index>(i)) == 0.0) continue;
      add.indices.push_back(i);
      add.shifts.push_back(delta(static_cast<Eigen::Index>(i)));
    }
    if (kind == ActionKind::middle) {
      out.action = MiddleIntervention{{}, {}, add.indices, add.shifts};
    } else {
      out.action = add;
    }
  }
  return out;
}

std::pair<double, double> weighted_cost_bounds(const LinearClassifier& h,
                                               std::span<const double> v,
                                               const std::vector<WeightedTerm>& terms,
                                               std::span<const std::size_t> movable) {
  if (terms.empty()) throw std::invalid_argument("weighted cost needs at least one term");
  double lower = 0.0;
  std::size_t smallest = 0;
  for (std::size_t k = 0; k < terms.size(); ++k) {
    lower += terms[k].alpha * recourse_cost_immutable(h, v, terms[k].p, movable);
    if (terms[k].p.value() < terms[smallest].p.value()) smallest = k;
  }
  const double upper = recourse_cost_immutable(h, v, terms[smallest].p, movable);
  return {lower, upper};
}

double protected_effect(const LinearClassifier& h, const LinearScm& scm,
                        std::size_t protected_index) {
  const std::size_t idx[1] = {protected_index};
  return score_response(h, scm, idx).front();
}

std::vector<double> twin_scores(const LinearClassifier& h, const LinearScm& scm,
                                std::span<const double> v, std::size_t protected_index) {
  const auto& var = scm.scm().variable(protected_index);
  if (!var.is_categorical()) throw InvalidIntervention("protected index must be categorical");
  const double c = protected_effect(h, scm, protected_index);
  const double l0 = var.levels.front();
  const double base = h.decision(v) - (v[protected_index] - l0) * c;
  std::vector<double> out;
  for (int level : var.levels) {
    out.push_back(level == v[protected_index] ? h.decision(v) : base + (level - l0) * c);
  }
  return out;
}

double unfair_band_halfwidth(const LinearClassifier& h, const LinearScm& scm, LpExponent p,
                             std::size_t protected_index, std::span<const std::size_t> movable) {
  const auto& levels = scm.scm().variable(protected_index).levels;
  const double spread = static_cast<double>(levels.back() - levels.front());
  return spread * std::abs(protected_effect(h, scm, protected_index)) /
         weight_dual_norm(h, movable, p);
}

bool unfair_area_contains(const LinearClassifier& h, const LinearScm& scm,
                          std::span<const double> v, std::size_t protected_index) {
  const bool positive = h.decision(v) >= 0.0;
  for (double s : twin_scores(h, scm, v, protected_index)) {
    if ((s >= 0.0) != positive) return true;
  }
  return false;
}

bool fair_recourse_possible(const LinearClassifier& h, const LinearScm& scm,
                            std::size_t protected_index) {
  return std::abs(protected_effect(h, scm, protected_index)) <= 1e-12;
}

double robust_extra_cost(const LinearClassifier& h, const LinearScm& scm, LpExponent p,
                         double delta, std::span<const std::size_t> movable,
                         std::span<const std::size_t> perturbed) {
  if (delta < 0.0) throw std::invalid_argument("perturbation radius must be nonnegative");
  if (delta == 0.0) return 0.0;
  const double denom = weight_dual_norm(h, movable, p);
  if (denom == 0.0) throw NoRecourse("no movable coordinate carries classifier weight");
  return delta * lp_norm(score_response(h, scm, perturbed), p.conjugate()) / denom;
}

double robust_recourse_cost(const LinearClassifier& h, const LinearScm& scm,
                            std::span<const double> v, LpExponent p, double delta,
                            std::span<const std::size_t> movable,
                            std::span<const std::size_t> perturbed) {
  return recourse_cost_immutable(h, v, p, movable) +
         robust_extra_cost(h, scm, p, delta, movable, perturbed);
}

double afrr_cost(const LinearClassifier& h, const LinearScm& scm, std::span<const double> v,
                 LpExponent p, double delta, std::size_t protected_index,
                 std::span<const std::size_t> movable, std::span<const std::size_t> perturbed) {
  if (unfair_area_contains(h, scm, v, protected_index)) {
    throw UnfairInstance("instance lies in the unfair area; fair robust recourse is undefined");
  }
  const double denom = weight_dual_norm(h, movable, p);
  if (denom == 0.0) throw NoRecourse("no movable coordinate carries classifier weight");
  const double extra =
      delta == 0.0 ? 0.0 : delta * lp_norm(score_response(h, scm, perturbed), p.conjugate());

  // Scores rebuilt from the lowest level keep the result identical across the orbit.
  const auto& levels = scm.scm().variable(protected_index).levels;
  const double c = protected_effect(h, scm, protected_index);
  const double l0 = levels.front();
  const double base = h.decision(v) - (v[protected_index] - l0) * c;
  double worst = 0.0;
  for (int level : levels) worst = std::max(worst, std::abs(base + (level - l0) * c));
  return (worst + extra) / denom;
}

LinearClassifier modified_classifier(const LinearClassifier& h, double delta,
                                     const Eigen::MatrixXd& directions, LpExponent p) {
  if (static_cast<std::size_t>(directions.rows()) != h.w.size()) {
    throw DimensionMismatch("direction block rows must match the classifier dimension");
  }
  LinearClassifier out = h;
  if (delta == 0.0) return out;
  const Eigen::VectorXd response = directions.transpose() * to_vector(h.w);
  out.b = h.b + delta * lp_norm(std::span<const double>(response.data(), response.size()),
                                p.conjugate());
  return out;
}

}  // namespace faro

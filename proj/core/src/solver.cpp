#include "faro/solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "faro/errors.hpp"

namespace faro {

double cost_of(const CostSpec& cost, std::span<const double> displacement) {
  if (const auto* lp = std::get_if<LpCost>(&cost)) return lp_norm(displacement, lp->p);
  double total = 0.0;
  for (const auto& t : std::get<WeightedLpCost>(cost).terms) {
    total += t.alpha * lp_norm(displacement, t.p);
  }
  return total;
}

void validate(const CostSpec& cost) {
  const auto* w = std::get_if<WeightedLpCost>(&cost);
  if (w == nullptr) return;
  if (w->terms.empty()) throw std::invalid_argument("weighted cost needs at least one term");
  double sum = 0.0;
  for (const auto& t : w->terms) {
    if (!(t.alpha > 0.0)) throw std::invalid_argument("weighted cost coefficients must be positive");
    sum += t.alpha;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("weighted cost coefficients must sum to 1");
}

std::string to_string(Validity v) {
  switch (v) {
    case Validity::plain: return "plain";
    case Validity::robust: return "robust";
    case Validity::afrr: return "afrr";
    case Validity::faro: return "faro";
  }
  return "unknown";
}

std::string to_string(SolverKind s) {
  return s == SolverKind::closed_form ? "closed_form" : "brute_force";
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::solved: return "solved";
    case SolveStatus::infeasible_in_grid: return "infeasible_in_grid";
    case SolveStatus::undefined_unfair: return "undefined_unfair";
  }
  return "unknown";
}

namespace {

void check_problem(const RecourseProblem& problem) {
  if (problem.scm == nullptr) throw std::invalid_argument("recourse problem without a model");
  const Scm& scm = *problem.scm;
  scm.validate(problem.instance);
  validate(problem.cost);
  for (std::size_t i : problem.actionable) {
    if (i >= scm.size()) throw InvalidIntervention("actionable index out of range");
    if (!scm.variable(i).actionable) {
      throw InvalidIntervention("variable '" + scm.variable(i).name + "' is not actionable");
    }
  }
  if (problem.perturbation) problem.perturbation->validate(scm);
  (void)decision_value(problem.model, problem.instance);
}

Validity validity_of(const RecourseProblem& problem, std::size_t n_centers) {
  if (!problem.perturbation) return Validity::plain;
  return n_centers > 1 ? Validity::afrr : Validity::robust;
}

Intervention plan_to_intervention(const Scm& scm, const InterventionPlan& plan) {
  HardIntervention hard;
  AdditiveIntervention add;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    if (plan.op(i) == InterventionPlan::Op::set) {
      hard.indices.push_back(i);
      hard.values.push_back(plan.value(i));
    } else if (plan.op(i) == InterventionPlan::Op::shift) {
      add.indices.push_back(i);
      add.shifts.push_back(plan.value(i));
    }
  }
  if (add.indices.empty() && !hard.indices.empty()) return hard;
  if (hard.indices.empty()) return add;
  const bool categorical_sets =
      std::all_of(hard.indices.begin(), hard.indices.end(),
                  [&](std::size_t i) { return scm.variable(i).is_categorical(); });
  if (!categorical_sets) {
    throw InvalidIntervention("grid mixes hard continuous values with additive shifts");
  }
  return MiddleIntervention{hard.indices, hard.values, add.indices, add.shifts};
}

std::vector<double> offsets(std::size_t points, double half) {
  if (points < 3) return {0.0};
  if (points % 2 == 0) ++points;
  std::vector<double> out(points);
  const std::size_t mid = points / 2;
  for (std::size_t k = 0; k < points; ++k) {
    const double t = (static_cast<double>(k) - static_cast<double>(mid)) / static_cast<double>(mid);
    out[k] = t * half;
  }
  out[mid] = 0.0;
  return out;
}

}  // namespace

std::vector<ActionAxis> build_axes(const RecourseProblem& problem, const GridSpec& grid) {
  const Scm& scm = *problem.scm;
  const auto& v = problem.instance;
  std::vector<std::size_t> idx = problem.actionable;
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());

  std::vector<ActionAxis> axes;
  for (std::size_t i : idx) {
    const auto& var = scm.variable(i);
    ActionAxis axis;
    axis.index = i;
    axis.choices.push_back({InterventionPlan::Op::keep, 0.0});
    if (var.is_categorical()) {
      if (problem.kind == ActionKind::additive) continue;
      for (int level : var.levels) {
        if (level != v[i]) axis.choices.push_back({InterventionPlan::Op::set, double(level)});
      }
    } else {
      const double sigma = grid.scale.empty() ? 1.0 : grid.scale.at(i);
      for (double off : offsets(grid.points, grid.sigmas * sigma)) {
        if (problem.kind == ActionKind::hard) {
          // pinning a child at its current value differs from keeping it
          if (off == 0.0 && scm.equation(i).parents().empty()) continue;
          axis.choices.push_back({InterventionPlan::Op::set, v[i] + off});
        } else if (off != 0.0) {
          axis.choices.push_back({InterventionPlan::Op::shift, off});
        }
      }
    }
    if (axis.choices.size() > 1) axes.push_back(std::move(axis));
  }
  return axes;
}

namespace {

std::vector<double> axis_steps(const std::vector<ActionAxis>& axes) {
  std::vector<double> steps;
  for (const auto& a : axes) {
    std::vector<double> vals;
    for (const auto& c : a.choices) {
      if (c.op != InterventionPlan::Op::keep) vals.push_back(c.value);
    }
    std::sort(vals.begin(), vals.end());
    double step = 0.0;
    for (std::size_t k = 1; k < vals.size(); ++k) step = std::max(step, vals[k] - vals[k - 1]);
    steps.push_back(step);
  }
  return steps;
}

struct Workspace {
  const Scm& scm;
  const std::vector<ActionAxis>& axes;
  InterventionPlan plan;
  Instance buffer;

  Workspace(const Scm& s, const std::vector<ActionAxis>& a)
      : scm(s), axes(a), plan(s.size()), buffer(s.size()) {}

  void load(std::size_t action) {
    for (std::size_t k = axes.size(); k-- > 0;) {
      const auto& axis = axes[k];
      const std::size_t n = axis.choices.size();
      const AxisChoice& c = axis.choices[action % n];
      action /= n;
      switch (c.op) {
        case InterventionPlan::Op::keep: plan.keep(axis.index); break;
        case InterventionPlan::Op::set: plan.set(axis.index, c.value); break;
        case InterventionPlan::Op::shift: plan.shift(axis.index, c.value); break;
      }
    }
  }
};

constexpr std::size_t kMaxGridActions = 50'000'000;

}  // namespace

namespace {

RecourseSolution solve_on_grid(const RecourseProblem& problem, const GridSpec& grid) {
  const Scm& scm = *problem.scm;
  const Instance& v = problem.instance;
  const std::size_t n = scm.size();

  const std::vector<ActionAxis> axes = grid.axes.empty() ? build_axes(problem, grid) : grid.axes;
  for (const auto& a : axes) {
    if (a.index >= n || a.choices.empty()) throw InvalidIntervention("malformed action axis");
  }

  RecourseSolution out;
  out.solver = SolverKind::brute_force;
  out.grid_step = axis_steps(axes);
  out.delta = problem.perturbation ? problem.perturbation->radius : 0.0;

  // Centres of the perturbation: one point per reachable level tuple.
  std::vector<Instance> centers;
  const Noise u_v = scm.abduct(v);
  if (problem.perturbation) {
    const auto& spec = *problem.perturbation;
    for (const auto& theta : levels_in_ball(scm, spec, v)) {
      const PerturbationDraw zero{theta, std::vector<double>(spec.continuous.size(), 0.0)};
      centers.push_back(scm.generate(u_v, InterventionPlan(scm, to_intervention(spec, zero))));
    }
  } else {
    centers.push_back(v);
  }
  out.validity = validity_of(problem, centers.size());

  const int label = predict(problem.model, v);
  for (const auto& c : centers) {
    if (predict(problem.model, c) != label) {
      out.status = SolveStatus::undefined_unfair;
      return out;
    }
  }

  std::vector<Noise> center_noise;
  for (const auto& c : centers) center_noise.push_back(scm.abduct(c));

  std::vector<Noise> sample_noise;
  if (problem.perturbation) {
    for (const auto& s : sample_counterfactual_perturbation(scm, v, *problem.perturbation,
                                                            grid.perturbation_samples, grid.seed)) {
      sample_noise.push_back(scm.abduct(s));
    }
  } else {
    sample_noise.push_back(u_v);
  }

  std::size_t total = 1;
  for (const auto& a : axes) {
    if (total > kMaxGridActions / a.choices.size()) {
      throw std::invalid_argument("action grid exceeds " + std::to_string(kMaxGridActions) +
                                  " points");
    }
    total *= a.choices.size();
  }

  Workspace ws(scm, axes);
  std::vector<double> costs(total);
  std::vector<double> diff(n);
  for (std::size_t k = 0; k < total; ++k) {
    ws.load(k);
    double worst = 0.0;
    for (std::size_t c = 0; c < centers.size(); ++c) {
      scm.generate_into(center_noise[c], ws.plan, ws.buffer);
      for (std::size_t i = 0; i < n; ++i) diff[i] = centers[c][i] - ws.buffer[i];
      worst = std::max(worst, cost_of(problem.cost, diff));
    }
    costs[k] = worst;
  }

  std::vector<std::uint32_t> order(total);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return costs[a] < costs[b] || (costs[a] == costs[b] && a < b);
  });
  // The null action is tried first regardless of floating ties.
  if (!order.empty() && order.front() != 0 && costs[0] == 0.0) {
    order.erase(std::find(order.begin(), order.end(), 0u));
    order.insert(order.begin(), 0u);
  }

  std::vector<std::size_t> sample_order(sample_noise.size());
  std::iota(sample_order.begin(), sample_order.end(), std::size_t{0});
  for (std::uint32_t k : order) {
    ++out.actions_checked;
    ws.load(k);
    bool ok = true;
    for (std::size_t pos = 0; pos < sample_order.size(); ++pos) {
      scm.generate_into(sample_noise[sample_order[pos]], ws.plan, ws.buffer);
      if (predict(problem.model, ws.buffer) < 0) {
        // Failing samples tend to fail again for the next candidate.
        std::rotate(sample_order.begin(), sample_order.begin() + static_cast<std::ptrdiff_t>(pos),
                    sample_order.begin() + static_cast<std::ptrdiff_t>(pos) + 1);
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    out.status = SolveStatus::solved;
    out.cost = costs[k];
    out.action = plan_to_intervention(scm, ws.plan);
    out.counterfactual = scm.generate(u_v, ws.plan);
    return out;
  }
  out.status = SolveStatus::infeasible_in_grid;
  return out;
}

}  // namespace

RecourseSolution solve_bruteforce(const RecourseProblem& problem, const GridSpec& grid) {
  check_problem(problem);
  GridSpec g = grid;
  std::size_t checked = 0;
  for (std::size_t attempt = 0;; ++attempt) {
    RecourseSolution sol = solve_on_grid(problem, g);
    checked += sol.actions_checked;
    sol.actions_checked = checked;
    if (sol.status != SolveStatus::infeasible_in_grid || attempt >= grid.widen_attempts ||
        !grid.axes.empty()) {
      return sol;
    }
    g.sigmas *= 2.0;
  }
}

RecourseSolution solve_closed_form(const RecourseProblem& problem, const LinearScm& lscm) {
  check_problem(problem);
  const auto* h = as_linear(problem.model);
  if (h == nullptr) throw std::invalid_argument("closed forms need a linear classifier");
  const auto* lp = std::get_if<LpCost>(&problem.cost);
  if (lp == nullptr) throw std::invalid_argument("closed forms need a single L_p cost");
  if (problem.kind == ActionKind::middle) {
    throw std::invalid_argument("closed forms cover hard and additive actions only");
  }
  const Scm& scm = *problem.scm;
  const Instance& v = problem.instance;
  std::vector<std::size_t> movable;
  for (std::size_t i : problem.actionable) {
    if (scm.variable(i).is_categorical()) {
      throw std::invalid_argument("closed forms need an immutable categorical part");
    }
    movable.push_back(i);
  }
  std::sort(movable.begin(), movable.end());
  if (movable.empty()) throw NoRecourse("no actionable continuous variable");

  RecourseSolution out;
  out.solver = SolverKind::closed_form;
  out.delta = problem.perturbation ? problem.perturbation->radius : 0.0;

  // Required score margin over each reachable level tuple.
  const double s = h->decision(v);
  double target = -s;
  std::size_t n_levels = 1;
  if (problem.perturbation) {
    const auto& spec = *problem.perturbation;
    const auto thetas = levels_in_ball(scm, spec, v);
    n_levels = thetas.size();
    const auto perturbed = spec.continuous;
    LpExponent q{2.0};
    if (!perturbed.empty()) q = std::get<LqMetric>(spec.metric.block_of(perturbed.front())->metric).q;
    if (!(q == lp->p)) {
      throw std::invalid_argument("closed forms need the perturbation norm to match the cost norm");
    }
    std::vector<double> response;
    const Eigen::VectorXd w = to_vector(h->w);
    for (std::size_t j : perturbed) response.push_back(w.dot(lscm.column(j)));
    const double g = lp_norm(response, lp->p.conjugate());

    const int label = h->predict(v);
    target = -kInfinity;
    for (const auto& theta : thetas) {
      // Score of the level-tuple centre: only a root protected variable shifts linearly.
      double score = s;
      for (std::size_t k = 0; k < spec.categorical.size(); ++k) {
        const std::size_t a = spec.categorical[k];
        score += (theta[k] - v[a]) * w.dot(lscm.column(a));
      }
      if ((score >= 0.0 ? 1 : -1) != label) {
        out.status = SolveStatus::undefined_unfair;
        out.validity = Validity::afrr;
        return out;
      }
      const double r_theta = residual_radius(spec, theta, v);
      target = std::max(target, r_theta * g - score);
    }
  }
  out.validity = !problem.perturbation ? Validity::plain
                 : n_levels > 1        ? Validity::afrr
                                       : Validity::robust;
  out.status = SolveStatus::solved;
  if (target <= 0.0) {
    out.action = AdditiveIntervention{};
    out.counterfactual = v;
    out.cost = 0.0;
    return out;
  }
  // Moving to w.x = w.v + target is a plain projection onto a shifted hyperplane.
  LinearClassifier shifted = *h;
  shifted.b = s + h->b + target;
  const LinearAction act = optimal_action_linear(shifted, v, lp->p, movable, problem.kind, &lscm);
  out.action = act.action;
  out.counterfactual = act.landing;
  out.cost = act.cost;
  return out;
}

std::vector<double> action_vector(const Scm& scm, const Intervention& iv) {
  const InterventionPlan plan(scm, iv);
  std::vector<double> out(scm.size(), 0.0);
  for (std::size_t i = 0; i < scm.size(); ++i) {
    if (plan.op(i) != InterventionPlan::Op::keep) out[i] = plan.value(i);
  }
  return out;
}

FaroResult solve_faro(const RecourseProblem& problem, const GridSpec& grid,
                      const std::vector<double>& deltas) {
  if (!problem.perturbation) throw std::invalid_argument("fair robust recourse needs a perturbation metric");
  if (deltas.empty()) throw std::invalid_argument("empty radius sequence");
  for (std::size_t k = 0; k < deltas.size(); ++k) {
    if (!(deltas[k] > 0.0) || (k > 0 && !(deltas[k] < deltas[k - 1]))) {
      throw std::invalid_argument("radius sequence must be positive and strictly decreasing");
    }
  }
  FaroResult out;
  out.deltas = deltas;
  RecourseProblem p = problem;
  for (double d : deltas) {
    p.perturbation->radius = d;
    out.trajectory.push_back(solve_bruteforce(p, grid));
    if (out.trajectory.back().status == SolveStatus::undefined_unfair) {
      out.solution = out.trajectory.back();
      out.solution.validity = Validity::faro;
      out.message = "instance lies in the unfair area";
      return out;
    }
  }
  out.solution = out.trajectory.back();
  out.solution.validity = Validity::faro;
  const bool any_solved = std::any_of(out.trajectory.begin(), out.trajectory.end(), [](const auto& s) {
    return s.status == SolveStatus::solved;
  });
  if (!any_solved) {
    out.message = "infeasible within the action grid at every radius";
    return out;
  }
  if (out.trajectory.size() < 2) {
    out.message = "a single radius cannot establish convergence";
    return out;
  }
  const auto& a = out.trajectory[out.trajectory.size() - 2];
  const auto& b = out.trajectory.back();
  if (a.status != SolveStatus::solved || b.status != SolveStatus::solved) {
    out.message = "last two radii did not both yield solutions";
    return out;
  }
  double step = 0.0;
  for (double st : b.grid_step) step = std::max(step, st);
  const double tol = std::max(1e-3, step);
  const auto va = action_vector(*problem.scm, a.action);
  const auto vb = action_vector(*problem.scm, b.action);
  double gap = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) gap = std::max(gap, std::abs(va[i] - vb[i]));
  out.converged = std::abs(a.cost - b.cost) < tol && gap < tol;
  if (!out.converged) out.message = "solutions at the last two radii differ by more than the tolerance";
  return out;
}

}  // namespace faro

#include "faro/metric.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "faro/errors.hpp"

namespace faro {

namespace {

std::size_t level_position(const LevelTableMetric& m, double x) {
  for (std::size_t k = 0; k < m.levels.size(); ++k) {
    if (static_cast<double>(m.levels[k]) == x) return k;
  }
  throw InvalidLevel("level " + std::to_string(x) + " missing from distance table");
}

}  // namespace

double block_distance(const Pseudometric& m, std::span<const double> x,
                      std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionMismatch("metric blocks differ in length");
  if (x.empty()) return 0.0;
  return std::visit(
      [&](const auto& metric) -> double {
        using T = std::decay_t<decltype(metric)>;
        if constexpr (std::is_same_v<T, DiscreteMetric>) {
          return x[0] == y[0] ? 0.0 : 1.0;
        } else if constexpr (std::is_same_v<T, ZeroPseudometric>) {
          return 0.0;
        } else if constexpr (std::is_same_v<T, AbsDiffMetric>) {
          return std::abs(x[0] - y[0]);
        } else if constexpr (std::is_same_v<T, LevelTableMetric>) {
          return metric.table[level_position(metric, x[0])][level_position(metric, y[0])];
        } else {
          double diff[Scm::kMaxParents];
          std::vector<double> heap;
          double* d = diff;
          if (x.size() > Scm::kMaxParents) {
            heap.resize(x.size());
            d = heap.data();
          }
          for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - y[i];
          return lp_norm(std::span<const double>(d, x.size()), metric.q);
        }
      },
      m);
}

std::string metric_name(const Pseudometric& m) {
  return std::visit(
      [](const auto& metric) -> std::string {
        using T = std::decay_t<decltype(metric)>;
        if constexpr (std::is_same_v<T, DiscreteMetric>) return "discrete";
        else if constexpr (std::is_same_v<T, ZeroPseudometric>) return "zero";
        else if constexpr (std::is_same_v<T, AbsDiffMetric>) return "absdiff";
        else if constexpr (std::is_same_v<T, LevelTableMetric>) return "table";
        else return metric.q.is_infinite() ? "Linf" : "L" + std::to_string(metric.q.value());
      },
      m);
}

ProductMetric::ProductMetric(std::vector<MetricBlock> blocks, LpExponent combine)
    : blocks_(std::move(blocks)), combine_(combine) {
  std::vector<std::size_t> seen;
  for (const auto& b : blocks_) {
    for (std::size_t i : b.indices) {
      if (std::find(seen.begin(), seen.end(), i) != seen.end()) {
        throw std::invalid_argument("coordinate " + std::to_string(i) +
                                    " appears in two metric blocks");
      }
      seen.push_back(i);
    }
    if (!std::holds_alternative<LqMetric>(b.metric) && b.indices.size() != 1) {
      throw std::invalid_argument("categorical metric blocks must hold exactly one coordinate");
    }
    if (const auto* t = std::get_if<LevelTableMetric>(&b.metric)) {
      const std::size_t k = t->levels.size();
      if (t->table.size() != k) throw std::invalid_argument("distance table has wrong shape");
      for (std::size_t r = 0; r < k; ++r) {
        if (t->table[r].size() != k) throw std::invalid_argument("distance table has wrong shape");
        if (t->table[r][r] != 0.0) throw std::invalid_argument("distance table diagonal must be 0");
        for (std::size_t c = 0; c < k; ++c) {
          if (t->table[r][c] < 0.0 || t->table[r][c] != t->table[c][r]) {
            throw std::invalid_argument("distance table must be symmetric and nonnegative");
          }
        }
      }
    }
  }
}

const MetricBlock* ProductMetric::block_of(std::size_t i) const {
  for (const auto& b : blocks_) {
    if (std::find(b.indices.begin(), b.indices.end(), i) != b.indices.end()) return &b;
  }
  return nullptr;
}

double ProductMetric::distance(std::span<const double> v, std::span<const double> w) const {
  if (v.size() != w.size()) throw DimensionMismatch("instances differ in length");
  std::vector<double> per_block;
  per_block.reserve(blocks_.size());
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& b : blocks_) {
    xs.clear();
    ys.clear();
    for (std::size_t i : b.indices) {
      if (i >= v.size()) throw DimensionMismatch("metric block index out of range");
      xs.push_back(v[i]);
      ys.push_back(w[i]);
    }
    per_block.push_back(block_distance(b.metric, xs, ys));
  }
  return lp_norm(per_block, combine_);
}

void PerturbationSpec::validate(const Scm& scm) const {
  if (!(radius >= 0.0) || !std::isfinite(radius)) {
    throw std::invalid_argument("perturbation radius must be finite and nonnegative");
  }
  for (std::size_t i : categorical) {
    if (i >= scm.size() || !scm.variable(i).is_categorical()) {
      throw InvalidIntervention("perturbation categorical index " + std::to_string(i) +
                                " is not a categorical variable");
    }
    if (metric.block_of(i) == nullptr) {
      throw std::invalid_argument("categorical index " + std::to_string(i) + " has no metric");
    }
  }
  for (std::size_t j : continuous) {
    if (j >= scm.size() || scm.variable(j).is_categorical()) {
      throw InvalidIntervention("perturbation continuous index " + std::to_string(j) +
                                " is not a continuous variable");
    }
    if (std::find(categorical.begin(), categorical.end(), j) != categorical.end()) {
      throw InvalidIntervention("perturbation index sets overlap");
    }
  }
  if (!continuous.empty()) {
    const MetricBlock* b = metric.block_of(continuous.front());
    if (b == nullptr || !std::holds_alternative<LqMetric>(b->metric) ||
        b->indices != continuous) {
      throw std::invalid_argument(
          "perturbed continuous coordinates must form exactly one L_q metric block");
    }
  }
}

PerturbationSpec make_perturbation(const Scm& scm, ProtectedMetricKind protected_kind,
                                   double radius, LpExponent q, LpExponent combine,
                                   std::optional<std::vector<std::size_t>> continuous) {
  PerturbationSpec spec;
  std::vector<MetricBlock> blocks;
  for (std::size_t i : scm.categorical_indices()) {
    Pseudometric m = DiscreteMetric{};
    if (scm.variable(i).is_protected && protected_kind == ProtectedMetricKind::zero) {
      m = ZeroPseudometric{};
    }
    blocks.push_back({{i}, m});
    spec.categorical.push_back(i);
  }
  spec.continuous = continuous ? *continuous : scm.continuous_indices();
  if (!spec.continuous.empty()) blocks.push_back({spec.continuous, LqMetric{q}});
  spec.metric = ProductMetric(std::move(blocks), combine);
  spec.radius = radius;
  spec.validate(scm);
  return spec;
}

PerturbationSpec make_additive_perturbation(const Scm& scm, double radius, LpExponent q,
                                            std::optional<std::vector<std::size_t>> continuous) {
  PerturbationSpec spec;
  spec.continuous = continuous ? *continuous : scm.continuous_indices();
  std::vector<MetricBlock> blocks;
  if (!spec.continuous.empty()) blocks.push_back({spec.continuous, LqMetric{q}});
  spec.metric = ProductMetric(std::move(blocks), q);
  spec.radius = radius;
  spec.validate(scm);
  return spec;
}

double distance(const ProductMetric& m, std::span<const double> v, std::span<const double> w) {
  return m.distance(v, w);
}

bool ball_contains(const PerturbationSpec& spec, std::span<const double> center,
                   std::span<const double> candidate) {
  return spec.metric.distance(center, candidate) <= spec.radius;
}

double categorical_distance(const PerturbationSpec& spec, std::span<const double> theta,
                            std::span<const double> v) {
  if (theta.size() != spec.categorical.size()) {
    throw DimensionMismatch("level tuple does not match the perturbed categorical set");
  }
  std::vector<double> per_block;
  per_block.reserve(theta.size());
  for (std::size_t k = 0; k < theta.size(); ++k) {
    const std::size_t i = spec.categorical[k];
    const MetricBlock* b = spec.metric.block_of(i);
    if (b == nullptr) throw std::invalid_argument("categorical index without a metric block");
    const double x = theta[k];
    const double y = v[i];
    per_block.push_back(block_distance(b->metric, {&x, 1}, {&y, 1}));
  }
  return lp_norm(per_block, spec.metric.combine());
}

std::vector<std::vector<double>> levels_in_ball(const Scm& scm, const PerturbationSpec& spec,
                                                std::span<const double> v) {
  scm.validate(v);
  const std::size_t k = spec.categorical.size();
  std::vector<std::vector<double>> out;
  std::vector<std::size_t> pos(k, 0);
  std::vector<double> theta(k);
  // Odometer over the level lists, last coordinate fastest.
  while (true) {
    for (std::size_t c = 0; c < k; ++c) {
      theta[c] = scm.variable(spec.categorical[c]).levels[pos[c]];
    }
    if (categorical_distance(spec, theta, v) <= spec.radius) out.push_back(theta);
    std::size_t c = k;
    while (c > 0) {
      --c;
      if (++pos[c] < scm.variable(spec.categorical[c]).levels.size()) break;
      pos[c] = 0;
      if (c == 0) return out;
    }
    if (k == 0) return out;
  }
}

double residual_radius(double radius, double categorical_dist, LpExponent combine) {
  if (categorical_dist > radius) {
    throw InvalidLevel("level tuple lies outside the perturbation ball");
  }
  if (combine.value() == 2.0) {
    return std::sqrt(std::max(0.0, radius * radius - categorical_dist * categorical_dist));
  }
  auto fits = [&](double r) { return lp_combine(categorical_dist, r, combine) <= radius; };
  double lo = 0.0;
  double hi = radius;
  if (fits(hi)) return hi;
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    (fits(mid) ? lo : hi) = mid;
  }
  return lo;
}

double residual_radius(const PerturbationSpec& spec, std::span<const double> theta,
                       std::span<const double> v) {
  return residual_radius(spec.radius, categorical_distance(spec, theta, v),
                         spec.metric.combine());
}

ProtectionVerdict classify_protection(const std::vector<int>& levels, const Pseudometric& metric) {
  std::size_t pairs = 0;
  std::size_t zero_pairs = 0;
  for (std::size_t a = 0; a < levels.size(); ++a) {
    for (std::size_t b = a + 1; b < levels.size(); ++b) {
      const double x = levels[a];
      const double y = levels[b];
      ++pairs;
      if (block_distance(metric, {&x, 1}, {&y, 1}) == 0.0) ++zero_pairs;
    }
  }
  if (pairs > 0 && zero_pairs == pairs) return ProtectionVerdict::protected_feature;
  if (zero_pairs > 0) return ProtectionVerdict::partially_protected;
  // A single-level variable has no distinct pair and nothing to protect.
  return ProtectionVerdict::unprotected;
}

ProtectedSpec classify_protection(const Scm& scm, std::size_t index, const ProductMetric& metric) {
  const MetricBlock* b = metric.block_of(index);
  ProtectedSpec out;
  out.index = index;
  if (b == nullptr) return out;
  out.verdict = classify_protection(scm.variable(index).levels, b->metric);
  return out;
}

std::string to_string(ProtectionVerdict v) {
  switch (v) {
    case ProtectionVerdict::protected_feature:
      return "protected";
    case ProtectionVerdict::partially_protected:
      return "partially protected";
    case ProtectionVerdict::unprotected:
      break;
  }
  return "unprotected";
}

namespace {

std::vector<double> boundary_point(std::size_t dim, double r, LpExponent q, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> g(dim);
  double norm = 0.0;
  while (norm == 0.0) {
    for (auto& x : g) x = gauss(rng);
    norm = lp_norm(g, q);
  }
  for (auto& x : g) x *= r / norm;
  return g;
}

std::vector<double> interior_point(std::size_t dim, double r, LpExponent q, std::mt19937_64& rng) {
  if (q.value() == 2.0) {
    auto dir = boundary_point(dim, 1.0, q, rng);
    const double scale =
        r * std::pow(std::uniform_real_distribution<double>(0.0, 1.0)(rng), 1.0 / double(dim));
    for (auto& x : dir) x *= scale;
    return dir;
  }
  std::uniform_real_distribution<double> box(-r, r);
  std::vector<double> x(dim);
  while (true) {
    for (auto& xi : x) xi = box(rng);
    if (q.is_infinite() || lp_norm(x, q) <= r) return x;
  }
}

}  // namespace

std::vector<PerturbationDraw> draw_perturbations(const Scm& scm, const PerturbationSpec& spec,
                                                 std::span<const double> v,
                                                 std::size_t n_samples, std::mt19937_64& rng) {
  spec.validate(scm);
  const auto thetas = levels_in_ball(scm, spec, v);
  std::vector<PerturbationDraw> out;
  std::vector<std::size_t> active;
  std::vector<double> radii;
  for (std::size_t t = 0; t < thetas.size(); ++t) {
    out.push_back({thetas[t], std::vector<double>(spec.continuous.size(), 0.0)});
    radii.push_back(residual_radius(spec, thetas[t], v));
    if (radii.back() > 0.0 && !spec.continuous.empty()) active.push_back(t);
  }
  if (active.empty()) return out;

  LpExponent q{2.0};
  if (const MetricBlock* b = spec.metric.block_of(spec.continuous.front())) {
    q = std::get<LqMetric>(b->metric).q;
  }
  const std::size_t total = std::max(n_samples, out.size());
  const std::size_t n_boundary = n_samples / 4;
  const std::size_t dim = spec.continuous.size();
  for (std::size_t k = 0; out.size() < total; ++k) {
    const std::size_t t = active[k % active.size()];
    PerturbationDraw d;
    d.theta = thetas[t];
    d.delta = k < n_boundary ? boundary_point(dim, radii[t], q, rng)
                             : interior_point(dim, radii[t], q, rng);
    out.push_back(std::move(d));
  }
  return out;
}

MiddleIntervention to_intervention(const PerturbationSpec& spec, const PerturbationDraw& d) {
  return MiddleIntervention{spec.categorical, d.theta, spec.continuous, d.delta};
}

std::vector<Instance> sample_counterfactual_perturbation(const Scm& scm,
                                                         std::span<const double> v,
                                                         const PerturbationSpec& spec,
                                                         std::size_t n_samples,
                                                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto draws = draw_perturbations(scm, spec, v, n_samples, rng);
  const Noise u = scm.abduct(v);
  std::vector<Instance> out;
  out.reserve(draws.size());
  for (const auto& d : draws) {
    out.push_back(scm.generate(u, InterventionPlan(scm, to_intervention(spec, d))));
  }
  return out;
}

namespace {

double max_abs_diff(const Instance& a, const Instance& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

bool covered(const std::vector<Instance>& from, const std::vector<Instance>& to, double tol) {
  for (std::size_t i = 0; i < from.size(); ++i) {
    if (i < to.size() && to[i].size() == from[i].size() && max_abs_diff(from[i], to[i]) <= tol) {
      continue;
    }
    const bool hit = std::any_of(to.begin(), to.end(), [&](const Instance& y) {
      return y.size() == from[i].size() && max_abs_diff(from[i], y) <= tol;
    });
    if (!hit) return false;
  }
  return true;
}

}  // namespace

bool sampled_sets_match(const std::vector<Instance>& a, const std::vector<Instance>& b,
                        double tolerance) {
  return covered(a, b, tolerance) && covered(b, a, tolerance);
}

DecompositionResult decomposition_check(const Scm& scm, std::span<const double> v,
                                        const PerturbationSpec& spec, std::size_t n_samples,
                                        std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto draws = draw_perturbations(scm, spec, v, n_samples, rng);
  const Noise u = scm.abduct(v);

  const auto p = scm.protected_index();
  std::optional<std::size_t> slot;
  if (p) {
    for (std::size_t k = 0; k < spec.categorical.size(); ++k)
      if (spec.categorical[k] == *p) slot = k;
  }

  struct TwinModel {
    Scm model;
    Instance twin;
  };
  std::map<double, TwinModel> per_level;
  auto twin_model = [&](double level) -> const TwinModel& {
    auto it = per_level.find(level);
    if (it == per_level.end()) {
      const HardIntervention fix{{*p}, {level}};
      it = per_level
               .emplace(level, TwinModel{scm.apply_intervention(fix), scm.counterfactual(v, fix)})
               .first;
    }
    return it->second;
  };

  DecompositionResult out;
  out.direct.reserve(draws.size());
  out.via_twins.reserve(draws.size());
  for (const auto& d : draws) {
    out.direct.push_back(scm.generate(u, InterventionPlan(scm, to_intervention(spec, d))));

    MiddleIntervention rest{{}, {}, spec.continuous, d.delta};
    for (std::size_t k = 0; k < spec.categorical.size(); ++k) {
      if (slot && k == *slot) continue;
      rest.categorical.push_back(spec.categorical[k]);
      rest.values.push_back(d.theta[k]);
    }
    if (slot) {
      const TwinModel& tm = twin_model(d.theta[*slot]);
      out.via_twins.push_back(tm.model.counterfactual(tm.twin, rest));
    } else {
      out.via_twins.push_back(scm.counterfactual(v, rest));
    }
  }
  out.holds = sampled_sets_match(out.direct, out.via_twins, 1e-6);
  return out;
}

}  // namespace faro

#include "faro/scm.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "faro/errors.hpp"

namespace faro {

VariableSpec VariableSpec::continuous(std::string name, bool actionable) {
  VariableSpec s;
  s.name = std::move(name);
  s.kind = VariableKind::continuous;
  s.actionable = actionable;
  return s;
}

VariableSpec VariableSpec::categorical(std::string name, std::vector<int> levels, bool actionable,
                                       bool is_protected) {
  VariableSpec s;
  s.name = std::move(name);
  s.kind = VariableKind::categorical;
  s.levels = std::move(levels);
  s.actionable = actionable;
  s.is_protected = is_protected;
  return s;
}

bool VariableSpec::has_level(double value) const {
  return std::any_of(levels.begin(), levels.end(),
                     [value](int l) { return static_cast<double>(l) == value; });
}

double draw(const NoiseDistribution& dist, std::mt19937_64& rng) {
  return std::visit(
      [&rng](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, NormalNoise>) {
          return std::normal_distribution<double>(d.mean, d.stddev)(rng);
        } else if constexpr (std::is_same_v<T, BernoulliNoise>) {
          return std::bernoulli_distribution(d.p)(rng) ? 1.0 : 0.0;
        } else if constexpr (std::is_same_v<T, GammaNoise>) {
          return std::gamma_distribution<double>(d.shape, d.scale)(rng);
        } else {
          return d.value;
        }
      },
      dist);
}

// ---------------------------------------------------------------------------
// StructuralEquation

StructuralEquation StructuralEquation::exogenous() {
  return linear({}, {}, 0.0);
}

StructuralEquation StructuralEquation::additive(std::vector<std::size_t> parents, Mean f) {
  if (!f) throw InvalidModel("additive equation requires a mean function");
  StructuralEquation e;
  e.parents_ = std::move(parents);
  e.mean_ = std::move(f);
  return e;
}

StructuralEquation StructuralEquation::linear(std::vector<std::size_t> parents,
                                              std::vector<double> coefficients, double intercept) {
  if (parents.size() != coefficients.size()) {
    throw InvalidModel("linear equation: coefficient count does not match parent count");
  }
  StructuralEquation e;
  e.parents_ = std::move(parents);
  e.linear_ = LinearForm{std::move(coefficients), intercept};
  return e;
}

StructuralEquation StructuralEquation::invertible(std::vector<std::size_t> parents, Link forward,
                                                  Link inverse) {
  if (!forward || !inverse) throw InvalidModel("invertible equation requires both directions");
  StructuralEquation e;
  e.parents_ = std::move(parents);
  e.forward_ = std::move(forward);
  e.inverse_ = std::move(inverse);
  return e;
}

StructuralEquation StructuralEquation::constant(double theta) {
  StructuralEquation e;
  e.constant_ = theta;
  return e;
}

StructuralEquation StructuralEquation::shifted(double delta) const {
  if (delta == 0.0) return *this;
  StructuralEquation e = *this;
  if (constant_) {
    *e.constant_ += delta;
  } else if (linear_) {
    e.linear_->intercept += delta;
  } else if (mean_) {
    e.mean_ = [f = mean_, delta](std::span<const double> pa) { return f(pa) + delta; };
  } else {
    e.forward_ = [f = forward_, delta](std::span<const double> pa, double u) {
      return f(pa, u) + delta;
    };
    e.inverse_ = [g = inverse_, delta](std::span<const double> pa, double v) {
      return g(pa, v - delta);
    };
  }
  return e;
}

double StructuralEquation::evaluate(std::span<const double> pa, double noise) const {
  if (constant_) return *constant_;
  if (linear_) {
    double s = linear_->intercept;
    for (std::size_t k = 0; k < pa.size(); ++k) s += linear_->coefficients[k] * pa[k];
    return s + noise;
  }
  if (mean_) return mean_(pa) + noise;
  return forward_(pa, noise);
}

double StructuralEquation::invert(std::span<const double> pa, double value) const {
  // A constant assignment carries no information about its noise term.
  if (constant_) return 0.0;
  if (linear_ || mean_) return value - evaluate(pa, 0.0);
  return inverse_(pa, value);
}

// ---------------------------------------------------------------------------
// Interventions

bool is_empty(const Intervention& iv) {
  return std::visit(
      [](const auto& x) -> bool {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, HardIntervention>) {
          return x.indices.empty();
        } else if constexpr (std::is_same_v<T, AdditiveIntervention>) {
          return std::all_of(x.shifts.begin(), x.shifts.end(), [](double d) { return d == 0.0; });
        } else {
          return x.categorical.empty() &&
                 std::all_of(x.shifts.begin(), x.shifts.end(), [](double d) { return d == 0.0; });
        }
      },
      iv);
}

namespace {

void append_pairs(std::ostringstream& os, const char* tag, const std::vector<std::size_t>& idx,
                  const std::vector<double>& vals, bool& first) {
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (!first) os << ';';
    first = false;
    os << tag << '[' << idx[k] << "]=" << vals[k];
  }
}

}  // namespace

std::string describe(const Intervention& iv) {
  std::ostringstream os;
  os.precision(10);
  bool first = true;
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, HardIntervention>) {
          append_pairs(os, "do", x.indices, x.values, first);
        } else if constexpr (std::is_same_v<T, AdditiveIntervention>) {
          append_pairs(os, "shift", x.indices, x.shifts, first);
        } else {
          append_pairs(os, "do", x.categorical, x.values, first);
          append_pairs(os, "shift", x.continuous, x.shifts, first);
        }
      },
      iv);
  if (first) return "none";
  return os.str();
}

InterventionPlan::InterventionPlan(std::size_t size) : ops_(size, Op::keep), values_(size, 0.0) {}

void InterventionPlan::keep(std::size_t i) {
  ops_.at(i) = Op::keep;
  values_[i] = 0.0;
}

void InterventionPlan::set(std::size_t i, double value) {
  ops_.at(i) = Op::set;
  values_[i] = value;
}

void InterventionPlan::shift(std::size_t i, double delta) {
  ops_.at(i) = Op::shift;
  values_[i] = delta;
}

namespace {

void check_index(const Scm& scm, std::size_t i) {
  if (i >= scm.size()) {
    throw InvalidIntervention("intervention index " + std::to_string(i) + " out of range for " +
                              std::to_string(scm.size()) + " variables");
  }
}

void check_hard_value(const Scm& scm, std::size_t i, double theta) {
  const auto& var = scm.variable(i);
  if (var.is_categorical() && !var.has_level(theta)) {
    throw InvalidLevel("value " + std::to_string(theta) + " is not a level of '" + var.name + "'");
  }
  if (!std::isfinite(theta)) throw InvalidIntervention("non-finite intervention value");
}

void check_shift(const Scm& scm, std::size_t i, double delta) {
  if (!std::isfinite(delta)) throw InvalidIntervention("non-finite additive shift");
  if (delta != 0.0 && scm.variable(i).is_categorical()) {
    throw InvalidIntervention("additive shift on categorical variable '" + scm.variable(i).name +
                              "'");
  }
}

}  // namespace

InterventionPlan::InterventionPlan(const Scm& scm, const Intervention& iv)
    : InterventionPlan(scm.size()) {
  auto claim = [&](std::size_t i) {
    check_index(scm, i);
    if (ops_[i] != Op::keep) {
      throw InvalidIntervention("variable index " + std::to_string(i) +
                                " targeted more than once");
    }
  };
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, HardIntervention>) {
          if (x.indices.size() != x.values.size()) {
            throw InvalidIntervention("hard intervention: index/value count mismatch");
          }
          for (std::size_t k = 0; k < x.indices.size(); ++k) {
            claim(x.indices[k]);
            check_hard_value(scm, x.indices[k], x.values[k]);
            set(x.indices[k], x.values[k]);
          }
        } else if constexpr (std::is_same_v<T, AdditiveIntervention>) {
          if (x.indices.size() != x.shifts.size()) {
            throw InvalidIntervention("additive intervention: index/shift count mismatch");
          }
          for (std::size_t k = 0; k < x.indices.size(); ++k) {
            claim(x.indices[k]);
            check_shift(scm, x.indices[k], x.shifts[k]);
            shift(x.indices[k], x.shifts[k]);
          }
        } else {
          if (x.categorical.size() != x.values.size() || x.continuous.size() != x.shifts.size()) {
            throw InvalidIntervention("middle intervention: index/value count mismatch");
          }
          for (std::size_t k = 0; k < x.categorical.size(); ++k) {
            claim(x.categorical[k]);
            if (!scm.variable(x.categorical[k]).is_categorical()) {
              throw InvalidIntervention("middle intervention: index " +
                                        std::to_string(x.categorical[k]) + " is not categorical");
            }
            check_hard_value(scm, x.categorical[k], x.values[k]);
            set(x.categorical[k], x.values[k]);
          }
          for (std::size_t k = 0; k < x.continuous.size(); ++k) {
            claim(x.continuous[k]);
            if (scm.variable(x.continuous[k]).is_categorical()) {
              throw InvalidIntervention("middle intervention: index " +
                                        std::to_string(x.continuous[k]) + " is not continuous");
            }
            check_shift(scm, x.continuous[k], x.shifts[k]);
            shift(x.continuous[k], x.shifts[k]);
          }
        }
      },
      iv);
}

// ---------------------------------------------------------------------------
// Scm

Scm::Scm(std::string name, std::vector<VariableSpec> variables,
         std::vector<StructuralEquation> equations, std::vector<NoiseDistribution> noise)
    : name_(std::move(name)),
      variables_(std::move(variables)),
      equations_(std::move(equations)),
      noise_(std::move(noise)) {
  const std::size_t n = variables_.size();
  if (n == 0) throw InvalidModel("model has no variables");
  if (equations_.size() != n || noise_.size() != n) {
    throw InvalidModel("model '" + name_ + "': variables, equations and noise differ in length");
  }
  std::size_t protected_count = 0;
  for (const auto& v : variables_) {
    if (v.is_categorical()) {
      if (v.levels.empty()) throw InvalidModel("categorical '" + v.name + "' has no levels");
      if (!std::is_sorted(v.levels.begin(), v.levels.end()) ||
          std::adjacent_find(v.levels.begin(), v.levels.end()) != v.levels.end()) {
        throw InvalidModel("levels of '" + v.name + "' must be strictly increasing");
      }
    } else if (v.is_protected) {
      throw InvalidModel("protected variable '" + v.name + "' must be categorical");
    }
    protected_count += v.is_protected ? 1 : 0;
  }
  if (protected_count > 1) throw InvalidModel("at most one protected variable is supported");

  // Kahn's algorithm; the ready set is scanned from the lowest index so the order
  // is deterministic.
  std::vector<std::size_t> indegree(n, 0);
  std::vector<std::vector<std::size_t>> children(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& pa = equations_[i].parents();
    if (pa.size() > kMaxParents) throw InvalidModel("too many parents for '" + variables_[i].name + "'");
    for (std::size_t p : pa) {
      if (p >= n) throw InvalidModel("parent index out of range in '" + variables_[i].name + "'");
      if (p == i) throw InvalidModel("self-loop on '" + variables_[i].name + "'");
      children[p].push_back(i);
      ++indegree[i];
    }
  }
  std::vector<bool> done(n, false);
  order_.reserve(n);
  while (order_.size() < n) {
    std::size_t next = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (!done[i] && indegree[i] == 0) {
        next = i;
        break;
      }
    }
    if (next == n) throw InvalidModel("model '" + name_ + "' contains a directed cycle");
    done[next] = true;
    order_.push_back(next);
    for (std::size_t c : children[next]) --indegree[c];
  }
}

std::size_t Scm::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < variables_.size(); ++i) {
    if (variables_[i].name == name) return i;
  }
  throw std::out_of_range("no variable named '" + name + "' in model '" + name_ + "'");
}

std::vector<std::size_t> Scm::categorical_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < size(); ++i)
    if (variables_[i].is_categorical()) out.push_back(i);
  return out;
}

std::vector<std::size_t> Scm::continuous_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < size(); ++i)
    if (!variables_[i].is_categorical()) out.push_back(i);
  return out;
}

std::vector<std::size_t> Scm::actionable_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < size(); ++i)
    if (variables_[i].actionable) out.push_back(i);
  return out;
}

std::optional<std::size_t> Scm::protected_index() const {
  for (std::size_t i = 0; i < size(); ++i)
    if (variables_[i].is_protected) return i;
  return std::nullopt;
}

bool Scm::is_additive() const {
  return std::all_of(equations_.begin(), equations_.end(),
                     [](const StructuralEquation& e) { return e.is_additive(); });
}

bool Scm::is_linear() const {
  return std::all_of(equations_.begin(), equations_.end(), [](const StructuralEquation& e) {
    return e.linear_form().has_value() && !e.is_constant();
  });
}

bool Scm::is_ancestor(std::size_t ancestor, std::size_t node) const {
  std::vector<bool> seen(size(), false);
  std::vector<std::size_t> stack{node};
  while (!stack.empty()) {
    const std::size_t cur = stack.back();
    stack.pop_back();
    for (std::size_t p : equations_[cur].parents()) {
      if (p == ancestor) return true;
      if (!seen[p]) {
        seen[p] = true;
        stack.push_back(p);
      }
    }
  }
  return false;
}

void Scm::check_dimension(std::span<const double> x, const char* what) const {
  if (x.size() != size()) {
    throw DimensionMismatch(std::string(what) + " has " + std::to_string(x.size()) +
                            " entries, model '" + name_ + "' expects " + std::to_string(size()));
  }
}

void Scm::validate(std::span<const double> v) const {
  check_dimension(v, "instance");
  for (std::size_t i = 0; i < size(); ++i) {
    if (variables_[i].is_categorical() && !variables_[i].has_level(v[i])) {
      throw InvalidLevel("value " + std::to_string(v[i]) + " is not a level of '" +
                         variables_[i].name + "'");
    }
    if (!std::isfinite(v[i])) throw DimensionMismatch("non-finite value for '" + variables_[i].name + "'");
  }
}

namespace {

struct ParentBuffer {
  std::array<double, Scm::kMaxParents> data{};
  std::size_t n = 0;

  std::span<const double> gather(const std::vector<std::size_t>& parents,
                                 std::span<const double> values) {
    n = parents.size();
    for (std::size_t k = 0; k < n; ++k) data[k] = values[parents[k]];
    return {data.data(), n};
  }
};

}  // namespace

Noise Scm::abduct(std::span<const double> v) const {
  validate(v);
  Noise u(size());
  ParentBuffer buf;
  for (std::size_t i = 0; i < size(); ++i) {
    u[i] = equations_[i].invert(buf.gather(equations_[i].parents(), v), v[i]);
  }
  return u;
}

Instance Scm::generate(std::span<const double> u) const {
  return generate(u, InterventionPlan(size()));
}

Instance Scm::generate(std::span<const double> u, const InterventionPlan& plan) const {
  Instance v(size());
  generate_into(u, plan, v);
  return v;
}

void Scm::generate_into(std::span<const double> u, const InterventionPlan& plan,
                        std::span<double> out) const {
  check_dimension(u, "noise vector");
  if (plan.size() != size() || out.size() != size()) {
    throw DimensionMismatch("intervention plan or output buffer does not match model size");
  }
  ParentBuffer buf;
  for (std::size_t i : order_) {
    switch (plan.op(i)) {
      case InterventionPlan::Op::set:
        out[i] = plan.value(i);
        break;
      case InterventionPlan::Op::shift:
        out[i] = equations_[i].evaluate(buf.gather(equations_[i].parents(), out), u[i]) +
                 plan.value(i);
        break;
      case InterventionPlan::Op::keep:
        out[i] = equations_[i].evaluate(buf.gather(equations_[i].parents(), out), u[i]);
        break;
    }
  }
}

Scm Scm::apply_intervention(const Intervention& iv) const {
  const InterventionPlan plan(*this, iv);
  auto equations = equations_;
  auto noise = noise_;
  for (std::size_t i = 0; i < size(); ++i) {
    switch (plan.op(i)) {
      case InterventionPlan::Op::set:
        equations[i] = StructuralEquation::constant(plan.value(i));
        noise[i] = ConstantNoise{0.0};
        break;
      case InterventionPlan::Op::shift:
        equations[i] = equations[i].shifted(plan.value(i));
        break;
      case InterventionPlan::Op::keep:
        break;
    }
  }
  return Scm(name_, variables_, std::move(equations), std::move(noise));
}

Instance Scm::counterfactual(std::span<const double> v, const Intervention& iv) const {
  const InterventionPlan plan(*this, iv);
  return generate(abduct(v), plan);
}

std::vector<Instance> Scm::twins(std::span<const double> v, std::size_t protected_index) const {
  if (protected_index >= size() || !variables_[protected_index].is_categorical()) {
    throw InvalidIntervention("twins require a categorical protected index");
  }
  const Noise u = abduct(v);
  std::vector<Instance> out;
  InterventionPlan plan(size());
  for (int level : variables_[protected_index].levels) {
    plan.set(protected_index, level);
    out.push_back(generate(u, plan));
  }
  return out;
}

std::vector<Scm::Draw> Scm::sample(std::size_t n, std::mt19937_64& rng) const {
  std::vector<Draw> out;
  out.reserve(n);
  const InterventionPlan none(size());
  for (std::size_t k = 0; k < n; ++k) {
    Draw d;
    d.noise.resize(size());
    for (std::size_t i = 0; i < size(); ++i) d.noise[i] = draw(noise_[i], rng);
    d.values = generate(d.noise, none);
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<Scm::Draw> Scm::sample(std::size_t n, std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  return sample(n, rng);
}

}  // namespace faro

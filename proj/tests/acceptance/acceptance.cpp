// Acceptance harness: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <unistd.h>
#include <vector>

#include "faro/classifier.hpp"
#include "faro/datasets.hpp"
#include "faro/errors.hpp"
#include "faro/experiment.hpp"
#include "faro/fairness.hpp"
#include "faro/linear_scm.hpp"
#include "faro/metric.hpp"
#include "faro/norm.hpp"
#include "faro/recourse.hpp"
#include "faro/solver.hpp"
#include "oracles.hpp"

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

const double kInf = std::numeric_limits<double>::infinity();

double dual(double p) { return faro::conjugate(p); }

std::vector<double> restrict(std::span<const double> x, const std::vector<std::size_t>& idx) {
  std::vector<double> out;
  for (std::size_t i : idx) out.push_back(x[i]);
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<std::size_t> range(std::size_t from, std::size_t to) {
  std::vector<std::size_t> out;
  for (std::size_t i = from; i < to; ++i) out.push_back(i);
  return out;
}

faro::Instance sample_one(const faro::Scm& scm, std::mt19937_64& rng) {
  return scm.sample(1, rng).front().values;
}

/// Bias placing v and all its twins on the unfavorable side, `margin` (in L2 units of
/// w_X) away from the closest of them.
double bias_below_orbit(const faro::LinearClassifier& h, const faro::Scm& scm,
                        std::span<const double> v, const std::vector<std::size_t>& movable,
                        double margin) {
  double top = -kInf;
  for (const auto& t : scm.twins(v, 0)) top = std::max(top, dot(h.w, t));
  return top + margin * oracle::lp(restrict(h.w, movable), 2.0);
}

// 1 -----------------------------------------------------------------------------
Outcome criterion_counterfactual_closed_forms() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial % 4);
    const bool prot = trial % 2 == 0;
    const auto m = oracle::random_linear_model(rng, n, prot);
    const faro::LinearScm lscm(m.scm);
    const auto v = sample_one(m.scm, rng);
    std::normal_distribution<double> nd(0.0, 1.5);

    std::vector<double> delta(n, 0.0);
    for (std::size_t i = prot ? 1 : 0; i < n; ++i) delta[i] = nd(rng);
    const auto closed_add = faro::counterfactual_linear_additive(lscm.S(), v, delta);
    const auto oracle_add = oracle::counterfactual(m, v, std::vector<std::optional<double>>(n), delta);

    const std::size_t i = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    const double theta = (prot && i == 0) ? 1.0 - v[0] : nd(rng);
    const auto closed_hard = faro::counterfactual_linear_hard(lscm.S(), v, i, theta);
    std::vector<std::optional<double>> hard(n);
    hard[i] = theta;
    const auto oracle_hard = oracle::counterfactual(m, v, hard, std::vector<double>(n, 0.0));

    for (std::size_t k = 0; k < n; ++k) {
      worst = std::max(worst, std::abs(closed_add[k] - oracle_add[k]));
      worst = std::max(worst, std::abs(closed_hard[k] - oracle_hard[k]));
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-9 && secs < 5.0,
          "max |diff| " + fmt("%.3g", worst) + " over 100 models, " + fmt("%.2f", secs) + " s"};
}

// 2 -----------------------------------------------------------------------------
Outcome criterion_cost_vs_grid() {
  const auto t0 = Clock::now();
  const double step = 1e-3;
  const double tol = 2.0 * step * 2.0;
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> coord(-2.0, 2.0);
  std::uniform_real_distribution<double> gap(0.1, 3.0);
  double worst = 0.0;
  bool ok = true;
  const std::vector<std::size_t> movable = {1, 2};
  for (double p : {1.0, 2.0, kInf}) {
    for (int trial = 0; trial < 50; ++trial) {
      auto h = oracle::random_classifier(rng, 3);
      const faro::Instance v = {static_cast<double>(trial % 2), coord(rng), coord(rng)};
      const double wx = oracle::lp(restrict(h.w, movable), dual(p));
      // unfavorable, with closed-form cost below 4 so the optimum sits well inside the box
      const double g = -std::min(gap(rng), 4.0 * wx * 0.9);
      h.b = dot(h.w, v) - g;
      const double closed = faro::recourse_cost_immutable(h, v, faro::LpExponent(p), movable);
      const auto grid = oracle::grid_min_cost_2d(g, h.w[1], h.w[2], p, step, 10.0);
      if (!grid || *grid < closed - 1e-12) {
        ok = false;
        continue;
      }
      worst = std::max(worst, *grid - closed);
    }
  }
  const double secs = seconds_since(t0);
  return {ok && worst <= tol && secs < 60.0,
          "max grid - closed " + fmt("%.3g", worst) + " (tolerance " + fmt("%.3g", tol) + "), " +
              fmt("%.2f", secs) + " s"};
}

// 3 -----------------------------------------------------------------------------
Outcome criterion_optimal_action() {
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> coord(-3.0, 3.0);
  std::uniform_real_distribution<double> gap(0.05, 5.0);
  double worst_plane = 0.0;
  double worst_norm = 0.0;
  double worst_outside = 0.0;
  for (double p : {1.0, 2.0, kInf}) {
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 2 + static_cast<std::size_t>(trial % 4);
      auto h = oracle::random_classifier(rng, n);
      faro::Instance v(n);
      for (auto& x : v) x = coord(rng);
      std::vector<std::size_t> movable;
      for (std::size_t i = 0; i < n; ++i)
        if (i > 0 || trial % 3 == 0) movable.push_back(i);
      h.b = dot(h.w, v) + gap(rng);
      const faro::LpExponent lp(p);
      const auto act = faro::optimal_action_linear(h, v, lp, movable, faro::ActionKind::hard);
      const double r = faro::recourse_cost_immutable(h, v, lp, movable);
      worst_plane = std::max(worst_plane, std::abs(dot(h.w, act.landing) - h.b));
      worst_norm = std::max(worst_norm, std::abs(oracle::lp(act.eta, p) - r));
      for (std::size_t i = 0; i < n; ++i) {
        if (std::find(movable.begin(), movable.end(), i) == movable.end())
          worst_outside = std::max(worst_outside, std::abs(act.eta[i]));
        worst_outside = std::max(worst_outside, std::abs(act.landing[i] - v[i] - act.eta[i]));
      }
    }
  }
  return {worst_plane < 1e-9 && worst_norm < 1e-9 && worst_outside < 1e-12,
          "max |w.v'-b| " + fmt("%.3g", worst_plane) + ", max | ||eta||_p - r | " +
              fmt("%.3g", worst_norm) + " over 300 cases"};
}

// 4 -----------------------------------------------------------------------------
Outcome criterion_robust_extra_cost() {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> radius(0.1, 1.0);
  const std::vector<double> ps = {2.0, 1.0, kInf};
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const double p = ps[static_cast<std::size_t>(trial) % ps.size()];
    const std::size_t n = 3 + static_cast<std::size_t>(trial % 2);
    const auto m = oracle::random_linear_model(rng, n, true);
    const faro::LinearScm lscm(m.scm);
    auto h = oracle::random_classifier(rng, n);
    const auto v = sample_one(m.scm, rng);
    h.b = dot(h.w, v) + 1.0;
    const auto cont = range(1, n);
    const double delta = radius(rng);
    const double formula =
        faro::robust_extra_cost(h, lscm, faro::LpExponent(p), delta, cont, cont);

    const double wx = oracle::lp(restrict(h.w, cont), dual(p));
    const double base = dot(h.w, v);
    double sampled = 0.0;
    std::vector<double> shift(n, 0.0);
    const std::vector<std::optional<double>> none(n);
    for (int s = 0; s < 100000; ++s) {
      const auto dir = oracle::lp_sphere_point(cont.size(), p, rng);
      for (std::size_t k = 0; k < cont.size(); ++k) shift[cont[k]] = delta * dir[k];
      const auto x = oracle::counterfactual(m, v, none, shift);
      sampled = std::max(sampled, (base - dot(h.w, x)) / wx);
    }
    worst = std::max(worst, std::abs(formula - sampled) / formula);
  }
  return {worst < 0.01, "max relative error " + fmt("%.3g", worst) + " on 50 problems"};
}

// 5 -----------------------------------------------------------------------------
Outcome criterion_unfair_area() {
  const faro::Scm scm = faro::build_scm("lin");
  const faro::LinearScm lscm(scm);
  std::mt19937_64 rng(505);
  std::size_t disagreements = 0;
  std::size_t members = 0;
  std::size_t total = 0;
  for (int c = 0; c < 10; ++c) {
    auto h = oracle::random_classifier(rng, 3);
    const auto pool = scm.sample(1000, rng);
    // boundary through the middle of the sample, so the band is well populated
    double mean = 0.0;
    for (const auto& d : pool) mean += dot(h.w, d.values) / static_cast<double>(pool.size());
    h.b = mean + 0.25 * static_cast<double>(c % 3);
    for (const auto& d : pool) {
      const auto& v = d.values;
      const int label = h.predict(v);
      bool differs = false;
      for (const auto& t : scm.twins(v, 0)) differs |= h.predict(t) != label;
      const bool inside = faro::unfair_area_contains(h, lscm, v, 0);
      disagreements += inside != differs;
      members += inside;
      ++total;
    }
  }
  return {disagreements == 0 && members > 0 && members < total,
          std::to_string(disagreements) + " disagreements on " + std::to_string(total) +
              " instances (" + std::to_string(members) + " inside the area)"};
}

// 6 -----------------------------------------------------------------------------
double plain_sigma_ind(const faro::LinearClassifier& h, const faro::Scm& scm, std::size_t n,
                       std::uint64_t seed) {
  const faro::LinearScm lscm(scm);
  const std::vector<std::size_t> movable = {1, 2};
  const double wx = faro::weight_dual_norm(h, movable, faro::LpExponent(2.0));
  faro::CostTable table;
  const auto pool = scm.sample(n, seed);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto& v = pool[i].values;
    if (h.predict(v) > 0) continue;
    // twin decision values via the linear twin shift
    const auto scores = faro::twin_scores(h, lscm, v, 0);
    faro::InstanceRecord rec;
    rec.instance = i;
    rec.level = v[0];
    for (std::size_t k = 0; k < scores.size(); ++k) {
      const double cost = scores[k] >= 0.0 ? 0.0 : -scores[k] / wx;
      rec.twins.push_back({static_cast<double>(k), cost});
      if (static_cast<double>(k) == v[0]) rec.cost = cost;
    }
    table.push_back(rec);
  }
  return faro::sigma_ind(table);
}

Outcome criterion_sigma_ind() {
  const faro::Scm scm = faro::build_scm("lin");
  faro::LinearClassifier fair;
  fair.w = {-1.0, 0.0, -1.0};
  fair.b = 0.0;
  faro::LinearClassifier unfair;
  unfair.w = {-1.0, -1.0, -1.0};
  unfair.b = 0.0;
  const double s_fair = plain_sigma_ind(fair, scm, 1000, 606);
  const double s_unfair = plain_sigma_ind(unfair, scm, 1000, 606);
  return {s_fair == 0.0 && s_unfair > 0.0,
          "sigma_ind " + fmt("%.3g", s_fair) + " (w.S_A = 0), " + fmt("%.3g", s_unfair) +
              " (w.S_A = -2)"};
}

// 7 -----------------------------------------------------------------------------
Outcome criterion_decomposition() {
  const faro::Scm scm = faro::build_scm("lin");
  const faro::LinearScm lscm(scm);
  const Eigen::MatrixXd sx_inv = lscm.continuous_block().inverse();
  std::mt19937_64 rng(707);
  bool ok = true;
  double worst_ellipse = 0.0;
  int checks = 0;
  for (double delta : {0.05, 0.1}) {
    const auto spec = faro::make_perturbation(scm, faro::ProtectedMetricKind::zero, delta,
                                              faro::LpExponent(2.0), faro::LpExponent(2.0));
    for (int k = 0; k < 5; ++k) {
      const auto v = sample_one(scm, rng);
      const std::uint64_t seed = 7000 + static_cast<std::uint64_t>(k);
      const auto res = faro::decomposition_check(scm, v, spec, 10000, seed);
      ok &= res.holds;
      const auto twins = scm.twins(v, 0);
      // every direct point lies in the additive ellipse around the twin at its level
      for (const auto& x : res.direct) {
        const auto& t = twins[static_cast<std::size_t>(x[0])];
        Eigen::Vector2d d(x[1] - t[1], x[2] - t[2]);
        worst_ellipse = std::max(worst_ellipse, (sx_inv * d).norm() - delta);
      }
      const double other = 1.0 - v[0];
      const auto a = faro::sample_counterfactual_perturbation(scm, v, spec, 10000, seed);
      const auto b = faro::sample_counterfactual_perturbation(
          scm, twins[static_cast<std::size_t>(other)], spec, 10000, seed);
      ok &= faro::sampled_sets_match(a, b, 1e-6);
      checks += 2;
    }
  }
  ok &= worst_ellipse <= 1e-9;
  return {ok, std::to_string(checks) + " set comparisons at 1e-6, max ellipse excess " +
                  fmt("%.3g", worst_ellipse)};
}

// 8 -----------------------------------------------------------------------------
Outcome criterion_afrr_vs_bruteforce() {
  std::mt19937_64 rng(808);
  std::uniform_real_distribution<double> margin(0.2, 1.5);
  std::uniform_real_distribution<double> radius(0.1, 0.6);
  const std::vector<std::size_t> cont = {1, 2};
  double worst_ratio = 0.0;
  double worst_orbit = 0.0;
  bool ok = true;
  std::size_t n_problems = 0;
  while (n_problems < 30) {
    const auto m = oracle::random_linear_model(rng, 3, true);
    const faro::LinearScm lscm(m.scm);
    auto h = oracle::random_classifier(rng, 3);
    const auto v = sample_one(m.scm, rng);
    h.b = bias_below_orbit(h, m.scm, v, cont, margin(rng));
    const double delta = radius(rng);
    const faro::LpExponent p(2.0);
    const double closed = faro::afrr_cost(h, lscm, v, p, delta, 0, cont, cont);
    for (const auto& t : m.scm.twins(v, 0)) {
      worst_orbit = std::max(worst_orbit, std::abs(faro::afrr_cost(h, lscm, t, p, delta, 0, cont, cont) - closed));
    }

    faro::RecourseProblem prob;
    prob.scm = &m.scm;
    prob.model = h;
    prob.cost = faro::LpCost{p};
    prob.kind = faro::ActionKind::additive;
    prob.actionable = cont;
    prob.protected_index = 0;
    prob.perturbation = faro::make_perturbation(m.scm, faro::ProtectedMetricKind::zero, delta, p, p);
    prob.instance = v;
    // size the shift grid from the noise-space optimum
    const auto cf = faro::solve_closed_form(prob, lscm);
    double reach = 0.0;
    for (double a : faro::action_vector(m.scm, cf.action)) reach = std::max(reach, std::abs(a));
    faro::GridSpec grid;
    grid.points = 401;
    grid.scale = {1.0, 1.0, 1.0};
    grid.sigmas = 1.3 * reach + 0.05;
    grid.perturbation_samples = 2000;
    grid.seed = 80 + n_problems;
    const auto brute = faro::solve_bruteforce(prob, grid);
    if (brute.status != faro::SolveStatus::solved) {
      ok = false;
      ++n_problems;
      continue;
    }
    const double step = 2.0 * grid.sigmas / static_cast<double>(grid.points - 1);
    const Eigen::MatrixXd sx = lscm.continuous_block();
    const double col = sx.cwiseAbs().colwise().sum().maxCoeff();
    const double tol = 2.0 * 2.0 * step * col;
    worst_ratio = std::max(worst_ratio, std::abs(brute.cost - closed) / tol);
    ++n_problems;
  }
  ok &= worst_ratio <= 1.0 && worst_orbit <= 1e-12;
  return {ok, "max |brute - closed| / grid tolerance " + fmt("%.3g", worst_ratio) +
                  ", max orbit spread " + fmt("%.3g", worst_orbit) + " on 30 problems"};
}

// 9 -----------------------------------------------------------------------------
Outcome criterion_faro_limit() {
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> margin(0.1, 2.0);
  const std::vector<double> ps = {2.0, 1.0, kInf};
  double worst_excess = -kInf;
  double worst_decay = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    const double p = ps[static_cast<std::size_t>(trial) % ps.size()];
    const std::size_t n = 3 + static_cast<std::size_t>(trial % 2);
    const auto m = oracle::random_linear_model(rng, n, true);
    const faro::LinearScm lscm(m.scm);
    const auto cont = range(1, n);
    auto h = oracle::random_classifier(rng, n);
    const auto v = sample_one(m.scm, rng);
    h.b = bias_below_orbit(h, m.scm, v, cont, margin(rng));

    double max_twin = 0.0;
    for (const auto& t : m.scm.twins(v, 0)) {
      max_twin = std::max(max_twin, faro::recourse_cost_immutable(h, t, faro::LpExponent(p), cont));
    }
    // ||w_X^T S_X||_{p*} / ||w_X||_{p*} from the oracle's own S = (I - B)^-1
    const Eigen::MatrixXd S =
        (Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) - m.B).inverse();
    Eigen::VectorXd wx(static_cast<Eigen::Index>(cont.size()));
    Eigen::MatrixXd sx(static_cast<Eigen::Index>(cont.size()), static_cast<Eigen::Index>(cont.size()));
    for (std::size_t i = 0; i < cont.size(); ++i) {
      wx(static_cast<Eigen::Index>(i)) = h.w[cont[i]];
      for (std::size_t j = 0; j < cont.size(); ++j)
        sx(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            S(static_cast<Eigen::Index>(cont[i]), static_cast<Eigen::Index>(cont[j]));
    }
    const Eigen::VectorXd resp = sx.transpose() * wx;
    const std::vector<double> resp_v(resp.data(), resp.data() + resp.size());
    const std::vector<double> wx_v(wx.data(), wx.data() + wx.size());
    const double slope = oracle::lp(resp_v, dual(p)) / oracle::lp(wx_v, dual(p));

    for (double delta : {0.1, 0.01, 0.001}) {
      const double r = faro::afrr_cost(h, lscm, v, faro::LpExponent(p), delta, 0, cont, cont);
      const double gap = std::abs(r - max_twin);
      worst_excess = std::max(worst_excess, gap - (delta * slope + 1e-9));
      worst_decay = std::max(worst_decay, std::abs(gap / delta - slope) / std::max(1.0, slope));
    }
  }
  return {worst_excess <= 0.0 && worst_decay < 1e-6,
          "max gap over bound " + fmt("%.3g", worst_excess) + ", max |gap/delta - slope| " +
              fmt("%.3g", worst_decay) + " on 30 instances"};
}

// 10 ----------------------------------------------------------------------------
std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("faro_acceptance_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  return dir;
}

std::size_t worker_count() {
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

Outcome criterion_simulation_matrix() {
  const auto t0 = Clock::now();
  faro::ExperimentConfig cfg;
  cfg.scms = {"lin", "anm"};
  cfg.label_kinds = {"linear_aware", "linear_unaware", "nonlinear_aware", "nonlinear_unaware"};
  cfg.classifiers = {faro::parse_classifier_spec("glm:all"),
                     faro::parse_classifier_spec("glm:nonprotected"),
                     faro::parse_classifier_spec("svm:all"),
                     faro::parse_classifier_spec("svm:nonprotected")};
  cfg.deltas = {1.0, 0.5, 0.1};
  cfg.n_samples = 2000;
  cfg.jobs = worker_count();
  const auto dir = scratch_dir("matrix");
  cfg.output_dir = dir.string();
  const auto out = faro::run_simulation(cfg);
  const double secs = seconds_since(t0);

  std::size_t bad_fr = 0;
  std::size_t bad_pos = 0;
  std::size_t unfair_cells = 0;
  double max_fr = 0.0;
  for (const auto& r : out.rows) {
    if (!(r.sigma_FR <= 1e-9)) ++bad_fr;
    if (std::isfinite(r.sigma_FR)) max_fr = std::max(max_fr, r.sigma_FR);
    if (!r.fair_recourse_possible) {
      ++unfair_cells;
      if (!(r.sigma_R > 0.0 && r.sigma_AR > 0.0)) ++bad_pos;
    }
  }
  std::filesystem::remove_all(dir);
  const bool ok = out.rows.size() == 96 && bad_fr == 0 && bad_pos == 0 && secs < 900.0;
  return {ok, std::to_string(out.rows.size()) + " cells, max sigma_FR " + fmt("%.3g", max_fr) +
                  ", " + std::to_string(bad_pos) + "/" + std::to_string(unfair_cells) +
                  " cells without fair recourse lack positive sigma_R/sigma_AR, " + fmt("%.1f", secs) + " s"};
}

// 11 ----------------------------------------------------------------------------
std::vector<std::pair<double, std::string>> read_ratios(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("missing " + path.string());
  std::string line;
  std::getline(is, line);
  std::vector<std::pair<double, std::string>> out;
  while (std::getline(is, line)) {
    std::stringstream ss(line);
    std::string inst, ratio, kind;
    std::getline(ss, inst, ',');
    std::getline(ss, ratio, ',');
    std::getline(ss, kind, ',');
    out.emplace_back(std::stod(ratio), kind);
  }
  return out;
}

Outcome criterion_loan_ratios() {
  faro::ExperimentConfig cfg;
  cfg.scms = {"loan"};
  cfg.label_kinds = {"loan"};
  cfg.classifiers = {faro::parse_classifier_spec("glm:all")};
  cfg.deltas = {0.5};
  cfg.n_samples = 2000;
  cfg.grid_points = 21;
  cfg.perturbation_samples = 400;
  cfg.max_instances = 60;
  cfg.jobs = worker_count();
  const auto dir = scratch_dir("loan");
  cfg.output_dir = dir.string();
  faro::run_case_study_loan(cfg);

  double max_robust = 0.0;
  std::size_t n_robust = 0;
  for (const auto& [ratio, kind] : read_ratios(dir / "ratios_loan_loan_loan_glm0_all_d0.5.csv")) {
    if (kind != "robust") continue;
    max_robust = std::max(max_robust, std::max(ratio, 1.0 / ratio));
    ++n_robust;
  }
  double worst_faro = 0.0;
  std::size_t n_faro = 0;
  for (const auto& [ratio, kind] : read_ratios(dir / "ratios_loan_loan_glm0_all_faro.csv")) {
    worst_faro = std::max(worst_faro, std::abs(ratio - 1.0));
    ++n_faro;
  }
  std::filesystem::remove_all(dir);
  return {n_robust > 0 && n_faro > 0 && max_robust > 1.05 && worst_faro <= 1e-9,
          "robust max ratio " + fmt("%.4g", max_robust) + " over " + std::to_string(n_robust) +
              " pairs, FARO max |ratio - 1| " + fmt("%.3g", worst_faro) + " over " +
              std::to_string(n_faro) + " pairs"};
}

// 12 ----------------------------------------------------------------------------
Outcome criterion_weighted_sandwich() {
  std::mt19937_64 rng(1212);
  std::uniform_real_distribution<double> margin(0.2, 1.5);
  const std::vector<std::size_t> cont = {1, 2};
  const std::vector<faro::WeightedTerm> terms = {{0.5, faro::LpExponent(1.0)},
                                                 {0.5, faro::LpExponent(2.0)}};
  double worst_low = -kInf;
  double worst_high = -kInf;
  double worst_bounds = 0.0;
  bool solved = true;
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = oracle::random_linear_model(rng, 3, true);
    auto h = oracle::random_classifier(rng, 3);
    const auto v = sample_one(m.scm, rng);
    h.b = dot(h.w, v) + margin(rng);
    const double g = std::abs(dot(h.w, v) - h.b);
    const auto wx = restrict(h.w, cont);
    const double r1 = g / oracle::lp(wx, kInf);
    const double r2 = g / oracle::lp(wx, 2.0);
    const double lower = 0.5 * r1 + 0.5 * r2;
    const double upper = r1;
    const auto lib = faro::weighted_cost_bounds(h, v, terms, cont);
    worst_bounds = std::max({worst_bounds, std::abs(lib.first - lower), std::abs(lib.second - upper)});

    faro::RecourseProblem prob;
    prob.scm = &m.scm;
    prob.model = h;
    prob.cost = faro::WeightedLpCost{terms};
    prob.kind = faro::ActionKind::hard;
    prob.actionable = cont;
    prob.protected_index = 0;
    prob.instance = v;
    faro::GridSpec grid;
    grid.points = 801;
    grid.scale = {1.0, 1.0, 1.0};
    grid.sigmas = 1.2 * r1;
    const auto sol = faro::solve_bruteforce(prob, grid);
    if (sol.status != faro::SolveStatus::solved) {
      solved = false;
      continue;
    }
    const double step = 2.0 * grid.sigmas / static_cast<double>(grid.points - 1);
    worst_low = std::max(worst_low, lower - sol.cost);
    // the grid can only land on a displacement one step past the boundary
    worst_high = std::max(worst_high, (sol.cost - upper) / step);
  }
  return {solved && worst_low <= 1e-12 && worst_high <= 1.0 && worst_bounds < 1e-12,
          "max lower - brute " + fmt("%.3g", worst_low) + ", max (brute - upper)/step " +
              fmt("%.3g", worst_high) + " on 20 problems"};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "closed-form counterfactuals match abduction/action/prediction", criterion_counterfactual_closed_forms},
      {2, "closed-form recourse cost matches grid minimum", criterion_cost_vs_grid},
      {3, "optimal action lands on the boundary at cost r(v)", criterion_optimal_action},
      {4, "robust extra cost matches sampled maximum", criterion_robust_extra_cost},
      {5, "unfair area equals twin-label disagreement", criterion_unfair_area},
      {6, "sigma_ind zero iff w.S_A = 0", criterion_sigma_ind},
      {7, "counterfactual perturbation decomposes into twin perturbations", criterion_decomposition},
      {8, "fair robust cost matches brute-force solve", criterion_afrr_vs_bruteforce},
      {9, "fair robust cost tends to the worst twin cost linearly", criterion_faro_limit},
      {10, "simulation matrix: zero sigma_FR, positive sigma_R/sigma_AR", criterion_simulation_matrix},
      {11, "loan model: unequal robust ratios, unit FARO ratios", criterion_loan_ratios},
      {12, "weighted-norm cost within its bounds", criterion_weighted_sandwich},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : all) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("[%s] criterion %2d: %s -- %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}

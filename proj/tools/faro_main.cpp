#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "faro/classifier.hpp"
#include "faro/datasets.hpp"
#include "faro/errors.hpp"
#include "faro/experiment.hpp"
#include "faro/linear_scm.hpp"
#include "faro/metric.hpp"
#include "faro/recourse.hpp"
#include "faro/solver.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitUnfair = 4;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

std::string join(const std::vector<double>& xs, char sep = ',') {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? std::string(1, sep) : "") + num(xs[i]);
  return out;
}

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError(flag + ": '" + item + "' is not a number");
    }
  }
  return out;
}

faro::ClassifierModel parse_model(const std::string& text, std::size_t dim) {
  faro::LinearClassifier h;
  if (text.rfind("linear:", 0) == 0) {
    const std::string rest = text.substr(7);
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos) throw UsageError("--model: expected linear:<w0,w1,...>:<b>");
    h.w = parse_list(rest.substr(0, colon), "--model");
    h.b = parse_list(rest.substr(colon + 1), "--model").at(0);
  } else {
    const std::string path = text.rfind("file:", 0) == 0 ? text.substr(5) : text;
    if (!std::filesystem::exists(path)) throw UsageError("--model: no such model file '" + path + "'");
    h = faro::load_model(path);
  }
  if (h.w.size() != dim) {
    throw UsageError("--model: expected " + std::to_string(dim) + " weights, got " +
                     std::to_string(h.w.size()));
  }
  return h;
}

struct RecourseArgs {
  std::string scm = "lin";
  std::string model = "linear:-1,-1,-1:0";
  std::string instance = "1,3,0";
  std::string mode = "plain";
  std::string solver = "auto";
  std::string kind = "additive";
  std::string protected_metric = "zero";
  double delta = 1.0;
  double p = 2.0;
  std::size_t grid_points = 201;
  double grid_sigmas = 5.0;
  std::size_t perturbation_samples = 2000;
  std::uint64_t seed = 1;
};

struct Context {
  faro::Scm scm;
  std::optional<faro::LinearScm> lscm;
  faro::ClassifierModel model;
  faro::LpExponent p{2.0};
  std::vector<std::size_t> actionable;
  std::vector<std::size_t> perturbed;
  std::size_t protected_index = 0;
  faro::ProtectedMetricKind protected_metric = faro::ProtectedMetricKind::zero;
  faro::ActionKind kind = faro::ActionKind::additive;
  faro::GridSpec grid;
  bool closed = false;
};

faro::RecourseProblem problem_for(const Context& ctx, const std::string& mode, double delta,
                                  const faro::Instance& v) {
  faro::RecourseProblem prob;
  prob.scm = &ctx.scm;
  prob.model = ctx.model;
  prob.cost = faro::LpCost{ctx.p};
  prob.kind = ctx.kind;
  prob.actionable = ctx.actionable;
  prob.protected_index = ctx.protected_index;
  prob.instance = v;
  if (mode == "robust") {
    prob.perturbation = faro::make_additive_perturbation(ctx.scm, delta, ctx.p, ctx.perturbed);
  } else if (mode == "afrr" || mode == "faro") {
    prob.perturbation = faro::make_perturbation(ctx.scm, ctx.protected_metric, delta, ctx.p,
                                                faro::LpExponent(2.0), ctx.perturbed);
  }
  return prob;
}

faro::RecourseSolution solve_once(const Context& ctx, const std::string& mode, double delta,
                                  const faro::Instance& v) {
  const auto prob = problem_for(ctx, mode, delta, v);
  if (ctx.closed) return faro::solve_closed_form(prob, *ctx.lscm);
  return faro::solve_bruteforce(prob, ctx.grid);
}

struct ModeResult {
  faro::RecourseSolution solution;
  std::vector<std::pair<double, faro::RecourseSolution>> trajectory;
  std::optional<faro::RecourseSolution> limit;
  bool converged = true;
};

ModeResult solve_mode(const Context& ctx, const std::string& mode, double delta,
                      const faro::Instance& v) {
  ModeResult out;
  if (mode != "faro") {
    out.solution = solve_once(ctx, mode, delta, v);
    return out;
  }
  const std::vector<double> deltas = {delta, delta / 2.0, delta / 10.0, delta / 100.0};
  if (ctx.closed) {
    for (double d : deltas) out.trajectory.emplace_back(d, solve_once(ctx, "afrr", d, v));
    out.limit = solve_once(ctx, "afrr", 0.0, v);
    out.solution = out.trajectory.back().second;
  } else {
    const faro::FaroResult fr = faro::solve_faro(problem_for(ctx, "faro", delta, v), ctx.grid, deltas);
    for (std::size_t k = 0; k < fr.trajectory.size(); ++k) {
      out.trajectory.emplace_back(fr.deltas[k], fr.trajectory[k]);
    }
    out.solution = fr.solution;
    out.converged = fr.converged;
  }
  out.solution.validity = faro::Validity::faro;
  return out;
}

int run_recourse(const RecourseArgs& a) {
  Context ctx{faro::build_scm(a.scm), {}, {}, faro::LpExponent(a.p), {}, {}, 0, {}, {}, {}, false};
  const faro::Scm& scm = ctx.scm;
  const auto values = parse_list(a.instance, "--instance");
  if (values.size() != scm.size()) {
    std::string names;
    for (const auto& v : scm.variables()) names += (names.empty() ? "" : ",") + v.name;
    throw UsageError("--instance: expected " + std::to_string(scm.size()) + " values (" + names +
                     "), got " + std::to_string(values.size()));
  }
  try {
    scm.validate(values);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("--instance: ") + e.what());
  }
  ctx.model = parse_model(a.model, scm.size());
  ctx.protected_index = *scm.protected_index();
  ctx.protected_metric =
      a.protected_metric == "zero" ? faro::ProtectedMetricKind::zero : faro::ProtectedMetricKind::discrete;
  ctx.kind = a.kind == "hard" ? faro::ActionKind::hard : faro::ActionKind::additive;
  for (std::size_t i : scm.actionable_indices())
    if (!scm.variable(i).is_categorical()) ctx.actionable.push_back(i);
  for (std::size_t i : scm.continuous_indices())
    if (scm.variable(i).name != "education") ctx.perturbed.push_back(i);
  if (scm.is_linear()) ctx.lscm.emplace(scm);

  const bool closed_ok = ctx.lscm && faro::as_linear(ctx.model) &&
                         ctx.actionable == scm.continuous_indices() &&
                         ctx.perturbed == scm.continuous_indices();
  if (a.solver == "closed" && !closed_ok) {
    throw UsageError("--solver closed needs a linear model, a linear classifier and an actionable continuous part");
  }
  ctx.closed = a.solver == "closed" || (a.solver == "auto" && closed_ok);
  if (!ctx.closed) {
    ctx.grid.points = a.grid_points;
    ctx.grid.sigmas = a.grid_sigmas;
    ctx.grid.perturbation_samples = a.perturbation_samples;
    ctx.grid.seed = a.seed;
    const auto ds = faro::generate_dataset(scm, 2000, a.scm == "loan" ? "loan" : "linear_aware", a.seed);
    ctx.grid.scale = faro::column_stddev(ds, faro::Split::train);
  }

  const faro::Instance v = values;
  const ModeResult main = solve_mode(ctx, a.mode, a.delta, v);
  const auto& sol = main.solution;

  std::vector<std::pair<double, double>> twin_costs;
  if (sol.status == faro::SolveStatus::solved) {
    const auto& levels = scm.variable(ctx.protected_index).levels;
    const auto twins = scm.twins(v, ctx.protected_index);
    for (std::size_t k = 0; k < twins.size(); ++k) {
      const bool own = levels[k] == v[ctx.protected_index];
      const auto t = own ? main : solve_mode(ctx, a.mode, a.delta, twins[k]);
      twin_costs.emplace_back(levels[k], t.solution.status == faro::SolveStatus::solved
                                             ? t.solution.cost
                                             : std::nan(""));
    }
  }

  const bool valid = sol.status == faro::SolveStatus::solved &&
                     faro::decision_value(ctx.model, sol.counterfactual) >= -1e-9;
  std::string twins_text;
  for (const auto& [level, cost] : twin_costs) {
    twins_text += (twins_text.empty() ? "" : ";") + num(level) + ":" + num(cost);
  }
  std::cout << "result mode=" << a.mode << " solver=" << faro::to_string(sol.solver)
            << " status=" << faro::to_string(sol.status) << " delta=" << num(a.delta)
            << " p=" << num(a.p) << " cost=" << (sol.status == faro::SolveStatus::solved ? num(sol.cost) : "nan")
            << " action=" << faro::describe(sol.action)
            << " counterfactual=" << join(sol.counterfactual) << " valid=" << (valid ? "true" : "false")
            << " twin_costs=" << (twins_text.empty() ? "none" : twins_text) << '\n';

  std::cout << "\nModel      : " << scm.name() << " (" << (ctx.closed ? "closed form" : "grid search")
            << ")\n";
  std::cout << "Instance   : (" << join(v, ',') << ")\n";
  std::cout << "Mode       : " << a.mode;
  if (a.mode != "plain") std::cout << ", radius " << num(a.delta);
  std::cout << ", cost L_" << num(a.p) << '\n';
  if (sol.status == faro::SolveStatus::undefined_unfair) {
    std::cout << "Outcome    : undefined, the instance's twins are classified differently\n";
    return kExitUnfair;
  }
  if (sol.status == faro::SolveStatus::infeasible_in_grid) {
    std::cout << "Outcome    : no valid action within the search grid\n";
    return kExitInfeasible;
  }
  std::cout << "Action     : " << faro::describe(sol.action) << '\n';
  std::cout << "Result     : (" << join(sol.counterfactual, ',') << ")\n";
  std::cout << "Cost       : " << num(sol.cost) << '\n';
  std::cout << "Valid      : " << (valid ? "yes" : "no") << '\n';
  for (const auto& [level, cost] : twin_costs) {
    std::cout << "Twin " << scm.variable(ctx.protected_index).name << "=" << num(level) << " : cost "
              << num(cost) << '\n';
  }
  if (!main.trajectory.empty()) {
    std::cout << "Radius trajectory:\n";
    for (const auto& [d, s] : main.trajectory) {
      std::cout << "  delta=" << num(d) << "  cost="
                << (s.status == faro::SolveStatus::solved ? num(s.cost) : faro::to_string(s.status)) << '\n';
    }
    if (main.limit) std::cout << "  delta->0   cost=" << num(main.limit->cost) << '\n';
    if (!main.converged) std::cout << "  (sequence did not converge within tolerance)\n";
  }
  return kExitOk;
}

int run_experiment(const std::string& config_path, const std::string& output_dir,
                   std::size_t jobs, bool loan) {
  faro::ExperimentConfig cfg;
  if (!config_path.empty()) cfg = faro::load_config(config_path);
  else if (loan) {
    cfg.scms = {"loan"};
    cfg.label_kinds = {"loan"};
    cfg.grid_points = 21;
    cfg.max_instances = 60;
  }
  if (!output_dir.empty()) cfg.output_dir = output_dir;
  if (jobs > 0) cfg.jobs = jobs;
  const auto out = loan ? faro::run_case_study_loan(cfg) : faro::run_simulation(cfg);
  std::cout << "scm,label_kind,classifier,feature_subset,delta,sigma_R,sigma_AR,sigma_FR,"
               "n_excluded_unfair,n_infeasible\n";
  for (const auto& r : out.rows) {
    std::cout << r.scm << ',' << r.label_kind << ',' << r.classifier << ',' << r.feature_subset << ','
              << num(r.delta) << ',' << num(r.sigma_R) << ',' << num(r.sigma_AR) << ','
              << num(r.sigma_FR) << ',' << r.n_excluded_unfair << ',' << r.n_infeasible << '\n';
  }
  std::cerr << "wrote " << out.files.size() << " files to " << faro::resolve_output_dir(cfg) << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal algorithmic recourse: counterfactuals, robust and fair robust recourse"};
  app.require_subcommand(1);

  RecourseArgs ra;
  auto* rec = app.add_subcommand("recourse", "Solve recourse for a single instance");
  rec->add_option("--scm", ra.scm, "Built-in model")->check(CLI::IsMember({"lin", "anm", "loan"}));
  rec->add_option("--model", ra.model, "linear:<w0,w1,...>:<b> or a model file")->capture_default_str();
  rec->add_option("--instance", ra.instance, "Comma-separated values in variable order")->required();
  rec->add_option("--mode", ra.mode, "Validity notion")
      ->check(CLI::IsMember({"plain", "robust", "afrr", "faro"}))
      ->capture_default_str();
  rec->add_option("--delta", ra.delta, "Perturbation radius")->check(CLI::NonNegativeNumber)->capture_default_str();
  rec->add_option("--p", ra.p, "Cost norm exponent (>= 1)")->check(CLI::Range(1.0, 1e300))->capture_default_str();
  rec->add_option("--solver", ra.solver, "auto, closed or brute")
      ->check(CLI::IsMember({"auto", "closed", "brute"}))
      ->capture_default_str();
  rec->add_option("--action", ra.kind, "additive or hard")->check(CLI::IsMember({"additive", "hard"}));
  rec->add_option("--protected-metric", ra.protected_metric, "zero or discrete")
      ->check(CLI::IsMember({"zero", "discrete"}));
  rec->add_option("--grid-points", ra.grid_points, "Grid points per axis")->check(CLI::Range(3, 100001));
  rec->add_option("--grid-sigmas", ra.grid_sigmas, "Axis half-width in standard deviations");
  rec->add_option("--perturbation-samples", ra.perturbation_samples, "Sampled perturbation points");
  rec->add_option("--seed", ra.seed, "Sampling seed");

  std::string config_path;
  std::string output_dir;
  std::size_t jobs = 0;
  auto* sim = app.add_subcommand("simulate", "Run the simulation matrix from a config file");
  sim->add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);
  sim->add_option("--output-dir", output_dir, "Output directory (default $FARO_OUTPUT_DIR or faro_out)");
  sim->add_option("--jobs", jobs, "Worker threads");
  auto* loan = app.add_subcommand("loan", "Run the loan case study");
  loan->add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);
  loan->add_option("--output-dir", output_dir, "Output directory");
  loan->add_option("--jobs", jobs, "Worker threads");

  std::string gen_scm = "lin";
  std::string gen_labels = "linear_aware";
  std::size_t gen_n = 10000;
  std::uint64_t gen_seed = 1;
  std::string gen_out;
  auto* gen = app.add_subcommand("generate", "Sample a labelled dataset to CSV");
  gen->add_option("--scm", gen_scm)->check(CLI::IsMember({"lin", "anm", "loan"}));
  gen->add_option("--labels", gen_labels, "Ground-truth kind, or loan");
  gen->add_option("--n", gen_n)->check(CLI::Range(10, 100000000));
  gen->add_option("--seed", gen_seed);
  gen->add_option("--out", gen_out)->required();

  std::string tr_data;
  std::string tr_kind = "glm";
  std::string tr_features = "all";
  std::string tr_scm = "lin";
  std::string tr_out;
  faro::TrainConfig tc;
  auto* train = app.add_subcommand("train", "Train a linear classifier on the train split of a CSV");
  train->add_option("--data", tr_data)->required()->check(CLI::ExistingFile);
  train->add_option("--scm", tr_scm, "Model supplying variable names and the protected index")
      ->check(CLI::IsMember({"lin", "anm", "loan"}));
  train->add_option("--kind", tr_kind)->check(CLI::IsMember({"glm", "svm"}));
  train->add_option("--features", tr_features)->check(CLI::IsMember({"all", "nonprotected"}));
  train->add_option("--out", tr_out)->required();
  train->add_option("--epochs", tc.epochs)->check(CLI::PositiveNumber);
  train->add_option("--learning-rate", tc.learning_rate)->check(CLI::PositiveNumber);
  train->add_option("--l2", tc.l2)->check(CLI::NonNegativeNumber);
  train->add_option("--seed", tc.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*rec) return run_recourse(ra);
    if (*sim) return run_experiment(config_path, output_dir, jobs, false);
    if (*loan) return run_experiment(config_path, output_dir, jobs, true);
    if (*gen) {
      const auto ds = faro::generate_dataset(faro::build_scm(gen_scm), gen_n, gen_labels, gen_seed);
      faro::write_csv(gen_out, ds);
      return kExitOk;
    }
    if (*train) {
      const faro::Scm scm = faro::build_scm(tr_scm);
      const auto ds = faro::read_csv(tr_data);
      tc.features = tr_features == "all" ? faro::FeatureSubset::all : faro::FeatureSubset::nonprotected;
      tc.protected_index = scm.protected_index();
      for (const auto& v : scm.variables()) tc.names.push_back(v.name);
      const auto data = ds.subset(faro::Split::train);
      const auto res = tr_kind == "glm" ? faro::train_logistic(data, tc) : faro::train_linear_svm(data, tc);
      faro::save_model(tr_out, res.model);
      std::cout << "train_accuracy=" << num(res.train_accuracy) << '\n';
      return kExitOk;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const faro::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

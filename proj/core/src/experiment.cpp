#include "faro/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "faro/datasets.hpp"
#include "faro/errors.hpp"
#include "faro/fairness.hpp"
#include "faro/linear_scm.hpp"

namespace faro {

// ---------------------------------------------------------------------------
// Configuration

std::string ClassifierSpec::label() const { return kind + ":" + (features == FeatureSubset::all ? "all" : "nonprotected"); }

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  if (v == "inf" || v == "infinity") return kInfinity;
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': '" + v + "' is not a number");
  }
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError("key '" + key + "': '" + v + "' is not a nonnegative integer");
  }
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': '" + v + "' is out of range");
  }
}

std::vector<double> parse_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& item : split_list(v)) out.push_back(parse_double(key, item));
  return out;
}

std::string format_double(double x) {
  if (x == kInfinity) return "inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string short_double(double x) {
  if (x == kInfinity) return "inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

std::string join(const std::vector<std::string>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? ", " : "") + xs[i];
  return out;
}

std::string join(const std::vector<double>& xs) {
  std::vector<std::string> s;
  for (double x : xs) s.push_back(short_double(x));
  return join(s);
}

std::string subset_name(FeatureSubset f) { return f == FeatureSubset::all ? "all" : "nonprotected"; }

std::string classifier_text(const ClassifierSpec& c) {
  if (c.kind == "fixed") {
    std::string w;
    for (std::size_t i = 0; i < c.fixed.w.size(); ++i) w += (i ? "," : "") + short_double(c.fixed.w[i]);
    return "fixed:" + w + ":" + short_double(c.fixed.b);
  }
  if (c.kind == "model") return "model:" + c.path;
  return c.kind + ":" + subset_name(c.features);
}

}  // namespace

ClassifierSpec parse_classifier_spec(const std::string& text) {
  ClassifierSpec spec;
  const auto colon = text.find(':');
  spec.kind = trim(text.substr(0, colon));
  const std::string rest = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (spec.kind == "glm" || spec.kind == "svm") {
    if (rest.empty() || rest == "all") spec.features = FeatureSubset::all;
    else if (rest == "nonprotected") spec.features = FeatureSubset::nonprotected;
    else throw ConfigError("classifier '" + text + "': feature subset must be all or nonprotected");
  } else if (spec.kind == "fixed") {
    const auto second = rest.find(':');
    if (second == std::string::npos) {
      throw ConfigError("classifier '" + text + "': expected fixed:<w0,w1,...>:<b>");
    }
    spec.fixed.w = parse_doubles("classifiers", rest.substr(0, second));
    spec.fixed.b = parse_double("classifiers", trim(rest.substr(second + 1)));
    if (spec.fixed.w.empty()) throw ConfigError("classifier '" + text + "': no weights");
  } else if (spec.kind == "model") {
    if (rest.empty()) throw ConfigError("classifier '" + text + "': missing model path");
    spec.path = rest;
  } else {
    throw ConfigError("unknown classifier kind '" + spec.kind + "' (glm, svm, fixed, model)");
  }
  return spec;
}

ExperimentConfig parse_config(std::istream& is) {
  ExperimentConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "scms") {
      cfg.scms = split_list(value);
    } else if (key == "label_kinds") {
      cfg.label_kinds = split_list(value);
    } else if (key == "classifiers") {
      cfg.classifiers.clear();
      for (const auto& item : split_list(value, ';')) cfg.classifiers.push_back(parse_classifier_spec(item));
    } else if (key == "deltas") {
      cfg.deltas = parse_doubles(key, value);
    } else if (key == "faro_deltas") {
      cfg.faro_deltas = parse_doubles(key, value);
    } else if (key == "cost_p") {
      cfg.cost_p = parse_double(key, value);
    } else if (key == "metric_q") {
      cfg.metric_q = parse_double(key, value);
    } else if (key == "product_norm") {
      cfg.product_norm = parse_double(key, value);
    } else if (key == "protected_metric") {
      if (value == "zero") cfg.protected_metric = ProtectedMetricKind::zero;
      else if (value == "discrete") cfg.protected_metric = ProtectedMetricKind::discrete;
      else throw ConfigError("protected_metric must be zero or discrete");
    } else if (key == "n_samples") {
      cfg.n_samples = parse_uint(key, value);
    } else if (key == "seed") {
      cfg.seed = parse_uint(key, value);
    } else if (key == "grid_points") {
      cfg.grid_points = parse_uint(key, value);
    } else if (key == "grid_sigmas") {
      cfg.grid_sigmas = parse_double(key, value);
    } else if (key == "grid_widen_attempts") {
      cfg.grid_widen_attempts = parse_uint(key, value);
    } else if (key == "perturbation_samples") {
      cfg.perturbation_samples = parse_uint(key, value);
    } else if (key == "max_instances") {
      cfg.max_instances = parse_uint(key, value);
    } else if (key == "solver") {
      cfg.solver = value;
    } else if (key == "learning_rate") {
      cfg.learning_rate = parse_double(key, value);
    } else if (key == "epochs") {
      cfg.epochs = static_cast<int>(parse_uint(key, value));
    } else if (key == "l2") {
      cfg.l2 = parse_double(key, value);
    } else if (key == "jobs") {
      cfg.jobs = parse_uint(key, value);
    } else if (key == "output_dir") {
      cfg.output_dir = value;
    } else {
      throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(is);
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.scms.empty()) throw ConfigError("scms must list at least one model");
  for (const auto& s : cfg.scms) {
    const auto names = builtin_scm_names();
    if (std::find(names.begin(), names.end(), s) == names.end()) {
      throw ConfigError("unknown model '" + s + "'");
    }
  }
  if (cfg.label_kinds.empty()) throw ConfigError("label_kinds must not be empty");
  for (const auto& k : cfg.label_kinds) {
    if (k == "loan") continue;
    try {
      (void)parse_label_kind(k);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (cfg.classifiers.empty()) throw ConfigError("classifiers must not be empty");
  auto check_radii = [](const std::vector<double>& d, const char* key) {
    if (d.empty()) throw ConfigError(std::string(key) + " must not be empty");
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (!(d[i] > 0.0) || !std::isfinite(d[i])) throw ConfigError(std::string(key) + " must be positive");
      if (i > 0 && !(d[i] < d[i - 1])) throw ConfigError(std::string(key) + " must be strictly descending");
    }
  };
  check_radii(cfg.deltas, "deltas");
  check_radii(cfg.faro_deltas, "faro_deltas");
  for (double p : {cfg.cost_p, cfg.metric_q, cfg.product_norm}) {
    if (std::isnan(p) || p < 1.0) throw ConfigError("norm exponents must satisfy 1 <= p <= inf");
  }
  if (cfg.n_samples < 100) throw ConfigError("n_samples must be at least 100");
  if (cfg.grid_points < 3) throw ConfigError("grid_points must be at least 3");
  if (!(cfg.grid_sigmas > 0.0)) throw ConfigError("grid_sigmas must be positive");
  if (cfg.perturbation_samples < 1) throw ConfigError("perturbation_samples must be positive");
  if (cfg.solver != "auto" && cfg.solver != "brute") throw ConfigError("solver must be auto or brute");
  if (!(cfg.learning_rate > 0.0) || cfg.epochs <= 0) {
    throw ConfigError("learning_rate and epochs must be positive");
  }
  if (cfg.jobs < 1) throw ConfigError("jobs must be at least 1");
}

std::string echo_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  std::vector<std::string> clf;
  for (const auto& c : cfg.classifiers) clf.push_back(classifier_text(c));
  std::string clf_text;
  for (std::size_t i = 0; i < clf.size(); ++i) clf_text += (i ? "; " : "") + clf[i];
  os << "scms = " << join(cfg.scms) << '\n'
     << "label_kinds = " << join(cfg.label_kinds) << '\n'
     << "classifiers = " << clf_text << '\n'
     << "deltas = " << join(cfg.deltas) << '\n'
     << "faro_deltas = " << join(cfg.faro_deltas) << '\n'
     << "cost_p = " << short_double(cfg.cost_p) << '\n'
     << "metric_q = " << short_double(cfg.metric_q) << '\n'
     << "product_norm = " << short_double(cfg.product_norm) << '\n'
     << "protected_metric = "
     << (cfg.protected_metric == ProtectedMetricKind::zero ? "zero" : "discrete") << '\n'
     << "n_samples = " << cfg.n_samples << '\n'
     << "seed = " << cfg.seed << '\n'
     << "grid_points = " << cfg.grid_points << '\n'
     << "grid_sigmas = " << short_double(cfg.grid_sigmas) << '\n'
     << "grid_widen_attempts = " << cfg.grid_widen_attempts << '\n'
     << "perturbation_samples = " << cfg.perturbation_samples << '\n'
     << "max_instances = " << cfg.max_instances << '\n'
     << "solver = " << cfg.solver << '\n'
     << "learning_rate = " << short_double(cfg.learning_rate) << '\n'
     << "epochs = " << cfg.epochs << '\n'
     << "l2 = " << short_double(cfg.l2) << '\n'
     << "jobs = " << cfg.jobs << '\n'
     << "output_dir = " << cfg.output_dir << '\n';
  return os.str();
}

std::string resolve_output_dir(const ExperimentConfig& cfg) {
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') return env;
  return "faro_out";
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Cell evaluation

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

enum class CostKind { plain, robust, afrr };

struct Cell {
  const Scm* scm = nullptr;
  std::optional<LinearScm> lscm;
  ClassifierModel model;
  std::size_t protected_index = 0;
  std::vector<std::size_t> actionable;
  std::vector<std::size_t> perturbed;
  LpExponent p{2.0};
  LpExponent q{2.0};
  LpExponent combine{2.0};
  ProtectedMetricKind protected_metric = ProtectedMetricKind::zero;
  GridSpec grid;
  bool closed = false;
};

RecourseProblem make_problem(const Cell& cell, CostKind kind, double delta, const Instance& v) {
  RecourseProblem prob;
  prob.scm = cell.scm;
  prob.model = cell.model;
  prob.cost = LpCost{cell.p};
  prob.kind = ActionKind::additive;
  prob.actionable = cell.actionable;
  prob.protected_index = cell.protected_index;
  prob.instance = v;
  if (kind == CostKind::robust) {
    prob.perturbation = make_additive_perturbation(*cell.scm, delta, cell.q, cell.perturbed);
  } else if (kind == CostKind::afrr) {
    prob.perturbation =
        make_perturbation(*cell.scm, cell.protected_metric, delta, cell.q, cell.combine, cell.perturbed);
  }
  return prob;
}

RecourseSolution solve(const Cell& cell, CostKind kind, double delta, const Instance& v,
                       std::uint64_t seed) {
  const RecourseProblem prob = make_problem(cell, kind, delta, v);
  if (cell.closed) return solve_closed_form(prob, *cell.lscm);
  GridSpec grid = cell.grid;
  grid.seed = seed;
  return solve_bruteforce(prob, grid);
}

/// Costs of v and of each twin (level order) for one cost kind.
struct OrbitCosts {
  std::vector<double> costs;
  bool infeasible = false;
  bool unfair = false;
};

OrbitCosts orbit_costs(const Cell& cell, CostKind kind, double delta, const Instance& v,
                       const std::vector<Instance>& twins, std::uint64_t seed) {
  OrbitCosts out;
  const auto& levels = cell.scm->variable(cell.protected_index).levels;
  for (std::size_t k = 0; k < twins.size(); ++k) {
    const bool own = levels[k] == v[cell.protected_index];
    const RecourseSolution s = solve(cell, kind, delta, own ? v : twins[k], seed);
    if (s.status == SolveStatus::undefined_unfair) out.unfair = true;
    if (s.status == SolveStatus::infeasible_in_grid) out.infeasible = true;
    out.costs.push_back(s.cost);
  }
  return out;
}

/// Per-kind results for one instance. Empty cost vectors mean the kind was not solved.
struct InstanceResult {
  std::size_t index = 0;
  double level = 0.0;
  /// Some twin is labelled differently; fair robust recourse is undefined.
  bool unfair = false;
  bool plain_infeasible = false;
  bool robust_infeasible = false;
  bool afrr_infeasible = false;
  std::vector<double> levels;
  std::vector<double> plain;
  std::vector<double> robust;
  std::vector<double> afrr;

  [[nodiscard]] bool any_infeasible() const {
    return plain_infeasible || robust_infeasible || afrr_infeasible;
  }
};

InstanceRecord to_record(const InstanceResult& r, const std::vector<double>& costs, bool unfair,
                         bool infeasible) {
  InstanceRecord rec;
  rec.instance = r.index;
  rec.level = r.level;
  rec.unfair_area = unfair;
  rec.infeasible = infeasible;
  if (unfair || infeasible || costs.size() != r.levels.size()) return rec;
  for (std::size_t k = 0; k < r.levels.size(); ++k) {
    if (r.levels[k] == r.level) rec.cost = costs[k];
    rec.twins.push_back({r.levels[k], costs[k]});
  }
  return rec;
}

double safe_sigma(const CostTable& t) {
  try {
    return sigma_relative(t);
  } catch (const std::domain_error&) {
    return std::nan("");
  }
}

class CsvFile {
 public:
  explicit CsvFile(const std::string& path) : path_(path), os_(path, std::ios::binary) {
    if (!os_) throw std::runtime_error("cannot write '" + path + "'");
  }
  std::ofstream& stream() { return os_; }
  [[nodiscard]] const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream os_;
};

struct ClassifierBuild {
  ClassifierModel model;
  std::string name;
  std::string subset;
};

ClassifierBuild build_classifier(const ClassifierSpec& spec, const Scm& scm, const Dataset& ds,
                                 const ExperimentConfig& cfg) {
  ClassifierBuild out;
  out.name = spec.kind;
  out.subset = subset_name(spec.features);
  if (spec.kind == "fixed") {
    if (spec.fixed.w.size() != scm.size()) {
      throw ConfigError("fixed classifier has " + std::to_string(spec.fixed.w.size()) +
                        " weights, model '" + scm.name() + "' has " + std::to_string(scm.size()) +
                        " variables");
    }
    LinearClassifier h = spec.fixed;
    const auto p = scm.protected_index();
    if (p && h.w[*p] == 0.0) out.subset = "nonprotected";
    out.model = h;
    return out;
  }
  if (spec.kind == "model") {
    LinearClassifier h = load_model(spec.path);
    if (h.w.size() != scm.size()) throw ConfigError("model file dimension does not match '" + scm.name() + "'");
    out.subset = subset_name(h.features);
    out.model = h;
    return out;
  }
  TrainConfig tc;
  tc.learning_rate = cfg.learning_rate;
  tc.epochs = cfg.epochs;
  tc.l2 = cfg.l2;
  tc.seed = cfg.seed;
  tc.features = spec.features;
  tc.protected_index = scm.protected_index();
  for (const auto& v : scm.variables()) tc.names.push_back(v.name);
  const LabeledData train = ds.subset(Split::train);
  out.model = spec.kind == "glm" ? train_logistic(train, tc).model : train_linear_svm(train, tc).model;
  return out;
}

struct CellPlan {
  std::string scm_name;
  std::string label_kind;
  std::vector<std::size_t> perturbed;
  bool with_faro = false;
};

void write_cost_rows(std::ostream& os, const std::vector<InstanceResult>& results) {
  os << "instance,twin_level,r,r_robust,r_faro\n";
  auto cell = [](const std::vector<double>& c, std::size_t k, bool infeasible) {
    return k < c.size() && !infeasible ? format_double(c[k]) : std::string("nan");
  };
  for (const auto& r : results) {
    for (std::size_t k = 0; k < r.levels.size(); ++k) {
      os << r.index << ',' << short_double(r.levels[k]) << ',' << cell(r.plain, k, r.plain_infeasible)
         << ',' << cell(r.robust, k, r.robust_infeasible) << ','
         << cell(r.afrr, k, r.unfair || r.afrr_infeasible) << '\n';
    }
  }
}

void write_ratio_rows(std::ostream& os, const CostTable& table, const std::string& kind) {
  for (const auto& e : cost_ratio_distribution(table).ratios) {
    os << e.instance << ',' << format_double(e.ratio) << ',' << kind << '\n';
  }
}

std::string cell_name(const std::string& scm, const std::string& label, const ClassifierBuild& c,
                      std::size_t clf_index, double delta) {
  return scm + "_" + label + "_" + c.name + std::to_string(clf_index) + "_" + c.subset + "_d" +
         short_double(delta);
}

RunOutput run_cells(const ExperimentConfig& cfg, const std::vector<CellPlan>& plans,
                    const std::string& prefix) {
  validate(cfg);
  const std::string dir = resolve_output_dir(cfg);
  std::filesystem::create_directories(dir);
  RunOutput out;

  {
    std::ofstream echo(dir + "/config.txt", std::ios::binary);
    echo << echo_config(cfg);
    out.files.push_back(dir + "/config.txt");
  }
  CsvFile results(dir + "/" + prefix + "results.csv");
  results.stream() << "scm,label_kind,classifier,feature_subset,delta,sigma_R,sigma_AR,sigma_FR,"
                      "n_excluded_unfair,n_infeasible,n_instances,fair_recourse_possible\n";
  CsvFile timing(dir + "/" + prefix + "timing.csv");
  timing.stream() << "scm,label_kind,classifier,feature_subset,delta,wall_time\n";
  out.files.push_back(results.path());
  out.files.push_back(timing.path());

  for (const auto& plan : plans) {
    const Scm scm = build_scm(plan.scm_name);
    const Dataset ds = generate_dataset(scm, cfg.n_samples, plan.label_kind, cfg.seed);
    const auto p_index = scm.protected_index();
    if (!p_index) throw ConfigError("model '" + scm.name() + "' has no protected variable");

    for (std::size_t ci = 0; ci < cfg.classifiers.size(); ++ci) {
      const auto started = std::chrono::steady_clock::now();
      const ClassifierBuild clf = build_classifier(cfg.classifiers[ci], scm, ds, cfg);

      Cell cell;
      cell.scm = &scm;
      cell.model = clf.model;
      cell.protected_index = *p_index;
      for (std::size_t i : scm.actionable_indices())
        if (!scm.variable(i).is_categorical()) cell.actionable.push_back(i);
      cell.perturbed = plan.perturbed;
      cell.p = LpExponent(cfg.cost_p);
      cell.q = LpExponent(cfg.metric_q);
      cell.combine = LpExponent(cfg.product_norm);
      cell.protected_metric = cfg.protected_metric;
      cell.grid.points = cfg.grid_points;
      cell.grid.sigmas = cfg.grid_sigmas;
      cell.grid.scale = column_stddev(ds, Split::train);
      cell.grid.perturbation_samples = cfg.perturbation_samples;
      cell.grid.widen_attempts = cfg.grid_widen_attempts;
      if (scm.is_linear()) cell.lscm.emplace(scm);
      cell.closed = cfg.solver == "auto" && cell.lscm && as_linear(cell.model) &&
                    cfg.cost_p == cfg.metric_q &&
                    cell.perturbed == scm.continuous_indices() &&
                    cell.actionable == scm.continuous_indices();

      // Negatively classified test instances.
      std::vector<std::size_t> targets;
      for (std::size_t i : ds.indices(Split::test)) {
        if (predict(cell.model, ds.x[i]) < 0) targets.push_back(i);
        if (cfg.max_instances && targets.size() == cfg.max_instances) break;
      }

      bool fair_possible = false;
      if (cell.lscm && as_linear(cell.model)) {
        fair_possible = fair_recourse_possible(*as_linear(cell.model), *cell.lscm, *p_index);
      } else {
        fair_possible = true;
        for (std::size_t i : targets) {
          const double s = decision_value(cell.model, ds.x[i]);
          for (const auto& t : scm.twins(ds.x[i], *p_index)) {
            if (std::abs(decision_value(cell.model, t) - s) > 1e-9) fair_possible = false;
          }
        }
      }

      const std::uint64_t cell_seed = mix(cfg.seed ^ fnv1a(plan.scm_name + "/" + plan.label_kind) ^
                                          mix(ci + 1));
      const auto& levels = scm.variable(*p_index).levels;

      // Plain recourse does not depend on the radius.
      std::vector<InstanceResult> base(targets.size());
      std::vector<std::vector<Instance>> twins(targets.size());
      parallel_for(targets.size(), cfg.jobs, [&](std::size_t k) {
        const Instance& v = ds.x[targets[k]];
        InstanceResult& r = base[k];
        r.index = targets[k];
        r.level = v[*p_index];
        r.levels.assign(levels.begin(), levels.end());
        twins[k] = scm.twins(v, *p_index);
        const int label = predict(cell.model, v);
        for (const auto& t : twins[k]) {
          if (predict(cell.model, t) != label) r.unfair = true;
        }
        const OrbitCosts plain = orbit_costs(cell, CostKind::plain, 0.0, v, twins[k], mix(cell_seed ^ r.index));
        r.plain = plain.costs;
        r.plain_infeasible = plain.infeasible;
      });
      const double base_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

      for (double delta : cfg.deltas) {
        const auto cell_started = std::chrono::steady_clock::now();
        std::vector<InstanceResult> rs = base;
        parallel_for(rs.size(), cfg.jobs, [&](std::size_t k) {
          InstanceResult& r = rs[k];
          const Instance& v = ds.x[r.index];
          const std::uint64_t seed = mix(cell_seed ^ r.index);
          const OrbitCosts robust = orbit_costs(cell, CostKind::robust, delta, v, twins[k], seed);
          r.robust = robust.costs;
          r.robust_infeasible = robust.infeasible;
          if (r.unfair) return;
          const OrbitCosts afrr = orbit_costs(cell, CostKind::afrr, delta, v, twins[k], seed);
          r.afrr = afrr.costs;
          r.unfair = afrr.unfair;
          r.afrr_infeasible = afrr.infeasible;
        });

        // Plain and robust recourse stay defined inside the unfair area; only the
        // fair robust table leaves those instances out.
        CostTable plain_t, robust_t, afrr_t;
        std::size_t n_infeasible = 0;
        for (const auto& r : rs) {
          plain_t.push_back(to_record(r, r.plain, false, r.plain_infeasible));
          robust_t.push_back(to_record(r, r.robust, false, r.robust_infeasible));
          afrr_t.push_back(to_record(r, r.afrr, r.unfair, r.afrr_infeasible));
          n_infeasible += r.any_infeasible();
        }
        ResultRow row;
        row.scm = plan.scm_name;
        row.label_kind = plan.label_kind;
        row.classifier = clf.name;
        row.feature_subset = clf.subset;
        row.delta = delta;
        row.sigma_R = safe_sigma(plain_t);
        row.sigma_AR = safe_sigma(robust_t);
        row.sigma_FR = safe_sigma(afrr_t);
        row.n_excluded_unfair = count_excluded(afrr_t).unfair_area;
        row.n_infeasible = n_infeasible;
        row.n_instances = rs.size();
        row.fair_recourse_possible = fair_possible;

        const std::string name = prefix + cell_name(plan.scm_name, plan.label_kind, clf, ci, delta);
        {
          CsvFile costs(dir + "/costs_" + name + ".csv");
          write_cost_rows(costs.stream(), rs);
          out.files.push_back(costs.path());
        }
        {
          CsvFile ratios(dir + "/ratios_" + name + ".csv");
          ratios.stream() << "instance,ratio,kind\n";
          write_ratio_rows(ratios.stream(), plain_t, "plain");
          write_ratio_rows(ratios.stream(), robust_t, "robust");
          write_ratio_rows(ratios.stream(), afrr_t, "fair_robust");
          out.files.push_back(ratios.path());
        }

        row.wall_time = base_seconds / static_cast<double>(cfg.deltas.size()) +
                        std::chrono::duration<double>(std::chrono::steady_clock::now() - cell_started).count();
        results.stream() << row.scm << ',' << row.label_kind << ',' << row.classifier << ','
                         << row.feature_subset << ',' << short_double(row.delta) << ','
                         << format_double(row.sigma_R) << ',' << format_double(row.sigma_AR) << ','
                         << format_double(row.sigma_FR) << ',' << row.n_excluded_unfair << ','
                         << row.n_infeasible << ',' << row.n_instances << ','
                         << (row.fair_recourse_possible ? "true" : "false") << '\n';
        timing.stream() << row.scm << ',' << row.label_kind << ',' << row.classifier << ','
                        << row.feature_subset << ',' << short_double(row.delta) << ','
                        << format_double(row.wall_time) << '\n';
        out.rows.push_back(row);
      }

      if (plan.with_faro) {
        // FARO over the radius sequence, solved separately for v and each twin.
        std::vector<std::optional<std::vector<double>>> faro(base.size());
        parallel_for(base.size(), cfg.jobs, [&](std::size_t k) {
          const InstanceResult& r = base[k];
          if (r.unfair || r.plain_infeasible) return;
          const Instance& v = ds.x[r.index];
          std::vector<double> costs;
          for (std::size_t t = 0; t < twins[k].size(); ++t) {
            const bool own = levels[t] == v[*p_index];
            RecourseProblem prob =
                make_problem(cell, CostKind::afrr, cfg.faro_deltas.front(), own ? v : twins[k][t]);
            GridSpec grid = cell.grid;
            grid.seed = mix(cell_seed ^ r.index);
            const FaroResult fr = solve_faro(prob, grid, cfg.faro_deltas);
            if (fr.solution.status != SolveStatus::solved) return;
            costs.push_back(fr.solution.cost);
          }
          faro[k] = costs;
        });
        CostTable faro_t;
        for (std::size_t k = 0; k < base.size(); ++k) {
          if (!faro[k]) continue;
          faro_t.push_back(to_record(base[k], *faro[k], false, false));
        }
        const std::string name = prefix + plan.scm_name + "_" + clf.name + std::to_string(ci) + "_" +
                                 clf.subset + "_faro";
        CsvFile ratios(dir + "/ratios_" + name + ".csv");
        ratios.stream() << "instance,ratio,kind\n";
        write_ratio_rows(ratios.stream(), faro_t, "faro");
        out.files.push_back(ratios.path());
      }
    }
  }
  return out;
}

}  // namespace

RunOutput run_simulation(const ExperimentConfig& cfg) {
  validate(cfg);
  std::vector<CellPlan> plans;
  for (const auto& s : cfg.scms) {
    if (s == "loan") throw ConfigError("use the loan case study for the loan model");
    const Scm scm = build_scm(s);
    for (const auto& k : cfg.label_kinds) {
      if (k == "loan") throw ConfigError("label kind 'loan' only applies to the loan model");
      plans.push_back({s, k, scm.continuous_indices(), false});
    }
  }
  return run_cells(cfg, plans, "");
}

RunOutput run_case_study_loan(const ExperimentConfig& cfg) {
  validate(cfg);
  const Scm scm = build_scm("loan");
  // Education is bounded to (-0.5, 0.5) and cannot be perturbed additively.
  std::vector<std::size_t> perturbed;
  for (std::size_t i : scm.continuous_indices())
    if (scm.variable(i).name != "education") perturbed.push_back(i);
  return run_cells(cfg, {CellPlan{"loan", "loan", perturbed, true}}, "loan_");
}

}  // namespace faro

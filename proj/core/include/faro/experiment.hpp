#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "faro/classifier.hpp"
#include "faro/metric.hpp"
#include "faro/solver.hpp"

namespace faro {

/// Environment variable naming the default output directory.
inline constexpr const char* kOutputDirEnv = "FARO_OUTPUT_DIR";

struct ClassifierSpec {
  /// glm | svm | fixed | model
  std::string kind = "glm";
  FeatureSubset features = FeatureSubset::all;
  LinearClassifier fixed;  // kind == fixed
  std::string path;        // kind == model

  [[nodiscard]] std::string label() const;
};

/// Parses glm:all, svm:nonprotected, fixed:<w0,w1,...>:<b> or model:<path>.
ClassifierSpec parse_classifier_spec(const std::string& text);

struct ExperimentConfig {
  std::vector<std::string> scms{"lin"};
  std::vector<std::string> label_kinds{"linear_aware"};
  std::vector<ClassifierSpec> classifiers{ClassifierSpec{}};
  std::vector<double> deltas{1.0, 0.5, 0.1};
  std::vector<double> faro_deltas{1.0, 0.5, 0.1, 0.01};
  double cost_p = 2.0;
  double metric_q = 2.0;
  double product_norm = 2.0;
  ProtectedMetricKind protected_metric = ProtectedMetricKind::zero;
  std::size_t n_samples = 2000;
  std::uint64_t seed = 7;
  std::size_t grid_points = 101;
  double grid_sigmas = 5.0;
  /// Doublings of the grid range tried before an instance counts as infeasible.
  std::size_t grid_widen_attempts = 3;
  std::size_t perturbation_samples = 400;
  /// 0 keeps every negatively classified test instance.
  std::size_t max_instances = 0;
  /// auto uses closed forms whenever the model and classifier are linear.
  std::string solver = "auto";
  double learning_rate = 0.1;
  int epochs = 500;
  double l2 = 1e-4;
  std::size_t jobs = 1;
  std::string output_dir;
};

/// Flat `key = value` text, '#' starts a comment, lists are comma separated.
/// Unknown keys and malformed values throw ConfigError.
ExperimentConfig parse_config(std::istream& is);
ExperimentConfig load_config(const std::string& path);
void validate(const ExperimentConfig& cfg);
/// Canonical text of every key, defaults included; parse_config reads it back.
std::string echo_config(const ExperimentConfig& cfg);
/// Output directory: the config value, else $FARO_OUTPUT_DIR, else "faro_out".
std::string resolve_output_dir(const ExperimentConfig& cfg);

struct ResultRow {
  std::string scm;
  std::string label_kind;
  std::string classifier;
  std::string feature_subset;
  double delta = 0.0;
  double sigma_R = 0.0;
  double sigma_AR = 0.0;
  double sigma_FR = 0.0;
  std::size_t n_excluded_unfair = 0;
  std::size_t n_infeasible = 0;
  std::size_t n_instances = 0;
  bool fair_recourse_possible = false;
  double wall_time = 0.0;
};

struct RunOutput {
  std::vector<ResultRow> rows;
  std::vector<std::string> files;
};

/// Runs every (model x labels x classifier x radius) cell and writes results.csv,
/// timing.csv, costs_<cell>.csv, ratios_<cell>.csv and config.txt.
RunOutput run_simulation(const ExperimentConfig& cfg);

/// Loan model: robust, fair robust and FARO twin cost ratios per classifier and radius.
RunOutput run_case_study_loan(const ExperimentConfig& cfg);

/// Runs body(i) for i in [0, n) on `jobs` threads. The first exception is rethrown.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& body);

}  // namespace faro

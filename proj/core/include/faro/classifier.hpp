#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "faro/scm.hpp"

namespace faro {

enum class FeatureSubset { all, nonprotected };

/// h(v) = sign(w . v - b) with sign(0) = +1. Weights follow the model's variable order.
struct LinearClassifier {
  std::vector<double> w;
  double b = 0.0;
  std::vector<std::string> names;
  FeatureSubset features = FeatureSubset::all;

  [[nodiscard]] double decision(std::span<const double> v) const;
  [[nodiscard]] int predict(std::span<const double> v) const;
};

/// Any sign-valued model. Only the brute-force solver can handle it.
struct OpaqueClassifier {
  std::function<double(std::span<const double>)> decision;
  std::size_t dimension = 0;
  std::string name = "opaque";
};

using ClassifierModel = std::variant<LinearClassifier, OpaqueClassifier>;

double decision_value(const ClassifierModel& m, std::span<const double> v);
/// +1 or -1; throws DimensionMismatch.
int predict(const ClassifierModel& m, std::span<const double> v);
const LinearClassifier* as_linear(const ClassifierModel& m);
std::string model_name(const ClassifierModel& m);

struct LabeledData {
  std::vector<Instance> x;
  std::vector<int> y;
};

struct TrainConfig {
  double learning_rate = 0.1;
  int epochs = 500;
  double l2 = 1e-4;
  std::uint64_t seed = 0;
  FeatureSubset features = FeatureSubset::all;
  /// Coordinate zeroed out when features == nonprotected.
  std::optional<std::size_t> protected_index;
  std::vector<std::string> names;
};

struct TrainResult {
  LinearClassifier model;
  double train_accuracy = 0.0;
  double final_loss = 0.0;
};

/// Full-batch gradient descent on standardized features, mapped back to raw
/// coordinates. Throws TrainingError on single-class data or a non-finite loss.
TrainResult train_logistic(const LabeledData& data, const TrainConfig& cfg);
/// Same optimizer on the L2-regularized hinge loss.
TrainResult train_linear_svm(const LabeledData& data, const TrainConfig& cfg);

double accuracy(const ClassifierModel& m, const LabeledData& data);

enum class LabelKind { linear_aware, linear_unaware, nonlinear_aware, nonlinear_unaware };

LabelKind parse_label_kind(const std::string& s);
std::string to_string(LabelKind k);
/// Labels over (A, X1, X2): +1 iff the kind's inequality holds.
int ground_truth_label(LabelKind kind, std::span<const double> v);

/// True iff every counterfactual twin receives the same label as v.
bool counterfactually_fair(const ClassifierModel& m, const Scm& scm, std::span<const double> v,
                           std::size_t protected_index);

/// Line-oriented text format:
///   faro-model 1
///   kind linear
///   features all|nonprotected
///   dim <n>
///   names <n names>
///   weights <n values>
///   bias <value>
void write_model(std::ostream& os, const LinearClassifier& m);
LinearClassifier read_model(std::istream& is);
void save_model(const std::string& path, const LinearClassifier& m);
LinearClassifier load_model(const std::string& path);

}  // namespace faro

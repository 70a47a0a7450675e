#include "faro/classifier.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "faro/errors.hpp"

namespace faro {

double LinearClassifier::decision(std::span<const double> v) const {
  if (v.size() != w.size()) {
    throw DimensionMismatch("classifier expects " + std::to_string(w.size()) +
                            " features, got " + std::to_string(v.size()));
  }
  double s = -b;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * v[i];
  return s;
}

int LinearClassifier::predict(std::span<const double> v) const {
  return decision(v) >= 0.0 ? 1 : -1;
}

double decision_value(const ClassifierModel& m, std::span<const double> v) {
  if (const auto* lin = std::get_if<LinearClassifier>(&m)) return lin->decision(v);
  const auto& op = std::get<OpaqueClassifier>(m);
  if (op.dimension != 0 && v.size() != op.dimension) {
    throw DimensionMismatch("model '" + op.name + "' expects " + std::to_string(op.dimension) +
                            " features, got " + std::to_string(v.size()));
  }
  return op.decision(v);
}

int predict(const ClassifierModel& m, std::span<const double> v) {
  return decision_value(m, v) >= 0.0 ? 1 : -1;
}

const LinearClassifier* as_linear(const ClassifierModel& m) {
  return std::get_if<LinearClassifier>(&m);
}

std::string model_name(const ClassifierModel& m) {
  if (const auto* op = std::get_if<OpaqueClassifier>(&m)) return op->name;
  return "linear";
}

namespace {

enum class Loss { logistic, hinge };

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;  // 0 marks a dropped or constant column
};

Standardizer fit_standardizer(const LabeledData& data, const std::vector<bool>& use) {
  const std::size_t d = data.x.front().size();
  Standardizer s{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  const double n = static_cast<double>(data.x.size());
  for (const auto& x : data.x)
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += x[j] / n;
  for (std::size_t j = 0; j < d; ++j) {
    if (!use[j]) continue;
    double var = 0.0;
    for (const auto& x : data.x) var += (x[j] - s.mean[j]) * (x[j] - s.mean[j]) / n;
    s.scale[j] = var > 1e-24 ? std::sqrt(var) : 0.0;
  }
  return s;
}

TrainResult train(const LabeledData& data, const TrainConfig& cfg, Loss loss) {
  if (data.x.empty() || data.x.size() != data.y.size()) {
    throw TrainingError("training data is empty or labels do not match instances");
  }
  if (!(cfg.learning_rate > 0.0) || cfg.epochs <= 0) {
    throw TrainingError("learning rate and epochs must be positive");
  }
  bool has_pos = false;
  bool has_neg = false;
  for (int y : data.y) {
    if (y == 1) has_pos = true;
    else if (y == -1) has_neg = true;
    else throw TrainingError("labels must be -1 or +1");
  }
  if (!has_pos || !has_neg) throw TrainingError("training data contains a single class");

  const std::size_t d = data.x.front().size();
  for (const auto& x : data.x)
    if (x.size() != d) throw DimensionMismatch("training instances differ in length");
  std::vector<bool> use(d, true);
  if (cfg.features == FeatureSubset::nonprotected) {
    if (!cfg.protected_index || *cfg.protected_index >= d) {
      throw TrainingError("unaware training needs a valid protected index");
    }
    use[*cfg.protected_index] = false;
  }
  const Standardizer st = fit_standardizer(data, use);

  const std::size_t n = data.x.size();
  std::vector<double> z(n * d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      if (st.scale[j] > 0.0) z[i * d + j] = (data.x[i][j] - st.mean[j]) / st.scale[j];

  // f(z) = theta . z + c on the standardized scale.
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> init(0.0, 0.01);
  std::vector<double> theta(d, 0.0);
  for (std::size_t j = 0; j < d; ++j)
    if (st.scale[j] > 0.0) theta[j] = init(rng);
  double c = 0.0;

  std::vector<double> grad(d);
  double loss_value = 0.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_c = 0.0;
    loss_value = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* zi = &z[i * d];
      double f = c;
      for (std::size_t j = 0; j < d; ++j) f += theta[j] * zi[j];
      const double y = data.y[i];
      const double m = y * f;
      double g = 0.0;  // d loss / d f
      if (loss == Loss::logistic) {
        loss_value += m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
        g = -y / (1.0 + std::exp(m));
      } else if (m < 1.0) {
        loss_value += 1.0 - m;
        g = -y;
      }
      for (std::size_t j = 0; j < d; ++j) grad[j] += g * zi[j];
      grad_c += g;
    }
    loss_value /= static_cast<double>(n);
    double penalty = 0.0;
    for (std::size_t j = 0; j < d; ++j) penalty += theta[j] * theta[j];
    loss_value += 0.5 * cfg.l2 * penalty;
    if (!std::isfinite(loss_value)) throw TrainingError("training loss became non-finite");
    for (std::size_t j = 0; j < d; ++j) {
      if (st.scale[j] == 0.0) continue;
      theta[j] -= cfg.learning_rate * (grad[j] / static_cast<double>(n) + cfg.l2 * theta[j]);
    }
    c -= cfg.learning_rate * grad_c / static_cast<double>(n);
  }

  TrainResult out;
  out.model.w.assign(d, 0.0);
  double offset = c;
  for (std::size_t j = 0; j < d; ++j) {
    if (st.scale[j] == 0.0) continue;
    out.model.w[j] = theta[j] / st.scale[j];
    offset -= theta[j] * st.mean[j] / st.scale[j];
  }
  out.model.b = -offset;
  out.model.features = cfg.features;
  out.model.names = cfg.names;
  if (out.model.names.size() != d) {
    out.model.names.clear();
    for (std::size_t j = 0; j < d; ++j) out.model.names.push_back("x" + std::to_string(j));
  }
  out.final_loss = loss_value;
  out.train_accuracy = accuracy(out.model, data);
  return out;
}

}  // namespace

TrainResult train_logistic(const LabeledData& data, const TrainConfig& cfg) {
  return train(data, cfg, Loss::logistic);
}

TrainResult train_linear_svm(const LabeledData& data, const TrainConfig& cfg) {
  return train(data, cfg, Loss::hinge);
}

double accuracy(const ClassifierModel& m, const LabeledData& data) {
  if (data.x.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.x.size(); ++i) hits += predict(m, data.x[i]) == data.y[i];
  return static_cast<double>(hits) / static_cast<double>(data.x.size());
}

LabelKind parse_label_kind(const std::string& s) {
  if (s == "linear_aware") return LabelKind::linear_aware;
  if (s == "linear_unaware") return LabelKind::linear_unaware;
  if (s == "nonlinear_aware") return LabelKind::nonlinear_aware;
  if (s == "nonlinear_unaware") return LabelKind::nonlinear_unaware;
  throw std::invalid_argument("unknown label kind '" + s + "'");
}

std::string to_string(LabelKind k) {
  switch (k) {
    case LabelKind::linear_aware: return "linear_aware";
    case LabelKind::linear_unaware: return "linear_unaware";
    case LabelKind::nonlinear_aware: return "nonlinear_aware";
    case LabelKind::nonlinear_unaware: return "nonlinear_unaware";
  }
  return "unknown";
}

int ground_truth_label(LabelKind kind, std::span<const double> v) {
  if (v.size() != 3) throw DimensionMismatch("label functions are defined over (A, X1, X2)");
  const double a = v[0];
  const double s = v[1] + v[2];
  bool favorable = false;
  switch (kind) {
    case LabelKind::linear_aware: favorable = a + s < 0.0; break;
    case LabelKind::linear_unaware: favorable = s < 0.0; break;
    case LabelKind::nonlinear_aware: favorable = (a + s) * (a + s) < 2.0; break;
    case LabelKind::nonlinear_unaware: favorable = s * s < 2.0; break;
  }
  return favorable ? 1 : -1;
}

bool counterfactually_fair(const ClassifierModel& m, const Scm& scm, std::span<const double> v,
                           std::size_t protected_index) {
  const int label = predict(m, v);
  for (const auto& t : scm.twins(v, protected_index)) {
    if (predict(m, t) != label) return false;
  }
  return true;
}

void write_model(std::ostream& os, const LinearClassifier& m) {
  const auto flags = os.flags();
  const auto prec = os.precision();
  os << std::setprecision(17);
  os << "faro-model 1\n";
  os << "kind linear\n";
  os << "features " << (m.features == FeatureSubset::all ? "all" : "nonprotected") << '\n';
  os << "dim " << m.w.size() << '\n';
  os << "names";
  for (std::size_t i = 0; i < m.w.size(); ++i) {
    os << ' ' << (i < m.names.size() ? m.names[i] : "x" + std::to_string(i));
  }
  os << "\nweights";
  for (double x : m.w) os << ' ' << x;
  os << "\nbias " << m.b << '\n';
  os.flags(flags);
  os.precision(prec);
}

namespace {

std::istringstream expect_line(std::istream& is, const std::string& key) {
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string k;
    ls >> k;
    if (k != key) throw InvalidModel("model file: expected '" + key + "', found '" + k + "'");
    return ls;
  }
  throw InvalidModel("model file: missing '" + key + "' line");
}

}  // namespace

LinearClassifier read_model(std::istream& is) {
  auto header = expect_line(is, "faro-model");
  int version = 0;
  if (!(header >> version) || version != 1) throw InvalidModel("model file: unsupported version");
  auto kind = expect_line(is, "kind");
  std::string k;
  kind >> k;
  if (k != "linear") throw InvalidModel("model file: unsupported kind '" + k + "'");
  LinearClassifier m;
  auto features = expect_line(is, "features");
  std::string f;
  features >> f;
  if (f == "all") m.features = FeatureSubset::all;
  else if (f == "nonprotected") m.features = FeatureSubset::nonprotected;
  else throw InvalidModel("model file: unknown feature subset '" + f + "'");
  auto dim_line = expect_line(is, "dim");
  std::size_t dim = 0;
  if (!(dim_line >> dim) || dim == 0) throw InvalidModel("model file: invalid dim");
  auto names = expect_line(is, "names");
  m.names.resize(dim);
  for (auto& n : m.names)
    if (!(names >> n)) throw InvalidModel("model file: expected " + std::to_string(dim) + " names");
  auto weights = expect_line(is, "weights");
  m.w.resize(dim);
  for (auto& w : m.w)
    if (!(weights >> w)) throw InvalidModel("model file: expected " + std::to_string(dim) + " weights");
  std::string extra;
  if (weights >> extra) throw InvalidModel("model file: too many weights");
  auto bias = expect_line(is, "bias");
  if (!(bias >> m.b)) throw InvalidModel("model file: invalid bias");
  return m;
}

void save_model(const std::string& path, const LinearClassifier& m) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write model file '" + path + "'");
  write_model(os, m);
}

LinearClassifier load_model(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open model file '" + path + "'");
  return read_model(is);
}

}  // namespace faro

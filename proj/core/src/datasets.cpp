#include "faro/datasets.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "faro/errors.hpp"

namespace faro {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Scm build_lin() {
  return Scm("lin",
             {VariableSpec::categorical("a", {0, 1}, false, true),
              VariableSpec::continuous("x1", true), VariableSpec::continuous("x2", true)},
             {StructuralEquation::exogenous(), StructuralEquation::linear({0}, {2.0}),
              StructuralEquation::linear({0, 1}, {1.0, -1.0})},
             {BernoulliNoise{0.5}, NormalNoise{0.0, 1.0}, NormalNoise{0.0, 1.0}});
}

Scm build_anm() {
  return Scm("anm",
             {VariableSpec::categorical("a", {0, 1}, false, true),
              VariableSpec::continuous("x1", true), VariableSpec::continuous("x2", true)},
             {StructuralEquation::exogenous(),
              StructuralEquation::additive({0}, [](std::span<const double> pa) {
                return 2.0 * pa[0] * pa[0];
              }),
              StructuralEquation::additive({0, 1}, [](std::span<const double> pa) {
                return pa[0] * pa[1];
              })},
             {BernoulliNoise{0.5}, NormalNoise{0.0, 1.0}, NormalNoise{0.0, 1.0}});
}

// Variable order: 0 gender, 1 age, 2 education, 3 loan_amount, 4 duration, 5 income, 6 savings.
Scm build_loan() {
  auto education_pre = [](std::span<const double> pa) {
    // pa = (gender, age)
    return -1.0 + 0.5 * pa[0] + sigmoid(0.1 * pa[1]);
  };
  auto education_forward = [education_pre](std::span<const double> pa, double u) {
    return -0.5 + sigmoid(education_pre(pa) + u);
  };
  auto education_inverse = [education_pre](std::span<const double> pa, double e) {
    const double p = e + 0.5;
    if (!(p > 0.0 && p < 1.0)) {
      throw std::domain_error("education value " + std::to_string(e) +
                              " is outside the invertible range (-0.5, 0.5)");
    }
    return std::log(p / (1.0 - p)) - education_pre(pa);
  };
  return Scm(
      "loan",
      {VariableSpec::categorical("gender", {0, 1}, false, true),
       VariableSpec::continuous("age", false), VariableSpec::continuous("education", true),
       VariableSpec::continuous("loan_amount", false),
       VariableSpec::continuous("duration", false), VariableSpec::continuous("income", true),
       VariableSpec::continuous("savings", true)},
      {StructuralEquation::exogenous(), StructuralEquation::linear({}, {}, -35.0),
       StructuralEquation::invertible({0, 1}, education_forward, education_inverse),
       StructuralEquation::additive({0, 1},
                                    [](std::span<const double> pa) {
                                      return 1.0 + 0.01 * (pa[1] - 5.0) * (5.0 - pa[1]) + pa[0];
                                    }),
       StructuralEquation::linear({1, 0, 3}, {0.1, 2.0, 1.0}, -1.0),
       StructuralEquation::additive({1, 0, 2},
                                    [](std::span<const double> pa) {
                                      return -4.0 + 0.1 * (pa[0] + 35.0) + 2.0 * pa[1] +
                                             pa[1] * pa[2];
                                    }),
       StructuralEquation::additive({5},
                                    [](std::span<const double> pa) {
                                      return -4.0 + 1.5 * (pa[0] > 0.0 ? pa[0] : 0.0);
                                    })},
      {BernoulliNoise{0.5}, GammaNoise{10.0, 3.5}, NormalNoise{0.0, 0.5}, NormalNoise{0.0, 2.0},
       NormalNoise{0.0, 3.0}, NormalNoise{0.0, 2.0}, NormalNoise{0.0, 5.0}});
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

Scm build_scm(const std::string& name) {
  if (name == "lin") return build_lin();
  if (name == "anm") return build_anm();
  if (name == "loan") return build_loan();
  throw std::invalid_argument("unknown built-in model '" + name + "' (expected lin, anm or loan)");
}

std::vector<std::string> builtin_scm_names() { return {"lin", "anm", "loan"}; }

double loan_approval_probability(std::span<const double> v) {
  if (v.size() != 7) throw DimensionMismatch("loan instances have 7 variables");
  const double l = v[3];
  const double d = v[4];
  const double i = v[5];
  const double s = v[6];
  return sigmoid(0.3 * (-l - d + i + s + i * s));
}

Split split_of(std::uint64_t seed, std::size_t index) {
  const std::uint64_t h = splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(index));
  // 53 high bits as a uniform double in [0, 1)
  const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  return u < 0.8 ? Split::train : Split::test;
}

std::vector<std::size_t> Dataset::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i] == s) out.push_back(i);
  return out;
}

LabeledData Dataset::subset(Split s) const {
  LabeledData out;
  for (std::size_t i : indices(s)) {
    out.x.push_back(x[i]);
    out.y.push_back(y[i]);
  }
  return out;
}

Dataset generate_dataset(const Scm& scm, std::size_t n, const std::string& label_kind,
                         std::uint64_t seed) {
  if (n < 10) throw std::invalid_argument("datasets need at least 10 samples");
  Dataset ds;
  ds.scm_name = scm.name();
  ds.label_kind = label_kind;
  ds.seed = seed;
  std::mt19937_64 rng(seed);
  const auto draws = scm.sample(n, rng);
  if (label_kind == "loan") {
    std::mt19937_64 label_rng(splitmix64(seed ^ 0x5bd1e995ULL));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (const auto& d : draws) {
      ds.x.push_back(d.values);
      ds.y.push_back(unif(label_rng) < loan_approval_probability(d.values) ? 1 : -1);
    }
  } else {
    const LabelKind kind = parse_label_kind(label_kind);
    for (const auto& d : draws) {
      ds.x.push_back(d.values);
      ds.y.push_back(ground_truth_label(kind, d.values));
    }
  }
  for (std::size_t i = 0; i < n; ++i) ds.split.push_back(split_of(seed, i));
  return ds;
}

std::vector<double> column_stddev(const Dataset& ds, Split s) {
  const auto idx = ds.indices(s);
  if (idx.empty()) throw std::invalid_argument("split is empty");
  const std::size_t d = ds.x[idx.front()].size();
  std::vector<double> mean(d, 0.0);
  std::vector<double> var(d, 0.0);
  for (std::size_t i : idx)
    for (std::size_t j = 0; j < d; ++j) mean[j] += ds.x[i][j];
  for (auto& m : mean) m /= static_cast<double>(idx.size());
  for (std::size_t i : idx)
    for (std::size_t j = 0; j < d; ++j) var[j] += (ds.x[i][j] - mean[j]) * (ds.x[i][j] - mean[j]);
  for (auto& v : var) v = std::sqrt(v / static_cast<double>(idx.size()));
  return var;
}

namespace {

std::string expected_header(std::size_t n_features) {
  std::string h = "a";
  for (std::size_t i = 1; i < n_features; ++i) h += ",x" + std::to_string(i);
  return h + ",y,split";
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_number(const std::string& cell, std::size_t row, std::size_t col) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (cell.empty() || ec != std::errc() || ptr != last || !std::isfinite(value)) {
    throw CsvNumberError("row " + std::to_string(row) + ", column " + std::to_string(col + 1) +
                         ": '" + cell + "' is not a finite number");
  }
  return value;
}

}  // namespace

void write_csv(std::ostream& os, const Dataset& ds) {
  if (ds.x.empty()) throw std::invalid_argument("cannot write an empty dataset");
  const std::size_t d = ds.x.front().size();
  os << expected_header(d) << '\n';
  char buf[64];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", ds.x[i][j]);
      os << buf << ',';
    }
    os << ds.y[i] << ',' << (ds.split[i] == Split::train ? "train" : "test") << '\n';
  }
}

void write_csv(const std::string& path, const Dataset& ds) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write '" + path + "'");
  write_csv(os, ds);
}

Dataset read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw CsvHeaderError("missing header row");
  const auto header = split_fields(line);
  if (header.size() < 4 || expected_header(header.size() - 2) != line.substr(0, line.find('\r'))) {
    throw CsvHeaderError("malformed header '" + line + "', expected a,x1,...,xn,y,split");
  }
  const std::size_t d = header.size() - 2;
  Dataset ds;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_fields(line);
    if (cells.size() != header.size()) {
      throw CsvArityError("row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                          " fields, expected " + std::to_string(header.size()));
    }
    Instance x(d);
    for (std::size_t j = 0; j < d; ++j) x[j] = parse_number(cells[j], row, j);
    const double y = parse_number(cells[d], row, d);
    if (y != 1.0 && y != -1.0) {
      throw CsvLabelError("row " + std::to_string(row) + ": label must be -1 or +1, got " +
                          cells[d]);
    }
    Split s;
    if (cells[d + 1] == "train") s = Split::train;
    else if (cells[d + 1] == "test") s = Split::test;
    else throw CsvLabelError("row " + std::to_string(row) + ": split must be train or test");
    ds.x.push_back(std::move(x));
    ds.y.push_back(static_cast<int>(y));
    ds.split.push_back(s);
  }
  return ds;
}

Dataset read_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  return read_csv(is);
}

}  // namespace faro

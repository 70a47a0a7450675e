#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "faro/classifier.hpp"
#include "faro/scm.hpp"

namespace faro {

/// Built-in models: "lin", "anm" (variables a, x1, x2) and "loan" (gender, age,
/// education, loan_amount, duration, income, savings; gender protected).
Scm build_scm(const std::string& name);
std::vector<std::string> builtin_scm_names();

/// Label rule for the loan model: Bernoulli(sigmoid(0.3 (-L - D + I + S + I S))).
double loan_approval_probability(std::span<const double> v);

enum class Split { train, test };

/// Pure function of (seed, index); roughly 80% train.
Split split_of(std::uint64_t seed, std::size_t index);

struct Dataset {
  std::vector<Instance> x;
  std::vector<int> y;
  std::vector<Split> split;
  std::string scm_name;
  std::string label_kind;
  std::uint64_t seed = 0;

  [[nodiscard]] std::size_t size() const { return x.size(); }
  [[nodiscard]] std::vector<std::size_t> indices(Split s) const;
  [[nodiscard]] LabeledData subset(Split s) const;
};

/// `label_kind` is one of the four ground-truth kinds or "loan" for the loan
/// model's stochastic labels. Throws std::invalid_argument for n < 10.
Dataset generate_dataset(const Scm& scm, std::size_t n, const std::string& label_kind,
                         std::uint64_t seed);

/// Per-variable standard deviation over one split.
std::vector<double> column_stddev(const Dataset& ds, Split s);

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class CsvHeaderError : public CsvError {
 public:
  using CsvError::CsvError;
};
class CsvNumberError : public CsvError {
 public:
  using CsvError::CsvError;
};
class CsvArityError : public CsvError {
 public:
  using CsvError::CsvError;
};
class CsvLabelError : public CsvError {
 public:
  using CsvError::CsvError;
};

/// Header `a,x1,...,xn,y,split`; values at 17 significant digits.
void write_csv(std::ostream& os, const Dataset& ds);
void write_csv(const std::string& path, const Dataset& ds);
Dataset read_csv(std::istream& is);
Dataset read_csv(const std::string& path);

}  // namespace faro

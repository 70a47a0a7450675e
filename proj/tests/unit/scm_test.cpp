#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "faro/datasets.hpp"
#include "faro/errors.hpp"
#include "faro/linear_scm.hpp"
#include "faro/scm.hpp"
#include "oracles.hpp"

namespace {

using faro::AdditiveIntervention;
using faro::HardIntervention;
using faro::MiddleIntervention;

void expect_near(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "coordinate " << i;
}

TEST(Scm, AbductRunningExample) {
  const auto lin = faro::build_scm("lin");
  expect_near(lin.abduct(std::vector<double>{1, 3, 0}), {1, 1, 2}, 1e-12);
  const faro::LinearScm l(lin);
  expect_near(l.abduct(std::vector<double>{1, 3, 0}), {1, 1, 2}, 1e-12);
}

TEST(Scm, GenerateRunningExample) {
  const auto lin = faro::build_scm("lin");
  expect_near(lin.generate(std::vector<double>{1, 1, 2}), {1, 3, 0}, 1e-12);
  expect_near(lin.generate(std::vector<double>{0, 0, 0}), {0, 0, 0}, 0.0);
}

TEST(Scm, ZeroNoiseAbductsToZero) {
  for (const auto& name : {"lin", "anm"}) {
    const auto scm = faro::build_scm(name);
    const auto v = scm.generate(std::vector<double>(scm.size(), 0.0));
    expect_near(scm.abduct(v), std::vector<double>(scm.size(), 0.0), 1e-12);
  }
}

TEST(Scm, LinearGenerateMatchesMatrix) {
  const faro::LinearScm lin(faro::build_scm("lin"));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  for (int k = 0; k < 100; ++k) {
    std::vector<double> u = {std::bernoulli_distribution(0.5)(rng) ? 1.0 : 0.0, nd(rng), nd(rng)};
    const Eigen::VectorXd su = lin.S() * faro::to_vector(u);
    expect_near(lin.scm().generate(u), faro::to_std(su), 1e-12);
  }
}

TEST(Scm, LinearMatrixColumns) {
  const faro::LinearScm lin(faro::build_scm("lin"));
  Eigen::MatrixXd expected(3, 3);
  expected << 1, 0, 0, 2, 1, 0, -1, -1, 1;
  EXPECT_LT((lin.S() - expected).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((lin.S() * lin.S_inv() - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Scm, NonLinearModelRejectedByLinearView) {
  EXPECT_THROW(faro::LinearScm(faro::build_scm("anm")), faro::NonLinearModel);
  EXPECT_FALSE(faro::build_scm("anm").is_linear());
  EXPECT_TRUE(faro::build_scm("anm").is_additive());
  EXPECT_FALSE(faro::build_scm("loan").is_additive());
}

TEST(Scm, RecordedNoiseRecoveredOnLoan) {
  const auto loan = faro::build_scm("loan");
  for (const auto& d : loan.sample(200, 11)) {
    expect_near(loan.abduct(d.values), d.noise, 1e-9);
    expect_near(loan.generate(loan.abduct(d.values)), d.values, 1e-9);
  }
}

TEST(Scm, RoundTripOnSamples) {
  for (const auto& name : {"lin", "anm", "loan"}) {
    const auto scm = faro::build_scm(name);
    for (const auto& d : scm.sample(500, 5)) expect_near(scm.generate(scm.abduct(d.values)), d.values, 1e-9);
  }
}

TEST(Scm, HardInterventionModel) {
  const auto lin = faro::build_scm("lin");
  const auto m = lin.apply_intervention(HardIntervention{{0}, {0.0}});
  EXPECT_TRUE(m.equation(0).is_constant());
  EXPECT_DOUBLE_EQ(m.generate(std::vector<double>{1, 1, 2})[0], 0.0);
  expect_near(m.generate(std::vector<double>{1, 1, 2}), {0, 1, 1}, 1e-12);
}

TEST(Scm, EmptyAdditiveLeavesModelUnchanged) {
  const auto lin = faro::build_scm("lin");
  const auto m = lin.apply_intervention(AdditiveIntervention{});
  std::mt19937_64 rng(1);
  for (const auto& d : lin.sample(20, rng)) expect_near(m.generate(d.noise), d.values, 0.0);
}

TEST(Scm, MiddleInterventionModel) {
  const auto lin = faro::build_scm("lin");
  const auto m = lin.apply_intervention(MiddleIntervention{{0}, {1.0}, {1}, {0.5}});
  // A := 1, X1 := 2A + U1 + 0.5, X2 := A - X1 + U2
  expect_near(m.generate(std::vector<double>{0, 0, 0}), {1, 2.5, -1.5}, 1e-12);
}

TEST(Scm, CounterfactualExamples) {
  const auto lin = faro::build_scm("lin");
  const std::vector<double> v = {1, 3, 0};
  expect_near(lin.counterfactual(v, AdditiveIntervention{{1}, {1.0}}), {1, 4, -1}, 1e-12);
  expect_near(lin.counterfactual(v, AdditiveIntervention{}), v, 0.0);
  expect_near(lin.counterfactual(v, HardIntervention{{0}, {0.0}}), {0, 1, 1}, 1e-12);
}

TEST(Scm, AdditiveZeroShiftIsExact) {
  const auto anm = faro::build_scm("anm");
  for (const auto& d : anm.sample(50, 9)) {
    EXPECT_EQ(anm.counterfactual(d.values, AdditiveIntervention{{1, 2}, {0.0, 0.0}}), d.values);
  }
}

TEST(Scm, LinearClosedFormsExamples) {
  const faro::LinearScm lin(faro::build_scm("lin"));
  const std::vector<double> v = {1, 3, 0};
  expect_near(faro::counterfactual_linear_additive(lin.S(), v, std::vector<double>{0, 1, 0}), {1, 4, -1}, 1e-12);
  expect_near(faro::counterfactual_linear_additive(lin.S(), v, std::vector<double>{0, 0, 0}), v, 0.0);
  expect_near(faro::counterfactual_linear_hard(lin.S(), v, 0, 0.0), {0, 1, 1}, 1e-12);
  // theta equal to the current value changes nothing
  expect_near(faro::counterfactual_linear_hard(lin.S(), v, 1, 3.0), v, 1e-12);
}

TEST(Scm, LinearClosedFormsMatchOracle) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> nd;
  for (int k = 0; k < 100; ++k) {
    const auto m = oracle::random_linear_model(rng, 4, false);
    const faro::LinearScm l(m.scm);
    const auto v = m.scm.sample(1, rng).front().values;
    std::vector<double> delta(4);
    for (auto& d : delta) d = nd(rng);
    expect_near(faro::counterfactual_linear_additive(l.S(), v, delta),
                oracle::counterfactual(m, v, std::vector<std::optional<double>>(4), delta), 1e-9);
    const std::size_t i = static_cast<std::size_t>(k % 4);
    std::vector<std::optional<double>> hard(4);
    hard[i] = nd(rng);
    expect_near(faro::counterfactual_linear_hard(l.S(), v, i, *hard[i]),
                oracle::counterfactual(m, v, hard, std::vector<double>(4, 0.0)), 1e-9);
    expect_near(m.scm.counterfactual(v, HardIntervention{{i}, {*hard[i]}}),
                oracle::counterfactual(m, v, hard, std::vector<double>(4, 0.0)), 1e-9);
  }
}

TEST(Scm, TwinsRunningExample) {
  const auto lin = faro::build_scm("lin");
  const auto t = lin.twins(std::vector<double>{1, 3, 0}, 0);
  ASSERT_EQ(t.size(), 2u);
  expect_near(t[0], {0, 1, 1}, 1e-12);
  expect_near(t[1], {1, 3, 0}, 1e-12);
}

TEST(Scm, TwinShiftMatchesGenericTwins) {
  const auto scm = faro::build_scm("lin");
  const faro::LinearScm lin(scm);
  for (const auto& d : scm.sample(100, 4)) {
    const auto twins = scm.twins(d.values, 0);
    for (int level : {0, 1}) expect_near(faro::linear_twin(lin, d.values, 0, level), twins[level], 1e-9);
  }
}

TEST(Scm, SingleLevelHasOnlyItself) {
  faro::Scm scm("one", {faro::VariableSpec::categorical("a", {1}, false, true), faro::VariableSpec::continuous("x", true)},
                {faro::StructuralEquation::exogenous(), faro::StructuralEquation::linear({0}, {1.0})},
                {faro::ConstantNoise{1.0}, faro::NormalNoise{}});
  const std::vector<double> v = {1, 0.3};
  const auto t = scm.twins(v, 0);
  ASSERT_EQ(t.size(), 1u);
  expect_near(t[0], v, 1e-12);
}

TEST(Scm, LoanTwinOfTwinIsOriginal) {
  const auto loan = faro::build_scm("loan");
  for (const auto& d : loan.sample(100, 8)) {
    const auto& v = d.values;
    const auto twin = loan.twins(v, 0)[v[0] == 0.0 ? 1 : 0];
    const auto back = loan.twins(twin, 0)[static_cast<std::size_t>(v[0])];
    expect_near(back, v, 1e-9);
  }
}

TEST(Scm, SamplingMoments) {
  const auto lin = faro::build_scm("lin");
  double mean_a = 0.0;
  for (const auto& d : lin.sample(10000, 1)) mean_a += d.values[0] / 10000.0;
  EXPECT_NEAR(mean_a, 0.5, 0.02);

  const auto anm = faro::build_scm("anm");
  double s = 0.0, s2 = 0.0;
  int n = 0;
  for (const auto& d : anm.sample(10000, 2)) {
    if (d.values[0] != 0.0) continue;
    s += d.values[1];
    s2 += d.values[1] * d.values[1];
    ++n;
  }
  const double var = s2 / n - (s / n) * (s / n);
  EXPECT_NEAR(var, 1.0, 0.1);
}

TEST(Scm, SamplingIsDeterministic) {
  const auto lin = faro::build_scm("lin");
  EXPECT_EQ(lin.sample(1, 42).front().values, lin.sample(1, 42).front().values);
}

TEST(Scm, HardInterventionSeversAncestry) {
  const auto lin = faro::build_scm("lin");
  const auto m = lin.apply_intervention(HardIntervention{{1}, {0.7}});
  std::mt19937_64 rng(6);
  std::normal_distribution<double> nd;
  for (int k = 0; k < 20; ++k) {
    // X1's ancestor A moves, X1 does not
    EXPECT_EQ(m.generate(std::vector<double>{0, nd(rng), 0})[1], 0.7);
    EXPECT_EQ(m.generate(std::vector<double>{1, nd(rng), 0})[1], 0.7);
  }
}

TEST(Scm, ValidationErrors) {
  const auto lin = faro::build_scm("lin");
  EXPECT_THROW(lin.validate(std::vector<double>{1, 2}), faro::DimensionMismatch);
  EXPECT_THROW(lin.validate(std::vector<double>{0.5, 2, 3}), faro::InvalidLevel);
  EXPECT_THROW(lin.abduct(std::vector<double>{2, 2, 3}), faro::InvalidLevel);
  EXPECT_THROW((void)lin.counterfactual(std::vector<double>{1, 3, 0}, HardIntervention{{0}, {3.0}}),
               faro::InvalidLevel);
  EXPECT_THROW((void)lin.counterfactual(std::vector<double>{1, 3, 0}, AdditiveIntervention{{0}, {1.0}}),
               faro::InvalidIntervention);
  EXPECT_THROW((void)lin.counterfactual(std::vector<double>{1, 3, 0}, AdditiveIntervention{{7}, {1.0}}),
               faro::InvalidIntervention);
  EXPECT_EQ(lin.index_of("x2"), 2u);
  EXPECT_EQ(*lin.protected_index(), 0u);
  EXPECT_TRUE(lin.is_ancestor(0, 2));
  EXPECT_FALSE(lin.is_ancestor(2, 0));
}

TEST(Scm, CyclicModelRejected) {
  EXPECT_THROW(faro::Scm("cyc", {faro::VariableSpec::continuous("x", true), faro::VariableSpec::continuous("y", true)},
                         {faro::StructuralEquation::linear({1}, {1.0}), faro::StructuralEquation::linear({0}, {1.0})},
                         {faro::NormalNoise{}, faro::NormalNoise{}}),
               faro::InvalidModel);
}

TEST(Scm, LoanEducationInverseDomain) {
  const auto loan = faro::build_scm("loan");
  auto v = loan.sample(1, 3).front().values;
  v[2] = 0.7;
  EXPECT_THROW((void)loan.abduct(v), std::domain_error);
}

}  // namespace

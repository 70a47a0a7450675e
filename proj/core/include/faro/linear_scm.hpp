#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "faro/scm.hpp"

namespace faro {

/// Linear SCM V = B V + c + U, equivalently V = S (U + c) with S = (I - B)^-1.
/// S_inv = I - B exactly; both have unit diagonals.
class LinearScm {
 public:
  /// Throws NonLinearModel if any equation is not affine.
  explicit LinearScm(Scm scm);

  [[nodiscard]] const Scm& scm() const { return scm_; }
  [[nodiscard]] std::size_t size() const { return scm_.size(); }
  [[nodiscard]] const Eigen::MatrixXd& S() const { return s_; }
  [[nodiscard]] const Eigen::MatrixXd& S_inv() const { return s_inv_; }
  [[nodiscard]] const Eigen::VectorXd& intercepts() const { return c_; }

  [[nodiscard]] Instance generate(std::span<const double> u) const;
  [[nodiscard]] Noise abduct(std::span<const double> v) const;

  /// Total effect of a unit noise shift at variable i.
  [[nodiscard]] Eigen::VectorXd column(std::size_t i) const { return s_.col(static_cast<Eigen::Index>(i)); }
  /// Rows and columns of S restricted to the continuous variables.
  [[nodiscard]] Eigen::MatrixXd continuous_block() const;

 private:
  Scm scm_;
  Eigen::MatrixXd s_;
  Eigen::MatrixXd s_inv_;
  Eigen::VectorXd c_;
};

Eigen::VectorXd to_vector(std::span<const double> x);
std::vector<double> to_std(const Eigen::VectorXd& x);

/// v + S delta, the counterfactual of an additive intervention on a linear model.
Instance counterfactual_linear_additive(const Eigen::MatrixXd& S, std::span<const double> v,
                                        std::span<const double> delta);

/// Counterfactual of do(V_i = theta): v + (theta - v_i) S_{*,i}. For a root i this is
/// the same as v + (theta - (S^-1 v)_i) S_{*,i}.
Instance counterfactual_linear_hard(const Eigen::MatrixXd& S, std::span<const double> v,
                                    std::size_t i, double theta);

/// Twin shift for a root protected variable: v + (a' - v_a) S_{*,a}.
Instance linear_twin(const LinearScm& scm, std::span<const double> v, std::size_t protected_index,
                     double level);

}  // namespace faro

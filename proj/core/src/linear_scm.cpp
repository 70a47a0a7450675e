#include "faro/linear_scm.hpp"

#include "faro/errors.hpp"

namespace faro {

namespace {

void require_size(std::size_t got, Eigen::Index want, const char* what) {
  if (static_cast<Eigen::Index>(got) != want) {
    throw DimensionMismatch(std::string(what) + " has " + std::to_string(got) +
                            " entries, expected " + std::to_string(want));
  }
}

}  // namespace

LinearScm::LinearScm(Scm scm) : scm_(std::move(scm)) {
  const auto n = static_cast<Eigen::Index>(scm_.size());
  if (!scm_.is_linear()) throw NonLinearModel("model '" + scm_.name() + "' is not linear");
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);
  c_ = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& eq = scm_.equation(static_cast<std::size_t>(i));
    const auto& form = *eq.linear_form();
    for (std::size_t k = 0; k < eq.parents().size(); ++k) {
      b(i, static_cast<Eigen::Index>(eq.parents()[k])) += form.coefficients[k];
    }
    c_(i) = form.intercept;
  }
  s_inv_ = Eigen::MatrixXd::Identity(n, n) - b;

  // Forward substitution in topological order keeps S exact on integer models.
  s_ = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (std::size_t node : scm_.topological_order()) {
      const auto i = static_cast<Eigen::Index>(node);
      double acc = (i == j) ? 1.0 : 0.0;
      for (std::size_t p : scm_.equation(node).parents()) {
        const auto pi = static_cast<Eigen::Index>(p);
        acc += b(i, pi) * s_(pi, j);
      }
      s_(i, j) = acc;
    }
  }
}

Instance LinearScm::generate(std::span<const double> u) const {
  require_size(u.size(), s_.rows(), "noise vector");
  return to_std(s_ * (to_vector(u) + c_));
}

Noise LinearScm::abduct(std::span<const double> v) const {
  scm_.validate(v);
  return to_std(s_inv_ * to_vector(v) - c_);
}

Eigen::MatrixXd LinearScm::continuous_block() const {
  const auto idx = scm_.continuous_indices();
  const auto k = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd out(k, k);
  for (Eigen::Index r = 0; r < k; ++r)
    for (Eigen::Index c = 0; c < k; ++c)
      out(r, c) = s_(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(r)]),
                     static_cast<Eigen::Index>(idx[static_cast<std::size_t>(c)]));
  return out;
}

Eigen::VectorXd to_vector(std::span<const double> x) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) out(static_cast<Eigen::Index>(i)) = x[i];
  return out;
}

std::vector<double> to_std(const Eigen::VectorXd& x) {
  return std::vector<double>(x.data(), x.data() + x.size());
}

Instance counterfactual_linear_additive(const Eigen::MatrixXd& S, std::span<const double> v,
                                        std::span<const double> delta) {
  require_size(v.size(), S.rows(), "instance");
  require_size(delta.size(), S.cols(), "shift vector");
  return to_std(to_vector(v) + S * to_vector(delta));
}

Instance counterfactual_linear_hard(const Eigen::MatrixXd& S, std::span<const double> v,
                                    std::size_t i, double theta) {
  require_size(v.size(), S.rows(), "instance");
  if (static_cast<Eigen::Index>(i) >= S.cols()) {
    throw InvalidIntervention("hard intervention index out of range");
  }
  const double step = theta - v[i];
  return to_std(to_vector(v) + step * S.col(static_cast<Eigen::Index>(i)));
}

Instance linear_twin(const LinearScm& scm, std::span<const double> v, std::size_t protected_index,
                     double level) {
  const auto& var = scm.scm().variable(protected_index);
  if (!var.is_categorical()) throw InvalidIntervention("twin index must be categorical");
  if (!var.has_level(level)) throw InvalidLevel("twin level is not declared");
  return counterfactual_linear_hard(scm.S(), v, protected_index, level);
}

}  // namespace faro

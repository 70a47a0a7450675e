#pragma once

#include <limits>
#include <span>

namespace faro {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Exponent of an L_p norm. p = infinity is the max-norm and is always handled
/// by a dedicated branch, never through pow().
class LpExponent {
 public:
  constexpr LpExponent() = default;
  explicit LpExponent(double p);

  static LpExponent infinity() { return LpExponent(kInfinity); }

  [[nodiscard]] double value() const { return p_; }
  [[nodiscard]] bool is_infinite() const { return p_ == kInfinity; }

  /// 1/p + 1/p* = 1, with 1 <-> infinity.
  [[nodiscard]] LpExponent conjugate() const;

  friend bool operator==(LpExponent, LpExponent) = default;

 private:
  double p_ = 2.0;
};

/// Conjugate exponent of p. Throws std::invalid_argument for p < 1.
double conjugate(double p);

double lp_norm(std::span<const double> x, LpExponent p);
inline double lp_norm(std::span<const double> x, double p) {
  return lp_norm(x, LpExponent(p));
}

/// N(a, b) for a two-block product norm, used for level/continuous splits.
double lp_combine(double a, double b, LpExponent p);

}  // namespace faro

#include "faro/norm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace faro {

LpExponent::LpExponent(double p) : p_(p) {
  if (std::isnan(p) || p < 1.0) {
    throw std::invalid_argument("L_p exponent must satisfy 1 <= p <= inf, got " +
                                std::to_string(p) +
                                " (quasi-norms are only supported by the brute-force path)");
  }
}

LpExponent LpExponent::conjugate() const { return LpExponent(faro::conjugate(p_)); }

double conjugate(double p) {
  if (std::isnan(p) || p < 1.0) {
    throw std::invalid_argument("conjugate exponent undefined for p < 1");
  }
  if (p == 1.0) return kInfinity;
  if (p == kInfinity) return 1.0;
  return p / (p - 1.0);
}

double lp_norm(std::span<const double> x, LpExponent p) {
  if (p.is_infinite()) {
    double m = 0.0;
    for (double xi : x) m = std::max(m, std::abs(xi));
    return m;
  }
  const double e = p.value();
  if (e == 1.0) {
    double s = 0.0;
    for (double xi : x) s += std::abs(xi);
    return s;
  }
  if (e == 2.0) {
    // hypot-style scaling keeps tiny and huge entries finite
    double scale = 0.0;
    for (double xi : x) scale = std::max(scale, std::abs(xi));
    if (scale == 0.0) return 0.0;
    double s = 0.0;
    for (double xi : x) {
      const double r = xi / scale;
      s += r * r;
    }
    return scale * std::sqrt(s);
  }
  double scale = 0.0;
  for (double xi : x) scale = std::max(scale, std::abs(xi));
  if (scale == 0.0) return 0.0;
  double s = 0.0;
  for (double xi : x) s += std::pow(std::abs(xi) / scale, e);
  return scale * std::pow(s, 1.0 / e);
}

double lp_combine(double a, double b, LpExponent p) {
  const double pair[2] = {a, b};
  return lp_norm(pair, p);
}

}  // namespace faro

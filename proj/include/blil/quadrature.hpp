#pragma once

// Ordinary (Lebesgue) quadrature helpers shared by all modules. Adaptive work is
// delegated to Boost's Gauss-Kronrod; Stieltjes integration against d(1/w) lives
// in weights.hpp.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "blil/error.hpp"

namespace blil {

/// Neumaier-compensated running sum. Order-independent to within a few ulps.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
};

/// Adaptive Gauss-Kronrod (G15/K31) on [a, b], split at the given interior
/// breakpoints. Throws ToleranceError when the estimated error exceeds
/// rel_tol * max(|value|, L1 norm of the integrand) + abs_floor.
template <class F>
QuadResult integrate(F&& f, double a, double b, double rel_tol,
                     std::span<const double> breakpoints = {}, double abs_floor = 0.0,
                     unsigned max_depth = 18) {
  if (a == b) return {};
  const double sign = a < b ? 1.0 : -1.0;
  const double lo = std::min(a, b);
  const double hi = std::max(a, b);
  std::vector<double> cuts{lo};
  for (double c : breakpoints) {
    if (c > lo && c < hi) cuts.push_back(c);
  }
  cuts.push_back(hi);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  CompensatedSum total;
  double err_total = 0.0;
  double l1_total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double err = 0.0;
    double l1 = 0.0;
    // Boost 1.74 reports sub-interval errors without the half-width factor, so the
    // piece is mapped onto [-1, 1] first; deeper estimates then err on the safe side.
    const double mid = 0.5 * (cuts[i] + cuts[i + 1]);
    const double half = 0.5 * (cuts[i + 1] - cuts[i]);
    const double piece = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        [&](double s) { return half * f(mid + half * s); }, -1.0, 1.0, max_depth, rel_tol * 0.1, &err, &l1);
    total.add(piece);
    err_total += err;
    l1_total += l1;
  }
  constexpr double kEps = std::numeric_limits<double>::epsilon();  // estimates bottom out at roundoff
  const double value = total.value();
  if (!std::isfinite(value) ||
      err_total > rel_tol * std::max(std::abs(value), l1_total) + abs_floor + 64 * kEps * l1_total) {
    throw ToleranceError("adaptive quadrature did not reach tolerance", value);
  }
  return {sign * value, err_total};
}

/// Tanh-sinh on each piece between breakpoints. Suited to integrands whose
/// derivatives blow up at the piece ends, such as Hoelder data at its kinks.
template <class F>
QuadResult integrate_endpoint_singular(F&& f, double a, double b, double rel_tol,
                                       std::span<const double> breakpoints = {}) {
  if (a == b) return {};
  const double sign = a < b ? 1.0 : -1.0;
  const double lo = std::min(a, b);
  const double hi = std::max(a, b);
  std::vector<double> cuts{lo};
  for (double c : breakpoints) {
    if (c > lo && c < hi) cuts.push_back(c);
  }
  cuts.push_back(hi);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  static boost::math::quadrature::tanh_sinh<double> rule;
  CompensatedSum total;
  double err_total = 0.0;
  double l1_total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double err = 0.0;
    double l1 = 0.0;
    total.add(rule.integrate(f, cuts[i], cuts[i + 1], rel_tol * 0.1, &err, &l1));
    err_total += err;
    l1_total += l1;
  }
  constexpr double kEps = std::numeric_limits<double>::epsilon();
  const double value = total.value();
  if (!std::isfinite(value) || err_total > rel_tol * std::max(std::abs(value), l1_total) + 64 * kEps * l1_total) {
    throw ToleranceError("tanh-sinh quadrature did not reach tolerance", value);
  }
  return {sign * value, err_total};
}

/// 16-point Gauss-Legendre on [a, b]; exact for polynomials of degree <= 31.
template <class F>
double gauss_legendre16(F&& f, double a, double b) {
  return boost::math::quadrature::gauss<double, 16>::integrate(f, a, b);
}

}  // namespace blil

#pragma once

// Weighted vertical averages of a field against d(1/w): the truncated average
// I(x, delta), the full approximant H(x, t), the fractional difference operator
// on Hoelder data, and iterated-logarithm ratio profiles.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "blil/csv.hpp"
#include "blil/error.hpp"
#include "blil/harmonic.hpp"
#include "blil/quadrature.hpp"
#include "blil/weights.hpp"

namespace blil {

/// I(x, delta) = integral over [delta, 1] of u(x, phi(x) + y) d(1/w(y)).
inline double weighted_average_I(const HarmonicField& u, const GraphDomain& dom, const Weight& w,
                                 double x, double delta, double tol = 1e-9) {
  if (!(delta > 0.0 && delta <= 1.0)) throw DomainError("delta must lie in (0, 1]");
  const double b = dom.phi(x);
  return stieltjes_integrate([&](double y) { return u(x, b + y); }, w, delta, 1.0, {.tol = tol});
}

namespace detail {

/// Split height below which the integrand is replaced by a closed form, or
/// nullopt when the field offers none at this base point.
inline std::optional<double> deep_split(const HarmonicField& u, double base) {
  if (base > 0.0) return std::min(1.0, 1e-12 * base);
  if (u.deep()) return std::min(1.0, u.deep()->height);
  return std::nullopt;
}

/// Integral over heights y in (0, yc] whose reciprocal weight lies in [s_lo, 1/w(yc)].
/// Above a positive base the integrand is continuous at y = 0, so one cell is enough.
inline double deep_piece(const HarmonicField& u, const Weight& w, double x, double base, double yc,
                         double s_lo) {
  const double s_hi = 1.0 / w(yc);
  if (base > 0.0) return u(x, base + 0.5 * yc) * (s_hi - s_lo);
  return u.deep()->integral(x, s_lo, s_hi);
}

}  // namespace detail

/// I as a function of the level v = w(delta). Exact for levels whose delta is
/// representable; deeper levels use the field's trace model below its height.
inline double weighted_average_level(const HarmonicField& u, const GraphDomain& dom, const Weight& w,
                                     double x, double v, double tol = 1e-9) {
  if (!(v >= 1.0)) throw DomainError("levels of a weight are >= 1");
  if (v == 1.0) return 0.0;
  const double base = dom.phi(x);
  const auto yc = detail::deep_split(u, base);
  if (!yc || w(*yc) >= v) return weighted_average_I(u, dom, w, x, invert_weight(w, v), tol);
  const double body =
      stieltjes_integrate([&](double y) { return u(x, base + y); }, w, *yc, 1.0, {.tol = tol});
  return body + detail::deep_piece(u, w, x, base, *yc, 1.0 / v);
}

/// H(x, t) = integral over (0, 1] of u(x, phi(x) + t + y) d(1/w(y)). At t = 0 on
/// the graph the field must carry a trace model; otherwise the integral is not
/// known to exist and DivergenceError is raised.
inline double bloch_approximant_H(const HarmonicField& u, const GraphDomain& dom, const Weight& w,
                                  double x, double t, double tol = 1e-9) {
  if (!(t >= 0.0)) throw DomainError("H needs t >= 0");
  const double base = dom.phi(x) + t;
  const auto yc = detail::deep_split(u, base);
  if (!yc) throw DivergenceError("H at the boundary needs a trace model for field " + u.label());
  const double body =
      stieltjes_integrate([&](double y) { return u(x, base + y); }, w, *yc, 1.0, {.tol = tol});
  return body + detail::deep_piece(u, w, x, base, *yc, 0.0);
}

inline Gradient bloch_approximant_grad(const HarmonicField& u, const Weight& w, double x, double Y,
                                       double tol = 1e-9) {
  if (!(Y > 0.0)) throw DomainError("gradient of H needs a point above the boundary");
  const double yc = std::min(1.0, 1e-12 * Y);
  const Gradient near = u.grad(x, Y + 0.5 * yc);
  const double mass = 1.0 / w(yc);
  const double gx = stieltjes_integrate([&](double y) { return u.grad(x, Y + y).dx; }, w, yc, 1.0, {.tol = tol});
  const double gy = stieltjes_integrate([&](double y) { return u.grad(x, Y + y).dy; }, w, yc, 1.0, {.tol = tol});
  return {gx + near.dx * mass, gy + near.dy * mass};
}

/// H as a field on the half-plane: (x, Y) -> integral of u(x, Y + y) d(1/w(y)).
inline HarmonicField approximant_field(const HarmonicField& u, const Weight& w, double tol = 1e-9) {
  const GraphDomain flat = flat_domain();
  return HarmonicField(
      FieldKind::approximant, "H[" + u.label() + "," + w.label() + "]",
      [u, w, flat, tol](double x, double Y) { return bloch_approximant_H(u, flat, w, x, Y, tol); },
      [u, w, tol](double x, double Y) { return bloch_approximant_grad(u, w, x, Y, tol); });
}

struct ErrorScan {
  double sup = 0.0;
  std::vector<double> per_theta;  ///< sup over x at each theta, in input order
};

/// sup over the grid of |H(x, theta) - I(x, theta)|.
inline ErrorScan approximation_error_scan(const HarmonicField& u, const GraphDomain& dom,
                                          const Weight& w, std::span<const double> xs,
                                          std::span<const double> thetas, double tol = 1e-9) {
  ErrorScan out;
  for (double th : thetas) {
    double level = 0.0;
    for (double x : xs) {
      const double d = bloch_approximant_H(u, dom, w, x, th, tol) - weighted_average_I(u, dom, w, x, th, tol);
      level = std::max(level, std::abs(d));
    }
    out.per_theta.push_back(level);
    out.sup = std::max(out.sup, level);
  }
  return out;
}

/// True when every entry is at most `slack` times the median of the entries up
/// to and including it, plus `floor`. Used to detect growth along a scale sequence.
inline bool trend_free(std::span<const double> values, double slack = 1.2, double floor = 0.0) {
  std::vector<double> prefix;
  for (double v : values) {
    prefix.push_back(v);
    std::vector<double> s = prefix;
    std::sort(s.begin(), s.end());
    const std::size_t n = s.size();
    const double med = n % 2 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
    if (v > slack * med + floor) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Fractional difference operator on Hoelder data

namespace detail {

/// [eps, 1] split at the distances from x to the kinks and ends of f.
inline std::vector<double> kink_pieces(const BoundaryData& f, double eps, double x) {
  std::vector<double> cuts{eps, 1.0};
  for (double k : f.kinks) cuts.push_back(std::abs(k - x));
  cuts.push_back(std::abs(f.lo - x));
  cuts.push_back(std::abs(f.hi - x));
  std::erase_if(cuts, [eps](double c) { return c < eps || c > 1.0; });
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  return cuts;
}

}  // namespace detail

/// integral over [eps, 1] of (f(x + h) - f(x - h)) h^(-alpha-1) dh. Gauss-Kronrod
/// per piece; a piece whose end sits on a cusp of f falls back to tanh-sinh.
inline double theta_epsilon(const BoundaryData& f, double alpha, double eps, double x, double tol = 1e-10) {
  if (!(eps > 0.0 && eps < 0.5)) throw DomainError("eps must lie in (0, 1/2)");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  auto g = [&](double h) { return (f(x + h) - f(x - h)) * std::pow(h, -alpha - 1.0); };
  const auto cuts = detail::kink_pieces(f, eps, x);
  CompensatedSum sum;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    try {
      sum.add(integrate(g, cuts[i], cuts[i + 1], tol, {}, 1e-300).value);
    } catch (const ToleranceError&) {
      sum.add(integrate_endpoint_singular(g, cuts[i], cuts[i + 1], tol).value);
    }
  }
  return sum.value();
}

/// ((1 - alpha)/2) Theta_eps f(x) minus the weighted average of the box field of f
/// against w(h) = h^(alpha-1). The average is summed over the same pieces so that
/// the Stieltjes engine never straddles a cusp.
inline double theta_identity_residual(const BoundaryData& f, double alpha, double eps, double x,
                                      double tol = 1e-10) {
  const double lhs = 0.5 * (1.0 - alpha) * theta_epsilon(f, alpha, eps, x, tol);
  const auto u = box_field(f);
  const auto w = weights::power(1.0 - alpha);
  const auto cuts = detail::kink_pieces(f, eps, x);
  CompensatedSum rhs;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    rhs.add(stieltjes_integrate([&](double y) { return u(x, y); }, w, cuts[i], cuts[i + 1], {.tol = tol}));
  }
  return std::abs(lhs - rhs.value());
}

// ---------------------------------------------------------------------------
// Iterated-logarithm ratio profiles

/// Normaliser sqrt(log v * log log log v), defined for v > e^e.
inline double lil_normalizer(double v) {
  return std::sqrt(std::log(v) * std::log(std::log(std::log(v))));
}

inline const double kRatioGuard = std::exp(std::numbers::e);

struct AverageProfile {
  double x = 0.0;
  std::vector<double> levels;  ///< w(delta), strictly increasing
  std::vector<double> deltas;  ///< 0 where delta underflows a double
  std::vector<double> values;
  std::vector<std::optional<double>> ratios;
  double guard = kRatioGuard;

  double max_abs_ratio() const {
    double m = 0.0;
    for (const auto& r : ratios) {
      if (r) m = std::max(m, std::abs(*r));
    }
    return m;
  }
};

/// Profile over levels v_i = w(delta_i). The part of the integral above the
/// trace height is computed once and shared by all deep levels.
inline AverageProfile lil_ratio_profile_levels(const HarmonicField& u, const GraphDomain& dom,
                                               const Weight& w, double x, std::span<const double> levels,
                                               double tol = 1e-9) {
  AverageProfile p;
  p.x = x;
  const double base = dom.phi(x);
  const auto yc = detail::deep_split(u, base);
  std::optional<double> body;
  for (double v : levels) {
    if (!p.levels.empty() && !(v > p.levels.back())) throw DomainError("levels must increase strictly");
    double delta = 0.0;
    try {
      delta = invert_weight(w, v);
    } catch (const UnboundedWeightError&) {
      if (!yc) throw;
    }
    double value = 0.0;
    if (!yc || w(*yc) >= v) {
      value = weighted_average_I(u, dom, w, x, delta, tol);
    } else {
      if (!body) {
        body = stieltjes_integrate([&](double y) { return u(x, base + y); }, w, *yc, 1.0, {.tol = tol});
      }
      value = *body + detail::deep_piece(u, w, x, base, *yc, 1.0 / v);
    }
    if (!std::isfinite(value)) throw DivergenceError("non-finite average at level " + fmt17(v));
    p.levels.push_back(v);
    p.deltas.push_back(delta);
    p.values.push_back(value);
    if (v > p.guard) {
      p.ratios.emplace_back(value / lil_normalizer(v));
    } else {
      p.ratios.emplace_back(std::nullopt);
    }
  }
  return p;
}

/// Profile over a strictly decreasing delta grid in (0, 1].
inline AverageProfile lil_ratio_profile(const HarmonicField& u, const GraphDomain& dom, const Weight& w,
                                        double x, std::span<const double> deltas, double tol = 1e-9) {
  AverageProfile p;
  p.x = x;
  for (double d : deltas) {
    if (!(d > 0.0 && d <= 1.0)) throw DomainError("delta grid must lie in (0, 1]");
    if (!p.deltas.empty() && !(d < p.deltas.back())) throw DomainError("deltas must decrease strictly");
    const double v = w(d);
    const double value = weighted_average_I(u, dom, w, x, d, tol);
    p.levels.push_back(v);
    p.deltas.push_back(d);
    p.values.push_back(value);
    if (v > p.guard) {
      p.ratios.emplace_back(value / lil_normalizer(v));
    } else {
      p.ratios.emplace_back(std::nullopt);
    }
  }
  return p;
}

inline void write_profile_csv(std::ostream& out, const AverageProfile& p) {
  out << "delta,value,ratio,ratio_valid,level\n";
  for (std::size_t i = 0; i < p.levels.size(); ++i) {
    out << fmt17(p.deltas[i]) << ',' << fmt17(p.values[i]) << ','
        << (p.ratios[i] ? fmt17(*p.ratios[i]) : std::string()) << ',' << (p.ratios[i] ? 1 : 0) << ','
        << fmt17(p.levels[i]) << '\n';
  }
}

}  // namespace blil

#pragma once

// Doubling weights w on (0, inf): non-increasing, w = 1 on (1, inf), w(0+) = inf,
// w(y) <= D w(2y). Everything downstream integrates against the measure d(1/w).

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "blil/error.hpp"
#include "blil/quadrature.hpp"

namespace blil {

class Weight {
 public:
  /// `on_unit` is only ever called with y in (0, 1]; the clamp to 1 above y = 1
  /// is applied here.
  using UnitFn = std::function<double(double)>;

  Weight(std::string label, double doubling_constant, UnitFn on_unit, bool unbounded = true)
      : label_(std::move(label)),
        doubling_(doubling_constant),
        fn_(std::move(on_unit)),
        unbounded_(unbounded) {}

  double operator()(double y) const {
    if (!(y > 0.0)) throw DomainError("weight evaluated at non-positive y = " + std::to_string(y));
    if (y >= 1.0) return 1.0;
    return fn_(y);
  }

  const std::string& label() const noexcept { return label_; }
  double doubling_constant() const noexcept { return doubling_; }
  /// False only for degenerate test weights that violate w(0+) = inf.
  bool unbounded() const noexcept { return unbounded_; }

 private:
  std::string label_;
  double doubling_;
  UnitFn fn_;
  bool unbounded_;
};

namespace weights {

inline std::string param_label(const char* family, double value) {
  std::ostringstream os;
  os << family << ':' << value;
  return os.str();
}

/// w0(y) = log log(e/y) + 1. Written as log1p(log(1/y)) + 1 for accuracy near y = 1.
inline Weight w0() {
  return Weight("w0", 2.0, [](double y) { return std::log1p(-std::log(y)) + 1.0; });
}

/// w(y) = y^-beta, beta in (0, 1].
inline Weight power(double beta) {
  if (!(beta > 0.0 && beta <= 1.0)) {
    throw DomainError("power weight exponent must lie in (0, 1]");
  }
  return Weight(param_label("pow", beta), std::pow(2.0, beta),
                [beta](double y) { return std::pow(y, -beta); });
}

/// w(y) = (log(e/y))^gamma, gamma > 0.
inline Weight log_power(double gamma) {
  if (!(gamma > 0.0)) throw DomainError("log-power weight exponent must be positive");
  return Weight(param_label("logpow", gamma), std::pow(1.0 + std::numbers::ln2, gamma),
                [gamma](double y) { return std::pow(1.0 - std::log(y), gamma); });
}

/// w(y) = 1 + log2(1/y) / L. Grows by exactly one per L dyadic ranks, which makes
/// the stopping-time bracketing j-1 <= w(2^-beta_j) <= j solvable at small depth.
inline Weight log_linear(double ranks_per_unit) {
  if (!(ranks_per_unit > 0.0)) throw DomainError("log-linear weight scale must be positive");
  return Weight(param_label("loglin", ranks_per_unit), 1.0 + 1.0 / ranks_per_unit,
                [ranks_per_unit](double y) { return 1.0 - std::log2(y) / ranks_per_unit; });
}

/// Bounded weight w = 1. Violates w(0+) = inf; only for error-path tests.
inline Weight degenerate_constant() {
  return Weight("const1", 1.0, [](double) { return 1.0; }, /*unbounded=*/false);
}

}  // namespace weights

/// Parses `w0`, `pow:B`, `logpow:G`, `loglin:L`.
inline Weight parse_weight(const std::string& token) {
  const auto colon = token.find(':');
  const std::string family = token.substr(0, colon);
  if (family == "w0") {
    if (colon != std::string::npos) throw ParseError("w0 takes no parameter", token);
    return weights::w0();
  }
  if (colon == std::string::npos) throw ParseError("unknown weight family", token);
  const std::string arg = token.substr(colon + 1);
  double value = 0.0;
  std::size_t used = 0;
  try {
    value = std::stod(arg, &used);
  } catch (const std::logic_error&) {
    throw ParseError("weight parameter is not a number", token);
  }
  if (used != arg.size()) throw ParseError("trailing characters in weight parameter", token);
  try {
    if (family == "pow") return weights::power(value);
    if (family == "logpow") return weights::log_power(value);
    if (family == "loglin") return weights::log_linear(value);
  } catch (const DomainError& e) {
    throw ParseError(e.what(), token);
  }
  throw ParseError("unknown weight family", token);
}

/// Smallest representable lower bracket for inversion.
inline constexpr double kInversionFloor = std::numeric_limits<double>::denorm_min();

/// Solves w(y) = v on (0, 1] by geometric bisection. Returns the upper end of the
/// final bracket, so w(result) <= v and result / root - 1 <= tol.
inline double invert_weight(const Weight& w, double v, double tol = 1e-12) {
  if (!(v >= 1.0)) throw DomainError("weight values are >= 1; cannot invert v < 1");
  if (v == 1.0) return 1.0;
  double lo = kInversionFloor;
  double hi = 1.0;
  if (w(lo) < v) {
    throw UnboundedWeightError("weight '" + w.label() + "' does not reach " + std::to_string(v) +
                               " above 2^-1074");
  }
  for (int it = 0; it < 4000 && hi > lo * (1.0 + tol); ++it) {
    const double mid = std::sqrt(lo) * std::sqrt(hi);
    if (mid <= lo || mid >= hi) break;
    if (w(mid) >= v) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

struct ScaleSequence {
  std::vector<double> s;   ///< w(s[k]) = 2^k, s[0] = 1
  std::vector<int> alpha;  ///< -floor(log2 s[k]), alpha[0] = 0
};

inline ScaleSequence scale_sequence(const Weight& w, int levels, double tol = 1e-12) {
  if (levels < 0) throw DomainError("scale sequence length must be non-negative");
  ScaleSequence out;
  out.s.push_back(1.0);
  out.alpha.push_back(0);
  const double d2 = w.doubling_constant() * w.doubling_constant();
  for (int k = 1; k <= levels; ++k) {
    const double target = std::ldexp(1.0, k);
    const double sk = invert_weight(w, target, tol);
    const int ak = -static_cast<int>(std::floor(std::log2(sk)));
    const double ratio = w(std::ldexp(1.0, -ak)) / target;
    if (ratio < 1.0 / d2 || ratio > d2) {
      throw DomainError("w(2^-alpha_k)/2^k outside [1/D^2, D^2] at k = " + std::to_string(k));
    }
    out.s.push_back(sk);
    out.alpha.push_back(ak);
  }
  return out;
}

struct StieltjesOptions {
  double tol = 1e-9;
  std::size_t initial_cells = 16;
  std::size_t max_cells = std::size_t{1} << 22;
};

/// Integral of g over [a, b] against d(1/w). The partition is uniform in log y;
/// each pass doubles it, sums g(geometric midpoint) * (1/w(y_{i+1}) - 1/w(y_i)),
/// and applies one Richardson step to the midpoint sums. Stops when consecutive
/// extrapolated estimates differ by less than tol * (1 + |estimate|).
template <class G>
double stieltjes_integrate(G&& g, const Weight& w, double a, double b,
                           const StieltjesOptions& opt = {}) {
  if (!(a > 0.0) || !(b <= 1.0)) throw DomainError("Stieltjes range must lie in (0, 1]");
  if (a > b) throw DomainError("Stieltjes range has a > b");
  if (a == b) return 0.0;

  const double la = std::log(a);
  const double lb = std::log(b);
  std::size_t n = std::max<std::size_t>(
      opt.initial_cells, static_cast<std::size_t>(std::ceil(4.0 * (lb - la))));

  // Reciprocal weights at partition nodes, refined in place.
  std::vector<double> inv_w(n + 1);
  auto node = [&](std::size_t i, std::size_t cells) {
    if (i == 0) return a;
    if (i == cells) return b;
    return std::exp(la + (lb - la) * static_cast<double>(i) / static_cast<double>(cells));
  };
  for (std::size_t i = 0; i <= n; ++i) inv_w[i] = 1.0 / w(node(i, n));

  auto midpoint_sum = [&](std::size_t cells) {
    CompensatedSum sum;
    for (std::size_t i = 0; i < cells; ++i) {
      const double mid =
          std::exp(la + (lb - la) * (static_cast<double>(i) + 0.5) / static_cast<double>(cells));
      sum.add(g(mid) * (inv_w[i + 1] - inv_w[i]));
    }
    return sum.value();
  };

  double coarse = midpoint_sum(n);
  double previous = coarse;
  bool have_previous = false;
  while (2 * n <= opt.max_cells) {
    std::vector<double> refined(2 * n + 1);
    for (std::size_t i = 0; i <= n; ++i) refined[2 * i] = inv_w[i];
    for (std::size_t i = 0; i < n; ++i) refined[2 * i + 1] = 1.0 / w(node(2 * i + 1, 2 * n));
    inv_w.swap(refined);
    n *= 2;
    const double fine = midpoint_sum(n);
    const double extrapolated = fine + (fine - coarse) / 3.0;
    if (have_previous &&
        std::abs(extrapolated - previous) < opt.tol * (1.0 + std::abs(extrapolated))) {
      return extrapolated;
    }
    if (!std::isfinite(extrapolated)) {
      throw ToleranceError("Stieltjes sum is not finite", extrapolated);
    }
    previous = extrapolated;
    have_previous = true;
    coarse = fine;
  }
  throw ToleranceError("Stieltjes refinement cap reached", previous);
}

/// m(tau) = int_0^1 exp(-2 pi y |tau|) d(1/w(y)). The piece (0, y_c] is taken as a
/// single cell of mass 1/w(y_c), with y_c small enough that the integrand differs
/// from 1 by less than tol there.
inline double multiplier_symbol(const Weight& w, double tau, double tol = 1e-9) {
  const double t = std::abs(tau);
  if (t == 0.0) return 1.0;
  const double rate = 2.0 * std::numbers::pi * t;
  const double yc = std::min(1.0, tol / (10.0 * rate));
  auto g = [rate](double y) { return std::exp(-rate * y); };
  const double head = std::exp(-0.5 * rate * yc) / w(yc);
  const double body = yc < 1.0 ? stieltjes_integrate(g, w, yc, 1.0, {.tol = tol}) : 0.0;
  return head + body;
}

/// max over the grid of w(y) / w(2y).
inline double verify_doubling(const Weight& w, std::span<const double> grid) {
  if (grid.empty()) throw DomainError("doubling check needs a non-empty grid");
  double worst = 0.0;
  for (double y : grid) {
    if (!(y > 0.0 && y <= 2.0)) throw DomainError("doubling grid must lie in (0, 2]");
    worst = std::max(worst, w(y) / w(2.0 * y));
  }
  return worst;
}

/// n points log-uniform on [lo, hi].
inline std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  }
  out.front() = lo;
  out.back() = hi;
  return out;
}

}  // namespace blil

#pragma once

// Test functions on the upper half-plane and on regions above Lipschitz graphs,
// plus grid estimators for the weighted growth norm and the Bloch seminorm.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "blil/error.hpp"
#include "blil/quadrature.hpp"
#include "blil/weights.hpp"

namespace blil {

struct BoundaryData {
  std::function<double(double)> fn;
  double lo = 0.0;
  double hi = 0.0;
  std::optional<double> holder_alpha;
  std::vector<double> kinks;  ///< points where fn is not smooth; quadrature splits there

  double operator()(double t) const { return (t < lo || t > hi) ? 0.0 : fn(t); }
};

/// Two-column CSV `t,f` with a header row; linear interpolation between nodes,
/// zero outside the node range.
inline BoundaryData boundary_from_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open boundary data file " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("boundary CSV has no header", path);
  std::vector<double> ts, fs;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError("expected two columns at row " + std::to_string(row), line);
    try {
      std::size_t used = 0;
      const std::string a = line.substr(0, comma);
      const std::string b = line.substr(comma + 1);
      ts.push_back(std::stod(a, &used));
      fs.push_back(std::stod(b));
    } catch (const std::logic_error&) {
      throw ParseError("non-numeric entry at row " + std::to_string(row), line);
    }
    if (ts.size() > 1 && !(ts.back() > ts[ts.size() - 2])) {
      throw ParseError("t column must be strictly increasing at row " + std::to_string(row), line);
    }
  }
  if (ts.size() < 2) throw ParseError("boundary CSV needs at least two rows", path);
  BoundaryData f;
  f.lo = ts.front();
  f.hi = ts.back();
  f.kinks = ts;
  f.fn = [ts, fs](double t) {
    const auto it = std::upper_bound(ts.begin(), ts.end(), t);
    if (it == ts.begin()) return fs.front();
    if (it == ts.end()) return fs.back();
    const std::size_t i = static_cast<std::size_t>(it - ts.begin());
    const double s = (t - ts[i - 1]) / (ts[i] - ts[i - 1]);
    return fs[i - 1] + s * (fs[i] - fs[i - 1]);
  };
  return f;
}

enum class FieldKind { poisson, lacunary, box, kernel, constant, affine, synthetic, approximant };

inline const char* to_string(FieldKind k) {
  switch (k) {
    case FieldKind::poisson: return "poisson";
    case FieldKind::lacunary: return "lacunary";
    case FieldKind::box: return "box";
    case FieldKind::kernel: return "kernel";
    case FieldKind::constant: return "constant";
    case FieldKind::affine: return "affine";
    case FieldKind::synthetic: return "synthetic";
    case FieldKind::approximant: return "approximant";
  }
  return "?";
}

struct Gradient {
  double dx = 0.0;
  double dy = 0.0;
  double norm() const { return std::hypot(dx, dy); }
};

/// Behaviour of a field at heights too small for a double to separate from 0.
/// Below `height`, integral(x, s_lo, s_hi) returns the integral of u over the
/// heights whose reciprocal weight lies in [s_lo, s_hi], i.e. the contribution of
/// those heights to an integral against d(1/w).
struct DeepModel {
  double height = 0.0;
  std::function<double(double x, double s_lo, double s_hi)> integral;
};

class HarmonicField {
 public:
  using EvalFn = std::function<double(double, double)>;
  using GradFn = std::function<Gradient(double, double)>;

  HarmonicField(FieldKind kind, std::string label, EvalFn eval, GradFn grad)
      : kind_(kind), label_(std::move(label)), eval_(std::move(eval)), grad_(std::move(grad)) {}

  double operator()(double x, double y) const { return eval_(x, y); }
  Gradient grad(double x, double y) const { return grad_(x, y); }

  FieldKind kind() const noexcept { return kind_; }
  const std::string& label() const noexcept { return label_; }

  const std::optional<DeepModel>& deep() const noexcept { return deep_; }
  HarmonicField& with_deep(DeepModel m) {
    deep_ = std::move(m);
    return *this;
  }

  /// Free-form metadata such as truncation warnings.
  const std::vector<std::string>& notes() const noexcept { return notes_; }
  void add_note(std::string s) { notes_.push_back(std::move(s)); }

 private:
  FieldKind kind_;
  std::string label_;
  EvalFn eval_;
  GradFn grad_;
  std::optional<DeepModel> deep_;
  std::vector<std::string> notes_;
};

inline HarmonicField constant_field(double c) {
  std::ostringstream os;
  os << "constant:" << c;
  HarmonicField f(FieldKind::constant, os.str(), [c](double, double) { return c; },
                  [](double, double) { return Gradient{}; });
  f.with_deep({std::numeric_limits<double>::infinity(),
               [c](double, double lo, double hi) { return c * (hi - lo); }});
  return f;
}

/// u(x, y) = a + b x + c y.
inline HarmonicField affine_field(double a, double b, double c) {
  std::ostringstream os;
  os << "affine:" << a << ',' << b << ',' << c;
  HarmonicField f(FieldKind::affine, os.str(), [=](double x, double y) { return a + b * x + c * y; },
                  [=](double, double) { return Gradient{b, c}; });
  const double below = c == 0.0 ? std::numeric_limits<double>::infinity() : 1e-13 / std::abs(c);
  f.with_deep({below, [=](double x, double lo, double hi) { return (a + b * x) * (hi - lo); }});
  return f;
}

/// u(x, y) = w(y). Not harmonic; the standard non-cancelling input for guards.
inline HarmonicField weight_field(const Weight& w) {
  HarmonicField f(
      FieldKind::synthetic, "weight:" + w.label(), [w](double, double y) { return w(y); },
      [w](double, double y) {
        const double h = 1e-6 * y;
        return Gradient{0.0, (w(y + h) - w(y - h)) / (2.0 * h)};
      });
  // Over heights with 1/w in [lo, hi] the integrand is 1/s, so the piece is log(hi/lo).
  f.with_deep({std::numeric_limits<double>::infinity(), [](double, double lo, double hi) {
                 if (!(lo > 0.0)) {
                   throw DivergenceError("integral of w d(1/w) diverges at the boundary");
                 }
                 return std::log(hi / lo);
               }});
  return f;
}

/// u = w(y)^2, same guard behaviour as weight_field with a faster blow-up.
inline HarmonicField weight_squared_field(const Weight& w) {
  HarmonicField f(
      FieldKind::synthetic, "weight2:" + w.label(),
      [w](double, double y) {
        const double v = w(y);
        return v * v;
      },
      [w](double, double y) {
        const double h = 1e-6 * y;
        const double a = w(y + h);
        const double b = w(y - h);
        return Gradient{0.0, (a * a - b * b) / (2.0 * h)};
      });
  f.with_deep({std::numeric_limits<double>::infinity(), [](double, double lo, double hi) {
                 if (!(lo > 0.0)) {
                   throw DivergenceError("integral of w^2 d(1/w) diverges at the boundary");
                 }
                 return 1.0 / lo - 1.0 / hi;
               }});
  return f;
}

// ---------------------------------------------------------------------------
// Poisson extension

inline double poisson_kernel(double s, double y) {
  return y / (std::numbers::pi * (y * y + s * s));
}

namespace detail {

inline std::vector<double> poisson_cuts(const BoundaryData& f, double x, double y) {
  std::vector<double> cuts = f.kinks;
  for (double m : {-8.0, -1.0, 0.0, 1.0, 8.0}) cuts.push_back(x + m * y);
  return cuts;
}

}  // namespace detail

inline HarmonicField poisson_extend(const BoundaryData& f, double tol = 1e-8) {
  const double floor = 1e-300;
  auto eval = [f, tol, floor](double x, double y) {
    if (!(y > 0.0)) throw DomainError("Poisson extension needs y > 0");
    const auto cuts = detail::poisson_cuts(f, x, y);
    auto g = [&](double t) { return f(t) * poisson_kernel(x - t, y); };
    return integrate(g, f.lo, f.hi, tol, cuts, floor).value;
  };
  auto grad = [f, tol, floor](double x, double y) {
    if (!(y > 0.0)) throw DomainError("Poisson extension needs y > 0");
    const auto cuts = detail::poisson_cuts(f, x, y);
    auto gx = [&](double t) {
      const double s = x - t;
      const double d = y * y + s * s;
      return f(t) * (-2.0 * y * s) / (std::numbers::pi * d * d);
    };
    auto gy = [&](double t) {
      const double s = x - t;
      const double d = y * y + s * s;
      return f(t) * (s * s - y * y) / (std::numbers::pi * d * d);
    };
    return Gradient{integrate(gx, f.lo, f.hi, tol, cuts, floor).value,
                    integrate(gy, f.lo, f.hi, tol, cuts, floor).value};
  };
  return HarmonicField(FieldKind::poisson, "poisson", eval, grad);
}

// ---------------------------------------------------------------------------
// Lacunary series

/// K + 1 phases uniform on [0, 2 pi) from a seeded Mersenne twister.
inline std::vector<double> lacunary_phases(int K, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
  std::vector<double> out(static_cast<std::size_t>(K) + 1);
  for (auto& p : out) p = u(rng);
  return out;
}

/// u(x, y) = sum_{k=0}^K c_k exp(-2^k y) cos(2^k x + theta_k) with c_0 = 1 and
/// c_k = w(2^-k) - w(2^-k+1). Empty `phases` draws them from `seed`.
inline HarmonicField lacunary_series(const Weight& w, int K, std::vector<double> phases = {},
                                     std::uint64_t seed = 0) {
  if (K < 1) throw DomainError("lacunary series needs K >= 1");
  if (phases.empty()) phases = lacunary_phases(K, seed);
  if (phases.size() != static_cast<std::size_t>(K) + 1) {
    throw DomainError("lacunary series needs K + 1 phases");
  }
  std::vector<double> c(phases.size()), freq(phases.size());
  std::vector<std::string> warnings;
  double grad_mass = 0.0;
  for (int k = 0; k <= K; ++k) {
    freq[k] = std::ldexp(1.0, k);
    c[k] = k == 0 ? 1.0 : w(std::ldexp(1.0, -k)) - w(std::ldexp(1.0, -k + 1));
    if (k > 0 && std::abs(c[k]) < std::numeric_limits<double>::min()) {
      warnings.push_back("coefficient " + std::to_string(k) + " underflows; series truncated there");
    }
    grad_mass += std::abs(c[k]) * freq[k];
  }
  auto eval = [c, freq, phases](double x, double y) {
    CompensatedSum s;
    for (std::size_t k = 0; k < c.size(); ++k) {
      s.add(c[k] * std::exp(-freq[k] * y) * std::cos(freq[k] * x + phases[k]));
    }
    return s.value();
  };
  auto grad = [c, freq, phases](double x, double y) {
    CompensatedSum gx, gy;
    for (std::size_t k = 0; k < c.size(); ++k) {
      const double e = c[k] * freq[k] * std::exp(-freq[k] * y);
      const double arg = freq[k] * x + phases[k];
      gx.add(-e * std::sin(arg));
      gy.add(-e * std::cos(arg));
    }
    return Gradient{gx.value(), gy.value()};
  };
  auto trace = [c, phases](double x) {
    CompensatedSum s;
    for (std::size_t k = 0; k < c.size(); ++k) s.add(c[k] * std::cos(std::ldexp(x, static_cast<int>(k)) + phases[k]));
    return s.value();
  };
  std::ostringstream label;
  label << "lacunary:" << w.label() << ":K=" << K;
  HarmonicField f(FieldKind::lacunary, label.str(), eval, grad);
  // |u(x, y) - u(x, 0)| <= y * sum |c_k| 2^k, so below this height the trace is exact to 1e-13.
  f.with_deep({1e-13 / grad_mass, [trace](double x, double lo, double hi) { return trace(x) * (hi - lo); }});
  for (auto& s : warnings) f.add_note(std::move(s));
  return f;
}

// ---------------------------------------------------------------------------
// Box and kernel fields

/// u(x, y) = (f(x + y) - f(x - y)) / (2y), the box average of f'.
inline HarmonicField box_field(const BoundaryData& f) {
  auto eval = [f](double x, double y) {
    if (!(y > 0.0)) throw DomainError("box field needs y > 0");
    return (f(x + y) - f(x - y)) / (2.0 * y);
  };
  auto grad = [eval](double x, double y) {
    const double h = 1e-6 * y;
    return Gradient{(eval(x + h, y) - eval(x - h, y)) / (2.0 * h),
                    (eval(x, y + h) - eval(x, y - h)) / (2.0 * h)};
  };
  return HarmonicField(FieldKind::box, "box", eval, grad);
}

/// Compactly supported convolution kernel on [lo, hi].
struct Kernel {
  std::function<double(double)> fn;
  double lo = -1.0;
  double hi = 1.0;
  std::vector<double> kinks;

  double operator()(double s) const { return (s < lo || s > hi) ? 0.0 : fn(s); }

  /// s -> Phi(s / r) / r.
  Kernel dilated(double r) const {
    Kernel k;
    k.fn = [f = fn, r](double s) { return f(s / r) / r; };
    k.lo = lo * r;
    k.hi = hi * r;
    for (double c : kinks) k.kinks.push_back(c * r);
    return k;
  }
};

/// Smooth unit-mass bump of half-width eta: c (1 - (s/eta)^2)^4.
inline double smooth_bump(double s, double eta) {
  const double r = s / eta;
  if (std::abs(r) >= 1.0) return 0.0;
  const double q = 1.0 - r * r;
  return (315.0 / 256.0) / eta * q * q * q * q;
}

/// Mollified derivative of the box kernel chi_[-1,1]/2: two opposite bumps of
/// half-width eta at -1 and +1. Against f it gives (f(x+y) - f(x-y))/2 up to O(eta^2 y^2).
inline Kernel box_derivative_kernel(double eta = 1e-3) {
  Kernel k;
  k.fn = [eta](double s) { return 0.5 * (smooth_bump(s + 1.0, eta) - smooth_bump(s - 1.0, eta)); };
  k.lo = -1.0 - eta;
  k.hi = 1.0 + eta;
  k.kinks = {-1.0 - eta, -1.0, -1.0 + eta, 1.0 - eta, 1.0, 1.0 + eta};
  return k;
}

/// u(x, y) = (f * Phi_y)(x) = integral of f(x - y s) Phi(s) ds.
inline HarmonicField kernel_field(const BoundaryData& f, const Kernel& phi, double tol = 1e-10) {
  auto eval = [f, phi, tol](double x, double y) {
    if (!(y > 0.0)) throw DomainError("kernel field needs y > 0");
    std::vector<double> cuts = phi.kinks;
    for (double t : f.kinks) cuts.push_back((x - t) / y);
    cuts.push_back((x - f.lo) / y);
    cuts.push_back((x - f.hi) / y);
    auto g = [&](double s) { return f(x - y * s) * phi(s); };
    return integrate(g, phi.lo, phi.hi, tol, cuts, 1e-300).value;
  };
  auto grad = [eval](double x, double y) {
    const double h = 1e-5 * y;
    return Gradient{(eval(x + h, y) - eval(x - h, y)) / (2.0 * h),
                    (eval(x, y + h) - eval(x, y - h)) / (2.0 * h)};
  };
  return HarmonicField(FieldKind::kernel, "kernel", eval, grad);
}

// ---------------------------------------------------------------------------
// Domains above Lipschitz graphs

class GraphDomain {
 public:
  GraphDomain(std::function<double(double)> phi, double lip, bool flat = false)
      : phi_(std::move(phi)), lip_(lip), flat_(flat) {}

  double phi(double x) const { return phi_(x); }
  double lip_constant() const noexcept { return lip_; }
  bool flat() const noexcept { return flat_; }

  /// Euclidean distance from (x, Y) to the graph. Coarse scan over the only
  /// candidates that can beat the vertical distance, then golden-section search.
  double distance(double x, double Y, double tol = 1e-8) const {
    const double v = Y - phi_(x);
    if (!(v > 0.0)) throw DomainError("point lies on or below the graph");
    if (flat_) return v;
    auto d2 = [&](double t) {
      const double dy = Y - phi_(t);
      return (x - t) * (x - t) + dy * dy;
    };
    constexpr int n = 256;
    const double h = 2.0 * v / n;
    std::vector<double> vals(n + 1);
    for (int i = 0; i <= n; ++i) vals[i] = d2(x - v + h * i);
    double best_val = v * v;
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    // Refine every local minimum of the scan; basins of a kinked graph can be close in value.
    for (int i = 0; i <= n; ++i) {
      if ((i > 0 && vals[i - 1] < vals[i]) || (i < n && vals[i + 1] < vals[i])) continue;
      double a = x - v + h * std::max(i - 1, 0);
      double b = x - v + h * std::min(i + 1, n);
      double c = b - g * (b - a);
      double d = a + g * (b - a);
      double fc = d2(c), fd = d2(d);
      while (b - a > tol * v) {
        if (fc < fd) {
          b = d;
          d = c;
          fd = fc;
          c = b - g * (b - a);
          fc = d2(c);
        } else {
          a = c;
          c = d;
          fc = fd;
          d = a + g * (b - a);
          fd = d2(d);
        }
      }
      best_val = std::min({best_val, vals[i], fc, fd});
    }
    return std::sqrt(best_val);
  }

 private:
  std::function<double(double)> phi_;
  double lip_;
  bool flat_;
};

inline GraphDomain flat_domain() {
  return GraphDomain([](double) { return 0.0; }, 0.0, true);
}

/// phi(x) = min over vertices of |x - x0| / M.
inline GraphDomain cone_domain(std::vector<double> sigma, double M) {
  if (sigma.empty()) throw DomainError("cone domain needs at least one vertex");
  if (!(M > 0.0)) throw DomainError("cone aperture M must be positive");
  auto phi = [sigma = std::move(sigma), M](double x) {
    double best = std::numeric_limits<double>::infinity();
    for (double x0 : sigma) best = std::min(best, std::abs(x - x0));
    return best / M;
  };
  return GraphDomain(phi, 1.0 / M);
}

// ---------------------------------------------------------------------------
// Grids and grid suprema

/// Points (x, h) where h is the height above the graph. y levels are log-spaced.
/// In Whitney mode the x spacing at level h is h / ratio, capped at `cap` points
/// centred in [x_lo, x_hi]; otherwise nx uniform points.
struct GridSpec {
  double x_lo = 0.0;
  double x_hi = 1.0;
  std::size_t nx = 16;
  double y_lo = 1e-3;
  double y_hi = 1.0;
  std::size_t ny = 16;
  bool whitney = false;
  double ratio = 8.0;
  std::size_t cap = 256;

  GridSpec refined() const {
    GridSpec g = *this;
    g.nx = 2 * nx - 1;
    g.ny = 2 * ny - 1;
    g.ratio = 2 * ratio;
    g.cap = 2 * cap;
    return g;
  }

  std::vector<double> heights() const { return log_grid(y_lo, y_hi, ny); }

  std::vector<double> xs_at(double h) const {
    std::vector<double> xs;
    const double width = x_hi - x_lo;
    if (!whitney) {
      if (nx == 1) return {0.5 * (x_lo + x_hi)};
      for (std::size_t i = 0; i < nx; ++i) {
        xs.push_back(x_lo + width * static_cast<double>(i) / static_cast<double>(nx - 1));
      }
      return xs;
    }
    const double step = h / ratio;
    const auto want = static_cast<std::size_t>(std::floor(width / step)) + 1;
    const std::size_t n = std::min(want, cap);
    const double mid = 0.5 * (x_lo + x_hi);
    const double start = mid - step * static_cast<double>(n - 1) / 2.0;
    for (std::size_t i = 0; i < n; ++i) xs.push_back(start + step * static_cast<double>(i));
    return xs;
  }

  template <class F>
  void for_each(F&& f) const {
    for (double h : heights()) {
      for (double x : xs_at(h)) f(x, h);
    }
  }
};

/// max over the grid of |u| / w(dist to graph).
inline double growth_norm(const HarmonicField& u, const GraphDomain& dom, const Weight& w,
                          const GridSpec& grid) {
  double sup = 0.0;
  grid.for_each([&](double x, double h) {
    if (!(h > 0.0)) throw DomainError("grid point not above the graph");
    const double Y = dom.phi(x) + h;
    sup = std::max(sup, std::abs(u(x, Y)) / w(dom.distance(x, Y)));
  });
  return sup;
}

/// max over the grid of dist * |grad u|.
inline double bloch_seminorm(const HarmonicField& u, const GraphDomain& dom, const GridSpec& grid) {
  double sup = 0.0;
  grid.for_each([&](double x, double h) {
    if (!(h > 0.0)) throw DomainError("grid point not above the graph");
    const double Y = dom.phi(x) + h;
    sup = std::max(sup, dom.distance(x, Y) * u.grad(x, Y).norm());
  });
  return sup;
}

/// max over the grid of theta |grad u|(x, phi(x) + theta) / w(theta).
inline double gradient_bound_check(const HarmonicField& u, const GraphDomain& dom, const Weight& w,
                                   const GridSpec& grid) {
  double sup = 0.0;
  grid.for_each([&](double x, double theta) {
    if (!(theta > 0.0)) throw DomainError("grid point not above the graph");
    sup = std::max(sup, theta * u.grad(x, dom.phi(x) + theta).norm() / w(theta));
  });
  return sup;
}

/// Sampled Hoelder-alpha seminorm of f: max |f(s) - f(t)| / |s - t|^alpha over
/// all pairs of an n-point uniform grid on [lo, hi].
inline double holder_seminorm(const BoundaryData& f, double alpha, double lo, double hi, std::size_t n) {
  std::vector<double> ts(n), fs(n);
  for (std::size_t i = 0; i < n; ++i) {
    ts[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    fs[i] = f(ts[i]);
  }
  double sup = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      sup = std::max(sup, std::abs(fs[i] - fs[j]) / std::pow(ts[j] - ts[i], alpha));
    }
  }
  return sup;
}

/// Five-point Laplacian with step h.
inline double discrete_laplacian(const HarmonicField& u, double x, double y, double h) {
  return (u(x + h, y) + u(x - h, y) + u(x, y + h) + u(x, y - h) - 4.0 * u(x, y)) / (h * h);
}

}  // namespace blil

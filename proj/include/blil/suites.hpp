#pragma once

// Acceptance suites. Each runs a fixed protocol, records the constants it
// measured, and fails when a bound is missed or the run exceeds its time budget.

#include <chrono>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "blil/averages.hpp"
#include "blil/counterexample.hpp"
#include "blil/martingale.hpp"

namespace blil {

struct SuiteResult {
  int id = 0;
  std::string name;
  bool pass = true;
  double seconds = 0.0;
  double budget = 0.0;
  std::vector<std::pair<std::string, double>> measured;
  std::vector<std::string> failures;

  void add(std::string key, double v) { measured.emplace_back(std::move(key), v); }
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      failures.push_back(what);
    }
  }
};

namespace suites {

inline std::vector<Weight> quadrature_weights() {
  return {weights::w0(), weights::power(0.5), weights::power(1.0), weights::log_power(2.0), weights::log_linear(9.0)};
}

// Closed forms: mass 1 - 1/w(delta), integral of w is ln w(delta), and for
// w = 1/y the integral of y is (1 - delta^2)/2.
inline void quadrature(SuiteResult& r) {
  double worst = 0.0;
  for (const auto& w : quadrature_weights()) {
    for (double delta : {0.5, 1e-3, 1e-12}) {
      const double mass = stieltjes_integrate([](double) { return 1.0; }, w, delta, 1.0);
      const double expect_mass = 1.0 - 1.0 / w(delta);
      const double logw = stieltjes_integrate([&](double y) { return w(y); }, w, delta, 1.0);
      const double expect_log = std::log(w(delta));
      worst = std::max({worst, std::abs(mass - expect_mass) / std::abs(expect_mass),
                        std::abs(logw - expect_log) / std::abs(expect_log)});
    }
  }
  const auto inv = weights::power(1.0);
  for (double delta : {0.5, 0.01, 1e-6}) {
    const double got = stieltjes_integrate([](double y) { return y; }, inv, delta, 1.0);
    const double expect = (1 - delta * delta) / 2;
    worst = std::max(worst, std::abs(got - expect) / expect);
  }
  r.add("max_rel_err", worst);
  r.require(worst <= 1e-8, "closed-form relative error above 1e-8");
}

inline BoundaryData boundary(std::function<double(double)> fn, std::vector<double> kinks = {}) {
  BoundaryData f;
  f.fn = std::move(fn);
  f.lo = -10.0;
  f.hi = 10.0;
  f.kinks = std::move(kinks);
  return f;
}

// Hoelder-alpha boundary data; each member is Lip_alpha on [-10, 10].
inline std::vector<std::pair<std::string, BoundaryData>> holder_corpus(double alpha) {
  std::vector<double> unit_kinks;
  for (double k = -10.0; k <= 10.0; k += 0.5) unit_kinks.push_back(k);
  return {
      {"linear", boundary([](double t) { return t; })},
      {"smoothed_saw", boundary(
                           [](double t) {
                             const double r = t - std::floor(t) - 0.5;
                             return std::sqrt(r * r + 1e-4);
                           },
                           unit_kinks)},
      {"trig", boundary([](double t) { return std::sin(3 * t) + 0.5 * std::cos(7 * t); })},
      {"cusp", boundary([alpha](double t) { return std::pow(std::abs(t - 0.31), alpha); }, {0.31})},
      {"weierstrass", boundary([alpha](double t) {
         double s = 0.0;
         for (int n = 0; n <= 8; ++n) s += std::pow(2.0, -n * alpha) * std::cos(std::ldexp(t, n));
         return s;
       })},
  };
}

inline void theta_identity(SuiteResult& r) {
  double worst = 0.0;
  int cases = 0;
  for (double alpha : {0.3, 0.5, 0.7}) {
    for (const auto& [name, f] : holder_corpus(alpha)) {
      for (int e = 4; e <= 12; ++e) {
        for (double x : {0.2, 1.37}) {
          worst = std::max(worst, theta_identity_residual(f, alpha, std::ldexp(1.0, -e), x, 1e-9));
          ++cases;
        }
      }
    }
  }
  r.add("cases", cases);
  r.add("max_residual", worst);
  r.require(worst <= 1e-6, "identity residual above 1e-6");
}

inline HaarExpansion random_expansion(int max_rank, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  HaarExpansion e(max_rank, g(rng));
  for (int r = 0; r <= max_rank; ++r) {
    for (auto& b : e.coeffs[r]) b = g(rng) * std::ldexp(1.0, -r / 2);
  }
  return e;
}

inline void haar_martingale(SuiteResult& r) {
  double round_trip = 0.0, tower = 0.0, parseval = 0.0, square_fn = 0.0;
  for (int R = 0; R <= 10; ++R) {
    const auto e = random_expansion(R, 100 + R);
    const auto pieces = haar_synthesize_pieces(e, R);
    const auto back = haar_analyze_piecewise(pieces, R);
    round_trip = std::max(round_trip, std::abs(back.mean - e.mean));
    for (int k = 0; k <= R; ++k) {
      for (std::size_t i = 0; i < e.coeffs[k].size(); ++i) {
        round_trip = std::max(round_trip, std::abs(back.at(k, i) - e.at(k, i)));
      }
    }
    const auto table = table_from_expansion(e);
    // Square integral of each level against the Haar side and the integrated square function.
    for (int k = 0; k <= R; ++k) {
      CompensatedSum coeff_side;
      coeff_side.add(e.mean * e.mean);
      for (int m = 0; m <= k; ++m) {
        for (double b : e.coeffs[m]) coeff_side.add(b * b * std::ldexp(1.0, -m));
      }
      const double lhs = level_square_integral(table, k + 1);
      CompensatedSum qf_side;
      const std::size_t n = std::size_t{1} << (k + 1);
      for (std::size_t i = 0; i < n; ++i) {
        qf_side.add(quadratic_function(table, k + 1, (static_cast<double>(i) + 0.5) / static_cast<double>(n)));
      }
      parseval = std::max({parseval, std::abs(lhs - coeff_side.value()),
                           std::abs(lhs - qf_side.value() / static_cast<double>(n))});
    }
    // Square function against the chain sum on every finest-level cell.
    const std::size_t n = std::size_t{1} << (R + 1);
    for (std::size_t i = 0; i < n; ++i) {
      const double p = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
      for (int k = -1; k <= R; ++k) {
        double expect = e.mean * e.mean;
        for (int m = 0; m <= k; ++m) expect += std::pow(e.coeff(DyadicInterval::containing(p, m)), 2);
        square_fn = std::max(square_fn, std::abs(quadratic_function(table, k + 1, p) - expect));
      }
    }
  }
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> vals(1 << 10);
  for (auto& v : vals) v = u(rng);
  for (const auto& ranks : {std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, std::vector<int>{0, 3, 4, 8, 10}}) {
    const auto t = table_from_conditional_expectations(vals, ranks);
    for (std::size_t k = 0; k + 1 < t.depth(); ++k) {
      for (const auto& [idx, v] : t.levels[k]) {
        tower = std::max(tower, std::abs(conditional_expectation(t, k, DyadicInterval(t.filtration[k], idx)) - v));
      }
    }
  }
  r.add("round_trip", round_trip);
  r.add("tower", tower);
  r.add("parseval", parseval);
  r.add("square_function", square_fn);
  r.require(round_trip <= 1e-12, "round trip above 1e-12");
  r.require(tower <= 1e-10, "tower property above 1e-10");
  r.require(parseval <= 1e-8, "Parseval residual above 1e-8");
  r.require(square_fn <= 1e-10, "square function differs from the chain sum");
}

inline std::vector<double> periodic_samples(std::size_t n) {
  std::vector<double> xs;
  for (std::size_t i = 0; i < n; ++i) xs.push_back(2 * std::numbers::pi * (static_cast<double>(i) + 0.5) / n);
  return xs;
}

inline void approximant(SuiteResult& r) {
  std::vector<double> thetas;
  for (int k = 1; k <= 14; ++k) thetas.push_back(std::ldexp(1.0, -k));
  const auto xs = periodic_samples(16);
  const GridSpec grid{0, 2 * std::numbers::pi, 0, std::ldexp(1.0, -14), 1.0, 15, true, 4.0, 64};
  for (const auto& w : {weights::w0(), weights::power(0.5)}) {
    int flat = 0;
    double sup = 0.0;
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
      const auto scan = approximation_error_scan(lacunary_series(w, 16, {}, seed), flat_domain(), w, xs, thetas);
      flat += trend_free(scan.per_theta);
      sup = std::max(sup, scan.sup);
    }
    const auto u = lacunary_series(w, 16, {}, 4);
    const auto H = approximant_field(u, w, 1e-8);
    const double coarse = bloch_seminorm(H, flat_domain(), grid);
    const double fine = bloch_seminorm(H, flat_domain(), grid.refined());
    r.add(w.label() + ".trend_free_fields", flat);
    r.add(w.label() + ".error_sup", sup);
    r.add(w.label() + ".bloch", coarse);
    r.add(w.label() + ".bloch_refined", fine);
    r.require(flat == 8, w.label() + ": error scan fails the running-median rule on some field");
    r.require(std::isfinite(coarse) && std::abs(fine / coarse - 1.0) <= 0.1,
              w.label() + ": Bloch seminorm of H not grid-stable");
  }
}

/// Least-squares slope of the values against their index.
inline double index_slope(std::span<const double> v) {
  const double n = static_cast<double>(v.size());
  if (v.size() < 2) return 0.0;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double x = static_cast<double>(i);
    sx += x;
    sy += v[i];
    sxx += x * x;
    sxy += x * v[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

struct LiProbe {
  LiBounds bounds;
  double max_step = 0.0;  ///< max over x, k of |I(x, s_k) - I(x, s_(k+1))|
};

// Surrogate martingale sampled from H on the rescaled circle x = 2 pi t.
inline LiProbe li_probe(const HarmonicField& u, const Weight& w, int K, std::size_t n_points) {
  const auto flat = flat_domain();
  const auto scales = scale_sequence(w, K + 1);
  std::vector<double> ts;
  for (std::size_t i = 0; i < n_points; ++i) ts.push_back((static_cast<double>(i) + 0.37) / n_points);
  auto H = [&](double t, double y) { return bloch_approximant_H(u, flat, w, 2 * std::numbers::pi * t, y, 1e-8); };
  const auto table = bloch_to_martingale(H, flat, scales, 1.0, K, ts);
  LiProbe out;
  std::vector<std::vector<double>> avg;
  for (double t : ts) {
    std::vector<double> row;
    for (int k = 0; k <= K + 1; ++k) row.push_back(weighted_average_I(u, flat, w, 2 * std::numbers::pi * t, scales.s[k]));
    for (int k = 0; k <= K; ++k) out.max_step = std::max(out.max_step, std::abs(row[k + 1] - row[k]));
    row.pop_back();
    avg.push_back(row);
  }
  out.bounds = li_bounds_check(table, ts, avg);
  return out;
}

inline void li_bounds(SuiteResult& r) {
  const auto w = weights::power(0.5);
  const auto u = lacunary_series(w, 22, {}, 12);
  const GridSpec grid{0, 2 * std::numbers::pi, 0, std::ldexp(1.0, -30), 4.0, 40, true, 8.0, 128};
  const double gn = growth_norm(u, flat_domain(), w, grid);
  const auto p = li_probe(u, w, 10, 64);
  const bool li1 = trend_free(p.bounds.level_vs_average);
  const bool li2 = trend_free(p.bounds.level_steps);
  r.add("growth_norm", gn);
  r.add("sup_level_vs_average", p.bounds.sup_level_vs_average);
  r.add("sup_level_steps", p.bounds.sup_level_steps);
  r.add("max_average_step", p.max_step);
  r.add("step_over_growth_norm", p.max_step / gn);
  r.add("level_vs_average.slope", index_slope(p.bounds.level_vs_average));
  r.add("level_steps.slope", index_slope(p.bounds.level_steps));
  r.require(li1, "level-vs-average differences grow with k");
  r.require(li2, "level steps grow with k");
  r.require(p.max_step <= 2 * gn * (1 + 1e-6), "consecutive averages differ by more than 2 growth_norm");
  // Control: u = w^2 is outside the growth class and both quantities must grow.
  const auto c = li_probe(weight_squared_field(w), w, 10, 64);
  r.add("control.sup_level_vs_average", c.bounds.sup_level_vs_average);
  r.add("control.sup_level_steps", c.bounds.sup_level_steps);
  r.add("control.level_vs_average.slope", index_slope(c.bounds.level_vs_average));
  r.require(!trend_free(c.bounds.level_vs_average) && !trend_free(c.bounds.level_steps),
            "w^2 control did not show growth");
}

inline void lil_ratio(SuiteResult& r) {
  const auto w = weights::w0();
  std::vector<double> levels;
  for (int k = 1; k <= 1000; ++k) levels.push_back(std::ldexp(1.0, k));
  const auto xs = periodic_samples(64);
  const GridSpec grid{0, 2 * std::numbers::pi, 0, std::ldexp(1.0, -24), 4.0, 30, true, 8, 128};
  double worst = 0.0, worst_gn = 0.0;
  for (std::uint64_t s = 0; s < 64; ++s) {
    const auto u = lacunary_series(w, 20, {}, 1000 + s);
    const double gn = growth_norm(u, flat_domain(), w, grid);
    double m = 0.0;
    for (double x : xs) m = std::max(m, lil_ratio_profile_levels(u, flat_domain(), w, x, levels).max_abs_ratio());
    if (m / gn > worst) {
      worst = m / gn;
      worst_gn = gn;
    }
  }
  const auto control = weight_field(w);
  const double control_gn = growth_norm(control, flat_domain(), w, grid);
  const double control_ratio = lil_ratio_profile_levels(control, flat_domain(), w, 0.0, levels).max_abs_ratio();
  r.add("max_ratio_over_growth_norm", worst);
  r.add("growth_norm_at_max", worst_gn);
  r.add("control.ratio_over_growth_norm", control_ratio / control_gn);
  r.require(worst <= 10.0, "ratio exceeds 10 growth_norm");
  r.require(control_ratio / control_gn > 10.0, "w(y) control stays below 10 growth_norm");
}

// Whole-tree reference: every interval of rank <= K is materialised, Phi_m is
// kept on the grid p 2^-(K+1), and each generation's stopped region is a point mask.
struct DenseTree {
  int K = 0;
  std::vector<std::vector<int>> c;
  std::vector<std::vector<int>> blocked;
  std::vector<std::vector<double>> phi_at;
};

inline DenseTree dense_tree(const MotherWavelet& phi, int a, const std::vector<int>& beta) {
  DenseTree T;
  T.K = beta.back();
  const int K = T.K;
  const std::size_t P = std::size_t{2} << K;
  std::vector<double> Phi(P + 1, 0.0);
  std::vector<char> region(P + 1, 0);
  auto gen_of_step = [&](int m) {
    int g = 0;
    for (int b : beta) g += b < m;
    return g;
  };
  auto inside = [&](int m, std::size_t i) {
    const std::size_t span = std::size_t{2} << (K - m);
    return region[i * span + span / 2] != 0;
  };
  for (int m = 0; m <= K; ++m) {
    const std::size_t n = std::size_t{1} << m;
    const std::size_t span = std::size_t{2} << (K - m);
    T.c.emplace_back(n, 0);
    T.blocked.emplace_back(n, 0);
    const bool add_step = m == 0 || m % a == 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!(m == 0 || (add_step && !inside(m, i)))) continue;
      T.c[m][i] = 1;
      for (std::size_t p = i * span + 1; p < (i + 1) * span; ++p) {
        Phi[p] += phi(std::ldexp(static_cast<double>(p) / static_cast<double>(P), m) - static_cast<double>(i));
      }
    }
    const bool fresh = std::find(beta.begin(), beta.end(), m) != beta.end();
    const int g = fresh ? gen_of_step(m) + 1 : gen_of_step(m);
    if (fresh) std::fill(region.begin(), region.end(), 0);
    if (fresh || m % a == 0) {
      for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(Phi[(2 * i + 1) << (K - m)]) > g) {
          for (std::size_t p = i * span + 1; p <= (i + 1) * span; ++p) region[p] = 1;
        }
      }
    }
    for (std::size_t i = 0; i < n; ++i) T.blocked[m][i] = inside(m, i);
    T.phi_at.push_back(Phi);
  }
  return T;
}

inline Overrides toy_overrides(int a, bool relax_upper = false) {
  Overrides ov;
  ov.a = a;
  ov.relax_bracket_upper = relax_upper;
  return ov;
}

inline std::vector<ConstructionParams> toy_instances(const MotherWavelet& phi) {
  return {
      make_params(phi, 2, {0, 2, 6}, weights::log_linear(3), toy_overrides(2)),
      make_params(phi, 2, {0, 2, 6, 12}, weights::log_linear(3), toy_overrides(2, true)),
      make_params(phi, 1, {0, 6, 12}, weights::log_linear(6), toy_overrides(1)),
      make_params(phi, 2, {0, 8, 12}, weights::log_linear(8), toy_overrides(2)),
      make_params(phi, 3, {0, 9, 12}, weights::log_linear(9), toy_overrides(3)),
  };
}

inline ConstructionParams deep_instance(const MotherWavelet& phi, bool relax_j0 = false) {
  Overrides ov;
  ov.relax_j0 = relax_j0;
  return make_params(phi, 9, {0, 72, 144, 216}, weights::log_linear(72), ov);
}

inline void structural(const MotherWavelet& phi, const ConstructionParams& p, bool exhaustive, SuiteResult& r,
                       double& step, double& env_margin, double& level_min) {
  StoppingConstruction sc(phi, p);
  const int K = p.depth();
  if (exhaustive) {
    const auto T = dense_tree(phi, p.a, p.beta);
    bool same = true;
    double phi_diff = 0.0;
    for (int m = 0; m <= K; ++m) {
      for (std::uint64_t i = 0; i < (std::uint64_t{1} << m); ++i) {
        const auto d = sc.decision(DyadicInterval(m, i));
        same = same && d.c == T.c[m][i] && d.blocked == bool(T.blocked[m][i]);
      }
      const std::size_t P = std::size_t{2} << K;
      for (std::size_t q = 1; q <= P; ++q) {
        phi_diff = std::max(phi_diff, std::abs(sc.phi_eval(m, static_cast<double>(q) / P) - T.phi_at[m][q]));
      }
    }
    r.require(same, "lazy decisions differ from the dense tree");
    r.require(phi_diff <= 1e-12, "lazy Phi differs from the dense tree");
  }
  const Sampler sp = exhaustive ? Sampler{Sampler::Kind::grid, 4096} : Sampler{Sampler::Kind::monte_carlo, 2000, 9};
  const auto loci = sample_loci(sp, K);
  for (int k = 1; k <= K; ++k) {
    const double s = bloch_step_norm(sc, k, loci);
    step = std::max(step, s);
    r.require(k % p.a == 0 || s == 0.0, "a bump was added off the rank lattice");
  }
  for (int k = 0; k <= K; ++k) {
    env_margin = std::min(env_margin, growth_bound(sc, k) - growth_envelope(sc, k, loci));
  }
  for (const auto& x : sample_loci({Sampler::Kind::monte_carlo, 300, 5}, K)) {
    const Chain ch = sc.chain(x, K);
    int last = -1;
    for (int m = 0; m <= K; ++m) {
      if (!ch.d[m].c) continue;
      r.require(last < 0 || m - last >= p.a, "nonzero coefficients closer than a ranks");
      last = m;
    }
  }
  for (int j = 0; j < p.generations(); ++j) {
    level_min = std::min(level_min, level_set_measure(sc, j, level_threshold(sc, j), sp).measure);
  }
}

inline void counterexample(SuiteResult& r) {
  const auto phi = make_mother_wavelet();
  double step = 0.0, env_margin = 1e300, level_min = 1.0;
  for (const auto& p : toy_instances(phi)) structural(phi, p, true, r, step, env_margin, level_min);
  structural(phi, deep_instance(phi), false, r, step, env_margin, level_min);
  r.add("max_step", step);
  r.add("min_envelope_margin", env_margin);
  r.add("min_level_set_measure", level_min);
  r.require(step <= 1.0, "step above 1");
  r.require(env_margin >= 0.0, "envelope above the shifted bound");
  r.require(level_min >= 0.1, "level set measure below 1/10");

  StoppingConstruction deep(phi, deep_instance(phi));
  const auto loci = sample_loci({Sampler::Kind::monte_carlo, 1000, 31}, deep.depth());
  double coeff_min = 1e300, qf_margin = 1e300;
  for (int j = 1; j <= 2; ++j) {
    const auto active = active_intervals(deep, j, loci);
    r.require(!active.empty(), "no active intervals on the deep instance");
    if (!active.empty()) coeff_min = std::min(coeff_min, haar_coefficient_bound(deep, j, active).min_abs);
    const auto q = quadratic_lower_bound(deep, j, loci);
    r.require(q.surviving > 0, "no surviving chains on the deep instance");
    qf_margin = std::min(qf_margin, q.min_sum - q.threshold);
  }
  const double coeff_floor = 0.5 * std::abs(phi.haar_pairing) - 1e-8;
  r.add("min_active_coefficient", coeff_min);
  r.add("coefficient_floor", coeff_floor);
  r.add("min_quadratic_margin", qf_margin);
  r.require(coeff_min >= coeff_floor, "active coefficient below half the pairing");
  r.require(qf_margin >= 0.0, "quadratic sum below its threshold");

  StoppingConstruction relaxed(phi, deep_instance(phi, true));
  const Sampler build{Sampler::Kind::monte_carlo, 400, 11};
  double A = 0.0;
  for (int k = 1; k <= relaxed.params().generations(); ++k) A = std::max(A, measure_witness_constant(relaxed, k, build));
  double witness_min = 1.0;
  for (int k = 1; k <= relaxed.params().generations(); ++k) {
    witness_min = std::min(witness_min, growth_witness(relaxed, k, A, {Sampler::Kind::monte_carlo, 400, 99}).lower);
  }
  r.add("witness_A", A);
  r.add("min_witness_measure", witness_min);
  r.require(witness_min >= 0.1, "witness measure below 1/10");
}

inline void multiplier(SuiteResult& r) {
  for (const auto& w : {weights::w0(), weights::power(0.5)}) {
    double lo = 1e300, hi = 0.0;
    for (double tau : log_grid(1.0, 1e6, 100)) {
      const double v = multiplier_symbol(w, tau) * w(1.0 / tau);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    r.add(w.label() + ".c", lo);
    r.add(w.label() + ".C", hi);
    r.require(hi / lo <= 100.0, w.label() + ": band ratio above 100");
  }
}

struct SuiteSpec {
  int id;
  const char* name;
  double budget;
  void (*run)(SuiteResult&);
};

inline const std::vector<SuiteSpec>& all() {
  static const std::vector<SuiteSpec> specs = {
      {1, "quadrature", 1.0, quadrature},       {2, "theta_identity", 30.0, theta_identity},
      {3, "haar_martingale", 30.0, haar_martingale}, {4, "approximant", 120.0, approximant},
      {5, "li_bounds", 120.0, li_bounds},       {6, "lil_ratio", 300.0, lil_ratio},
      {7, "counterexample", 600.0, counterexample}, {8, "multiplier", 60.0, multiplier},
  };
  return specs;
}

}  // namespace suites

/// Runs a suite by id or name. Exceptions count as failures.
inline SuiteResult run_suite(const std::string& key) {
  for (const auto& s : suites::all()) {
    if (key != s.name && key != std::to_string(s.id)) continue;
    SuiteResult r;
    r.id = s.id;
    r.name = s.name;
    r.budget = s.budget;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      s.run(r);
    } catch (const std::exception& e) {
      r.require(false, std::string("exception: ") + e.what());
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.require(r.seconds <= r.budget, "runtime over budget");
    return r;
  }
  throw DomainError("unknown suite '" + key + "'");
}

}  // namespace blil

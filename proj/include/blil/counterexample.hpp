#pragma once

// Stopping-time wavelet series Phi_k on (0, 1]: a unit-sup bump is added on
// every dyadic interval of rank divisible by `a`, except inside intervals where
// the running sum already exceeds the current generation's threshold. Decisions
// are resolved lazily along ancestor chains and memoised per interval, so deep
// ranks (up to 255) cost only the chains that are actually queried.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "blil/csv.hpp"
#include "blil/dyadic.hpp"
#include "blil/error.hpp"
#include "blil/martingale.hpp"
#include "blil/quadrature.hpp"
#include "blil/weights.hpp"

namespace blil {

// ---------------------------------------------------------------------------
// Mother bump: c (t(1-t))^11 (1-2t) on [0, 1]

struct MotherWavelet {
  double c = 0.0;
  double sup_norm = 1.0;
  double deriv_sup = 0.0;
  double haar_pairing = 0.0;  ///< <phi, psi> with psi = -1 on (0, 1/2], +1 on (1/2, 1]
  double l1_norm = 0.0;

  double operator()(double t) const {
    if (!(t > 0.0 && t < 1.0)) return 0.0;
    const double q = t * (1.0 - t);
    const double q2 = q * q, q8 = q2 * q2 * q2 * q2;
    return c * q8 * q2 * q * (1.0 - 2.0 * t);
  }

  double derivative(double t) const {
    if (!(t > 0.0 && t < 1.0)) return 0.0;
    const double q = t * (1.0 - t);
    const double r = 1.0 - 2.0 * t;
    const double q2 = q * q, q8 = q2 * q2 * q2 * q2;
    return c * q8 * q2 * (11.0 * r * r - 2.0 * q);
  }

  /// k-th derivative by the polynomial's monomial coefficients (k <= 23).
  double derivative_n(int k, double t) const {
    std::vector<double> p = coefficients();
    for (int d = 0; d < k; ++d) {
      for (std::size_t i = 1; i < p.size(); ++i) p[i - 1] = p[i] * static_cast<double>(i);
      p.pop_back();
    }
    double s = 0.0;
    for (auto it = p.rbegin(); it != p.rend(); ++it) s = s * t + *it;
    return s;
  }

  /// Monomial coefficients of the polynomial piece, lowest degree first.
  std::vector<double> coefficients() const {
    // (t - t^2)^11 = sum_i C(11, i) (-1)^i t^(11 + i); then times (1 - 2t).
    std::vector<double> q(24, 0.0);
    double binom = 1.0;
    for (int i = 0; i <= 11; ++i) {
      q[11 + i] = (i % 2 ? -binom : binom);
      binom = binom * (11 - i) / (i + 1);
    }
    std::vector<double> p(24, 0.0);
    for (int i = 0; i < 24; ++i) {
      p[i] += q[i];
      if (i + 1 < 24) p[i + 1] -= 2.0 * q[i];
    }
    for (double& v : p) v *= c;
    return p;
  }
};

inline MotherWavelet make_mother_wavelet() {
  MotherWavelet m;
  // |(t(1-t))^11 (1-2t)| peaks where q = t(1-t) = 11/46.
  const double q = 11.0 / 46.0;
  m.c = 1.0 / (std::pow(q, 11) * std::sqrt(1.0 - 4.0 * q));
  // sup |phi'| by a dense scan refined with golden-section search on the best cell.
  const int n = 4096;
  int best = 0;
  double best_val = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double v = std::abs(m.derivative(static_cast<double>(i) / n));
    if (v > best_val) {
      best_val = v;
      best = i;
    }
  }
  double lo = std::max(0.0, (best - 1.0) / n), hi = std::min(1.0, (best + 1.0) / n);
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    if (std::abs(m.derivative(x1)) > std::abs(m.derivative(x2))) {
      hi = x2;
    } else {
      lo = x1;
    }
  }
  m.deriv_sup = std::max(best_val, std::abs(m.derivative(0.5 * (lo + hi))));
  // Degree 23 is integrated exactly by 16-point Gauss-Legendre on each half.
  const double right = gauss_legendre16([&](double t) { return m(t); }, 0.5, 1.0);
  m.haar_pairing = 2.0 * right;
  m.l1_norm = -2.0 * right;  // phi >= 0 on (0, 1/2) and odd about 1/2
  return m;
}

// ---------------------------------------------------------------------------
// Parameters

enum class SupRule { center, grid };

struct Overrides {
  std::optional<int> a;              ///< replaces the smallest admissible a
  bool relax_bracket_upper = false;  ///< allow w(2^-beta_j) > j
  bool relax_j0 = false;             ///< allow witness checks below j0
  bool disable_stopping = false;     ///< negative control: never stop
  int max_depth = DyadicInterval::kMaxRank;

  bool any() const { return a || relax_bracket_upper || relax_j0 || disable_stopping; }
};

struct ConstructionParams {
  int a = 0;
  int j0 = 0;
  std::vector<int> beta;  ///< beta[0] = 0 is the first generation's start rank
  Weight weight = weights::w0();
  SupRule sup_rule = SupRule::center;
  int grid_points = 0;  ///< for SupRule::grid
  Overrides overrides;
  std::vector<std::string> notes;  ///< every relaxation that was used

  int depth() const { return beta.back(); }
  int generations() const { return static_cast<int>(beta.size()); }
  /// beta_j for the 1-based generation j.
  int beta_of(int j) const { return beta.at(static_cast<std::size_t>(j - 1)); }
};

inline int smallest_admissible_a(const MotherWavelet& phi) {
  int a = 1;
  while (std::ldexp(phi.deriv_sup, -a + 1) > 0.25 * std::abs(phi.haar_pairing)) ++a;
  return a;
}

inline int default_j0(const MotherWavelet& phi) { return static_cast<int>(std::ceil(4.0 * phi.deriv_sup + 4.0)); }

/// Checks the invariants of a parameter set and records relaxations in `notes`.
inline void validate_params(const MotherWavelet& phi, ConstructionParams& p) {
  auto fail = [](const std::string& what) { throw ConstructionError(what); };
  if (p.a < 1) fail("a must be a positive integer");
  if (p.beta.empty() || p.beta[0] != 0) fail("beta must start at 0");
  if (p.overrides.max_depth > DyadicInterval::kMaxRank) fail("max_depth exceeds the dyadic rank limit");
  if (p.sup_rule == SupRule::grid && p.grid_points < 1) fail("grid sup rule needs a positive point count");
  const bool a_ok = std::ldexp(phi.deriv_sup, -p.a + 1) <= 0.25 * std::abs(phi.haar_pairing);
  if (!a_ok && !p.overrides.a) fail("a violates 2^(1-a) |phi'| <= |<phi,psi>| / 4");
  if (!a_ok) p.notes.push_back("a=" + std::to_string(p.a) + " below the admissible bound");
  for (std::size_t i = 0; i < p.beta.size(); ++i) {
    const int b = p.beta[i];
    const int j = static_cast<int>(i) + 1;
    if (b % p.a != 0) fail("beta_" + std::to_string(j) + " is not divisible by a");
    if (i && b <= p.beta[i - 1]) fail("beta must increase strictly");
    if (b > p.overrides.max_depth) fail("beta_" + std::to_string(j) + " exceeds max_depth");
    const double w = p.weight(std::ldexp(1.0, -b));
    if (w < j - 1) fail("weight bracket j-1 <= w(2^-beta_j) fails at j=" + std::to_string(j));
    if (w > j) {
      if (!p.overrides.relax_bracket_upper) fail("weight bracket w(2^-beta_j) <= j fails at j=" + std::to_string(j));
      p.notes.push_back("bracket upper bound relaxed at j=" + std::to_string(j));
    }
    if (i && j >= p.j0) {
      const double lac = ((b - p.beta[i - 1]) / p.a - 1.0) * phi.haar_pairing * phi.haar_pairing;
      if (lac < 4.0 * j * j) fail("lacunarity condition fails at j=" + std::to_string(j));
    }
  }
  if (p.overrides.relax_j0) p.notes.push_back("checks allowed below j0=" + std::to_string(p.j0));
  if (p.overrides.disable_stopping) p.notes.push_back("stopping disabled");
}

/// Explicit parameters, validated.
inline ConstructionParams make_params(const MotherWavelet& phi, int a, std::vector<int> beta, Weight w,
                                      Overrides ov = {}, SupRule rule = SupRule::center, int grid_points = 0) {
  ConstructionParams p;
  p.a = a;
  p.j0 = default_j0(phi);
  p.beta = std::move(beta);
  p.weight = std::move(w);
  p.sup_rule = rule;
  p.grid_points = grid_points;
  p.overrides = ov;
  validate_params(phi, p);
  return p;
}

/// Smallest a, j0 from the wavelet constants, and beta_j the smallest multiple
/// of a after beta_(j-1) meeting the bracket and lacunarity conditions.
inline ConstructionParams choose_params(const MotherWavelet& phi, const Weight& w, int j_max, Overrides ov = {}) {
  if (j_max < 2) throw DomainError("j_max must be >= 2");
  ConstructionParams p;
  p.a = ov.a ? *ov.a : smallest_admissible_a(phi);
  p.j0 = default_j0(phi);
  p.weight = w;
  p.overrides = ov;
  p.beta = {0};
  for (int j = 2; j <= j_max; ++j) {
    int b = p.beta.back() + p.a;
    for (;; b += p.a) {
      if (b > ov.max_depth) {
        throw ConstructionError("beta_" + std::to_string(j) + " would exceed max_depth=" +
                                std::to_string(ov.max_depth));
      }
      const bool lac_ok = j < p.j0 || ((b - p.beta.back()) / p.a - 1.0) * phi.haar_pairing * phi.haar_pairing >=
                                          4.0 * j * j;
      if (w(std::ldexp(1.0, -b)) >= j - 1 && lac_ok) break;
    }
    if (w(std::ldexp(1.0, -b)) > j && !ov.relax_bracket_upper) {
      throw ConstructionError("weight bracket w(2^-beta_j) <= j unsatisfiable at j=" + std::to_string(j) +
                              " (first admissible multiple of a gives w=" + fmt17(w(std::ldexp(1.0, -b))) + ")");
    }
    p.beta.push_back(b);
  }
  validate_params(phi, p);
  return p;
}

// ---------------------------------------------------------------------------
// Lazy construction

struct Decision {
  int c = 0;             ///< coefficient of phi_I, 0 or 1
  bool stopped = false;  ///< the threshold check triggered at this interval
  bool blocked = false;  ///< this interval lies in a stopped interval of its check generation
  int generation = 0;    ///< generation of the check made at this rank
  bool operator==(const Decision&) const = default;
};

/// A point of (0, 1] given as an anchor interval and a local coordinate s in (0, 1],
/// so that points below double resolution can be addressed.
struct Locus {
  DyadicInterval anchor;
  double s = 0.5;

  static Locus at(double t) {
    if (!(t > 0.0 && t <= 1.0)) throw DomainError("point outside (0, 1]");
    return {DyadicInterval(), t};
  }
};

/// Intervals and local coordinates along the chain of a locus, ranks 0..k.
struct Chain {
  std::vector<DyadicInterval> J;
  std::vector<double> s;
  std::vector<Decision> d;
};

class StoppingConstruction {
 public:
  StoppingConstruction(MotherWavelet phi, ConstructionParams params)
      : phi_(std::move(phi)), params_(std::move(params)) {}

  StoppingConstruction(const StoppingConstruction& o)
      : phi_(o.phi_), params_(o.params_), memo_(o.memo_), frozen_(o.frozen_) {}

  const MotherWavelet& phi() const { return phi_; }
  const ConstructionParams& params() const { return params_; }
  int depth() const { return params_.depth(); }
  bool frozen() const { return frozen_; }
  void freeze() { frozen_ = true; }
  const std::unordered_map<DyadicInterval, Decision, DyadicHash>& memo() const { return memo_; }

  /// Seeds the memo with decisions from a snapshot. Rows must lie within the depth.
  void restore(const std::vector<std::pair<DyadicInterval, Decision>>& rows) {
    if (frozen_) throw ContractViolation("restore on a frozen construction");
    for (const auto& [I, d] : rows) {
      if (I.rank() > depth()) throw DomainError("snapshot row " + I.key() + " beyond the configured depth");
      memo_.insert_or_assign(I, d);
    }
  }

  bool active(int m) const { return m % params_.a == 0; }
  bool significant(int m) const { return active(m) || params_.beta_of(check_generation(m)) == m; }

  /// 1-based generation whose threshold applies to checks at rank m.
  int check_generation(int m) const {
    const auto& b = params_.beta;
    return static_cast<int>(std::upper_bound(b.begin(), b.end(), m) - b.begin());
  }

  /// Chain of a locus down to rank k with all decisions resolved.
  Chain chain(const Locus& x, int k) const {
    if (k < 0 || k > depth()) throw DomainError("rank beyond the configured depth");
    Chain ch;
    const int R = x.anchor.rank();
    const int top = std::max(R, k);
    ch.J.resize(top + 1);
    ch.s.resize(top + 1);
    ch.J[R] = x.anchor;
    ch.s[R] = x.s;
    for (int m = R - 1; m >= 0; --m) {
      ch.J[m] = x.anchor.ancestor(m);
      ch.s[m] = 0.5 * (ch.J[m + 1].side() + ch.s[m + 1]);
    }
    for (int m = R + 1; m <= top; ++m) {
      const int b = ch.s[m - 1] > 0.5 ? 1 : 0;
      ch.J[m] = ch.J[m - 1].child(b);
      ch.s[m] = 2.0 * ch.s[m - 1] - b;
    }
    ch.J.resize(k + 1);
    ch.s.resize(k + 1);
    resolve(ch);
    return ch;
  }

  /// Chain of an interval (its centre as the locus).
  Chain chain(const DyadicInterval& I) const {
    if (I.rank() > depth()) throw DomainError("rank beyond the configured depth");
    return chain(Locus{I, 0.5}, I.rank());
  }

  Decision decision(const DyadicInterval& I) const {
    if (auto it = memo_.find(I); it != memo_.end()) return it->second;
    return chain(I).d.back();
  }

  /// Phi_k at the chain's point: sum of c_J phi(s_J) over ranks <= k.
  double value(const Chain& ch, int k) const {
    double v = 0.0;
    for (int m = 0; m <= k; ++m) {
      if (ch.d[m].c) v += phi_(ch.s[m]);
    }
    return v;
  }

  double phi_eval(int k, const Locus& x) const { return value(chain(x, k), k); }
  double phi_eval(int k, double t) const { return phi_eval(k, Locus::at(t)); }

  /// Phi_m at local coordinate s of J_m, using the decisions of J_0..J_m.
  double value_in(const Chain& ch, int m, double s) const {
    double v = 0.0;
    for (int i = m; i >= 0; --i) {
      if (ch.d[i].c) v += phi_(s);
      if (i) s = 0.5 * (ch.J[i].side() + s);
    }
    return v;
  }

 private:
  void resolve(Chain& ch) const {
    struct Guard {
      std::atomic<bool>& f;
      bool owner;
      explicit Guard(std::atomic<bool>& flag, bool writer) : f(flag), owner(writer) {
        if (owner && f.exchange(true)) throw ContractViolation("concurrent mutation of an unfrozen construction");
      }
      ~Guard() {
        if (owner) f.store(false);
      }
    } guard(writing_, !frozen_);
    const int k = static_cast<int>(ch.J.size()) - 1;
    ch.d.resize(k + 1);
    for (int m = 0; m <= k; ++m) {
      // Ranks that are neither active nor a generation start only inherit; they are not stored.
      if (!significant(m)) {
        ch.d[m] = decide(ch, m);
        continue;
      }
      if (auto it = memo_.find(ch.J[m]); it != memo_.end()) {
        ch.d[m] = it->second;
        continue;
      }
      ch.d[m] = decide(ch, m);
      if (!frozen_) memo_.emplace(ch.J[m], ch.d[m]);
    }
  }

  Decision decide(Chain& ch, int m) const {
    Decision d;
    const bool parent_blocked = m > 0 && ch.d[m - 1].blocked;
    if (m == 0) {
      d.c = 1;
    } else if (active(m)) {
      d.c = parent_blocked ? 0 : 1;
    }
    const int j = check_generation(m);
    d.generation = j;
    if (params_.overrides.disable_stopping) return d;
    const bool fresh = params_.beta_of(j) == m;
    if (!fresh && parent_blocked) {
      d.blocked = true;
      return d;
    }
    if (fresh || active(m)) {
      ch.d[m] = d;  // Phi_m on J_m includes this interval's own coefficient
      d.stopped = sup_on(ch, m) > j;
      d.blocked = d.stopped;
    }
    return d;
  }

  double sup_on(const Chain& ch, int m) const {
    if (params_.sup_rule == SupRule::center) return std::abs(value_in(ch, m, 0.5));
    double best = 0.0;
    const int n = params_.grid_points;
    for (int i = 0; i < n; ++i) best = std::max(best, std::abs(value_in(ch, m, (i + 0.5) / n)));
    return best;
  }

  MotherWavelet phi_;
  ConstructionParams params_;
  mutable std::unordered_map<DyadicInterval, Decision, DyadicHash> memo_;
  mutable std::atomic<bool> writing_{false};
  bool frozen_ = false;
};

// ---------------------------------------------------------------------------
// Samplers

struct Sampler {
  enum class Kind { grid, monte_carlo };
  Kind kind = Kind::grid;
  std::size_t n = 1024;
  std::uint64_t seed = 1;
  int rank = -1;  ///< anchor rank for Monte Carlo loci; -1 means the construction depth
};

/// Grid: midpoints (i + 1/2)/n as doubles. Monte Carlo: a uniform random interval
/// at the anchor rank and a uniform local coordinate, so deep ranks are resolved.
inline std::vector<Locus> sample_loci(const Sampler& sp, int depth) {
  if (sp.n == 0) throw DomainError("sampler needs at least one point");
  std::vector<Locus> out;
  out.reserve(sp.n);
  if (sp.kind == Sampler::Kind::grid) {
    for (std::size_t i = 0; i < sp.n; ++i) out.push_back(Locus::at((i + 0.5) / static_cast<double>(sp.n)));
    return out;
  }
  std::mt19937_64 rng(sp.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int rank = sp.rank < 0 ? depth : sp.rank;
  for (std::size_t i = 0; i < sp.n; ++i) {
    std::array<std::uint64_t, 4> words{rng(), rng(), rng(), rng()};
    out.push_back({DyadicInterval::from_words(rank, words), 1.0 - u(rng)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Step and growth bounds

/// max over the loci of |Phi_k - Phi_(k-1)|.
inline double bloch_step_norm(const StoppingConstruction& sc, int k, std::span<const Locus> loci) {
  if (k < 1) throw DomainError("step norm needs k >= 1");
  double best = 0.0;
  for (const auto& x : loci) {
    const Chain ch = sc.chain(x, k);
    if (ch.d[k].c) best = std::max(best, std::abs(sc.phi()(ch.s[k])));
  }
  return best;
}

/// max over the loci of |Phi_k|.
inline double growth_envelope(const StoppingConstruction& sc, int k, std::span<const Locus> loci) {
  double best = 0.0;
  for (const auto& x : loci) best = std::max(best, std::abs(sc.phi_eval(k, x)));
  return best;
}

/// w(2^-k) + 2 + 2|phi'|: the growth restriction shifted by the centre-rule oscillation.
inline double growth_bound(const StoppingConstruction& sc, int k) {
  return sc.params().weight(std::ldexp(1.0, -k)) + 2.0 + 2.0 * sc.phi().deriv_sup;
}

/// j + 1 + 2|phi'| for ranks inside generation j.
inline double generation_bound(const StoppingConstruction& sc, int j) {
  return j + 1.0 + 2.0 * sc.phi().deriv_sup;
}

// ---------------------------------------------------------------------------
// Haar analysis of Phi_n

/// b_I = 2^rank(I) <Phi_n, psi_I> for I = ch.J[m]. Only I and its ancestors with
/// c = 1 contribute; ancestors more than 60 ranks up add below 2^-60 |phi'| and are skipped.
inline double haar_coefficient(const StoppingConstruction& sc, int n, const Chain& ch, int m) {
  const auto& phi = sc.phi();
  double b = 0.0;
  double o = 0.0;  // left end of J_m in the local coordinate of J_i
  for (int i = m; i >= 0; --i) {
    if (i <= n && ch.d[i].c) {
      const int gap = m - i;
      if (gap == 0) {
        b += phi.haar_pairing;
      } else if (gap <= 60) {
        const double eps = std::ldexp(1.0, -gap);
        auto f = [&](double s) { return phi(o + eps * s); };
        b += gauss_legendre16(f, 0.5, 1.0) - gauss_legendre16(f, 0.0, 0.5);
      }
    }
    if (i) o = 0.5 * (ch.J[i].side() + o);
  }
  return b;
}

inline double haar_coefficient(const StoppingConstruction& sc, int n, const DyadicInterval& I) {
  const Chain ch = sc.chain(I);
  return haar_coefficient(sc, n, ch, I.rank());
}

/// Distinct intervals with c = 1 and rank in [beta_j, beta_(j+1)) along the loci's chains.
inline std::vector<DyadicInterval> active_intervals(const StoppingConstruction& sc, int j,
                                                    std::span<const Locus> loci) {
  const auto& p = sc.params();
  if (j < 1 || j >= p.generations()) throw DomainError("generation out of range");
  std::vector<DyadicInterval> out;
  for (const auto& x : loci) {
    const Chain ch = sc.chain(x, p.beta_of(j + 1) - 1);
    for (int m = p.beta_of(j); m < p.beta_of(j + 1); ++m) {
      if (ch.d[m].c) out.push_back(ch.J[m]);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

struct CoefficientBound {
  double min_abs = std::numeric_limits<double>::infinity();
  std::size_t count = 0;
};

/// min |b_I| over intervals with c_I = 1, for Phi_(beta_(j+1)).
inline CoefficientBound haar_coefficient_bound(const StoppingConstruction& sc, int j,
                                               std::span<const DyadicInterval> intervals) {
  const auto& p = sc.params();
  if (j < 1 || j >= p.generations()) throw DomainError("generation out of range");
  CoefficientBound out;
  for (const auto& I : intervals) {
    const Chain ch = sc.chain(I);
    if (!ch.d.back().c) throw DomainError("coefficient bound sampled an interval with c = 0");
    out.min_abs = std::min(out.min_abs, std::abs(haar_coefficient(sc, p.beta_of(j + 1), ch, I.rank())));
    ++out.count;
  }
  return out;
}

/// Lower-bound threshold for the quadratic function on surviving intervals:
/// 4 j^2 scaled by the lacunarity factor (n - 1) <phi,psi>^2 / (16 j^2) when that is below 1,
/// n being the number of active ranks in the generation.
inline double lacunarity_factor(const StoppingConstruction& sc, int j) {
  const auto& p = sc.params();
  const double n = double(p.beta_of(j + 1) - p.beta_of(j)) / p.a;
  const double pr = sc.phi().haar_pairing;
  return (n - 1.0) * pr * pr / (16.0 * j * j);
}

inline double quadratic_threshold(const StoppingConstruction& sc, int j) {
  return 4.0 * j * j * std::min(1.0, lacunarity_factor(sc, j));
}

/// True when the locus survives generation j (no stop in ranks beta_j .. beta_(j+1) - 1).
inline bool survives(const StoppingConstruction& sc, int j, const Chain& ch) {
  return !ch.d[sc.params().beta_of(j + 1) - 1].blocked;
}

/// Sum of b_J^2 over the chain's intervals with c_J = 1 and rank in [beta_j, beta_(j+1)).
inline double generation_square_sum(const StoppingConstruction& sc, int j, const Chain& ch) {
  const auto& p = sc.params();
  const int n = p.beta_of(j + 1);
  double s = 0.0;
  for (int m = p.beta_of(j); m < n; ++m) {
    if (ch.d[m].c) {
      const double b = haar_coefficient(sc, n, ch, m);
      s += b * b;
    }
  }
  return s;
}

struct QuadraticBound {
  double min_sum = std::numeric_limits<double>::infinity();
  std::size_t surviving = 0;
  std::size_t sampled = 0;
  double threshold = 0.0;
  double lacunarity = 0.0;
};

inline QuadraticBound quadratic_lower_bound(const StoppingConstruction& sc, int j, std::span<const Locus> loci) {
  const auto& p = sc.params();
  if (j < 1 || j >= p.generations()) throw DomainError("generation out of range");
  QuadraticBound out;
  out.threshold = quadratic_threshold(sc, j);
  out.lacunarity = lacunarity_factor(sc, j);
  for (const auto& x : loci) {
    const Chain ch = sc.chain(x, p.beta_of(j + 1));
    ++out.sampled;
    if (!survives(sc, j, ch)) continue;
    ++out.surviving;
    out.min_sum = std::min(out.min_sum, generation_square_sum(sc, j, ch));
  }
  return out;
}

struct ParsevalCheck {
  double quadratic_side = 0.0;  ///< integral of <Lambda>^2 at the finest rank
  double square_side = 0.0;     ///< integral of Lambda^2 at the finest rank
  double residual = 0.0;
};

inline ParsevalCheck parseval_residual(const HaarExpansion& e) {
  CompensatedSum q, sq;
  q.add(e.mean * e.mean);
  for (int r = 0; r <= e.max_rank; ++r) {
    for (double b : e.coeffs[r]) q.add(b * b * std::ldexp(1.0, -r));
  }
  const auto pieces = haar_synthesize_pieces(e, e.max_rank);
  for (double v : pieces) sq.add(v * v);
  ParsevalCheck out;
  out.quadratic_side = q.value();
  out.square_side = sq.value() / static_cast<double>(pieces.size());
  out.residual = std::abs(out.quadratic_side - out.square_side);
  return out;
}

/// Both sides from the Haar expansion of Phi_(beta_(j+1)) up to max_rank (<= 20). Cell
/// integrals near the support ends are limited by rounding of t amplified by the
/// eleventh-order zero, about 1e-10 relative, hence the default tolerance.
inline ParsevalCheck parseval_identity_check(const StoppingConstruction& sc, int j, int max_rank, double tol = 1e-9) {
  const auto& p = sc.params();
  if (j < 1 || j >= p.generations()) throw DomainError("generation out of range");
  if (max_rank > 20) throw DomainError("dense Haar analysis limited to rank 20");
  const int n = p.beta_of(j + 1);
  const auto e = haar_analyze([&](double t) { return sc.phi_eval(n, t); }, max_rank, tol);
  return parseval_residual(e);
}

// ---------------------------------------------------------------------------
// Level sets

struct MeasureEstimate {
  double measure = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
};

inline void require_precision(std::size_t n, double precision) {
  if (std::sqrt(0.25 / static_cast<double>(n)) > precision) {
    throw PrecisionError("need at least " + std::to_string(static_cast<std::size_t>(std::ceil(0.25 / (precision * precision)))) +
                         " samples for standard error " + fmt17(precision));
  }
}

/// Fraction of sample points with |Phi_k| >= threshold, k = beta[j] (0-based j) unless
/// a rank is given; the proof's reduction evaluates at the next generation start instead.
inline MeasureEstimate level_set_measure(const StoppingConstruction& sc, int j, double threshold, const Sampler& sp,
                                         double precision = 0.05, int rank = -1) {
  const auto& p = sc.params();
  if (j < 0 || j >= p.generations()) throw DomainError("generation out of range");
  if (!(threshold >= 0.0)) throw DomainError("threshold must be non-negative");
  require_precision(sp.n, precision);
  if (rank > sc.depth()) throw DomainError("rank beyond the configured depth");
  const int k = rank < 0 ? p.beta[j] : rank;
  const auto loci = sample_loci(sp, sc.depth());
  std::size_t hits = 0;
  for (const auto& x : loci) {
    if (std::abs(sc.phi_eval(k, x)) >= threshold) ++hits;
  }
  MeasureEstimate out;
  out.n = loci.size();
  out.measure = static_cast<double>(hits) / out.n;
  out.stderr_ = std::sqrt(out.measure * (1.0 - out.measure) / out.n);
  return out;
}

/// w(2^-beta[j]) / 4: the level whose set must keep measure >= 1/10.
inline double level_threshold(const StoppingConstruction& sc, int j) {
  return 0.25 * sc.params().weight(std::ldexp(1.0, -sc.params().beta.at(j)));
}

// ---------------------------------------------------------------------------
// Poisson smoothing v_k = Phi_k * P_y

struct SmoothValue {
  double v = 0.0;
  double y_dx = 0.0;  ///< y dv/dx
  double y_dy = 0.0;  ///< y dv/dy
  double err = 0.0;   ///< bound on the omitted parts (value only)
};

namespace detail {

struct KernelIntegrals {
  double v = 0.0, dx = 0.0, dy = 0.0, err = 0.0;
};

/// (1/pi) int_0^1 phi(s) h / (1 + h^2 z^2) ds with z = z0 - s, and the matching
/// y-scaled x and y derivative kernels. One rank-m bump seen from x, with h = 2^-m / y.
inline KernelIntegrals bump_poisson(const MotherWavelet& phi, double h, double z0, bool grad) {
  KernelIntegrals out;
  auto k0 = [&](double s) {
    const double z = z0 - s;
    return phi(s) * h / (1.0 + h * h * z * z) / std::numbers::pi;
  };
  auto kx = [&](double s) {
    const double z = z0 - s;
    const double q = 1.0 + h * h * z * z;
    return -phi(s) * 2.0 * h * h * z / (q * q) / std::numbers::pi;
  };
  auto ky = [&](double s) {
    const double z = z0 - s;
    const double q = 1.0 + h * h * z * z;
    return phi(s) * h * (h * h * z * z - 1.0) / (q * q) / std::numbers::pi;
  };
  if (h >= 1e12) {
    // The kernel is narrower than the bump by 12 orders: point evaluation, with
    // |phi(s) - phi(u)| <= |phi'| |s - z0| integrated against the kernel as error.
    const double uc = std::clamp(z0, 0.0, 1.0);
    const double mass = (std::atan(h * z0) + std::atan(h * (1.0 - z0))) / std::numbers::pi;
    out.v = phi(uc) * mass;
    out.dx = grad ? phi.derivative(uc) / h : 0.0;
    out.err = phi.deriv_sup * std::log1p(h * h) / (std::numbers::pi * h);
    return out;
  }
  // Pieces of width <= 1/8 and, around z0, geometric pieces z0 +- 2^i / h: the
  // kernel's poles at z = +-i/h then sit well outside every piece's Bernstein ellipse.
  // Bumps at distance >= 1 see poles far outside [0, 1]; one piece suffices.
  std::vector<double> cuts{0.0, 1.0};
  const bool far = z0 <= -1.0 || z0 >= 2.0;
  for (int i = 1; i < 8 && !far; ++i) cuts.push_back(i / 8.0);
  if (h > 2.0 && !far) {
    for (double r = 1.0 / h; r < 1.0; r *= 2.0) {
      cuts.push_back(z0 - r);
      cuts.push_back(z0 + r);
    }
  }
  std::erase_if(cuts, [](double c) { return c < 0.0 || c > 1.0; });
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    out.v += gauss_legendre16(k0, cuts[i], cuts[i + 1]);
    if (grad) {
      out.dx += gauss_legendre16(kx, cuts[i], cuts[i + 1]);
      out.dy += gauss_legendre16(ky, cuts[i], cuts[i + 1]);
    }
  }
  return out;
}

}  // namespace detail

namespace detail {

/// v_k at the point `x` shifted by `offset` (absolute units). Rank-m bumps are
/// summed over a window around the point chosen so the remaining ones, whose mean
/// is zero and whose kernel falls off like (2/pi) / (h d^3), are below the rank's
/// share of tol; ranks whose whole layer is below (2/pi)|phi|_1 2^-m / y are
/// dropped. `err` bounds everything omitted.
inline SmoothValue poisson_smooth_at(const StoppingConstruction& sc, int k, const Locus& x, double offset, double y,
                                     double tol, bool grad) {
  if (!(y > 0.0)) throw DomainError("poisson_smooth needs y > 0");
  if (k < 0 || k > sc.depth()) throw DomainError("rank beyond the configured depth");
  const auto& phi = sc.phi();
  const int a = sc.params().a;
  const double C1 = 2.0 / std::numbers::pi * phi.l1_norm;
  const double inv_y = 1.0 / y;
  std::vector<int> ranks;
  for (int m = 0; m <= k; m += a) ranks.push_back(m);
  std::size_t included = 0;
  SmoothValue out;
  for (int m : ranks) {
    const double h = std::ldexp(inv_y, -m);
    if (C1 * h / (1.0 - std::ldexp(1.0, -a)) > 0.5 * tol) {
      ++included;
    } else {
      out.err += C1 * h;
    }
  }
  const double eps = 0.5 * tol / static_cast<double>(std::max<std::size_t>(included, 1));
  const Chain ch = sc.chain(x, ranks[included ? included - 1 : 0]);
  for (std::size_t r = 0; r < included; ++r) {
    const int m = ranks[r];
    const double h = std::ldexp(inv_y, -m);
    const double span = std::ceil(std::sqrt(2.0 * phi.l1_norm / (std::numbers::pi * h * eps)));
    if (span > 5e5) throw PrecisionError("smoothing window too wide at rank " + std::to_string(m));
    out.err += 2.0 * phi.l1_norm / (std::numbers::pi * h * span * span);
    const double u = ch.s[m] + std::ldexp(offset, m);
    if (!(std::abs(u) < 0x1p62)) continue;  // the whole row is beyond the window
    const auto centre = static_cast<std::int64_t>(std::floor(u));
    const auto reach = static_cast<std::int64_t>(span) + 1;
    for (std::int64_t dl = centre - reach; dl <= centre + reach; ++dl) {
      int c = 0;
      if (dl == 0) {
        c = ch.d[m].c;
      } else if (auto J = ch.J[m].shifted(dl)) {
        c = sc.decision(*J).c;
      }
      if (!c) continue;
      const auto ki = bump_poisson(phi, h, u - static_cast<double>(dl), grad);
      out.v += ki.v;
      out.y_dx += ki.dx;
      out.y_dy += ki.dy;
      out.err += ki.err;
    }
  }
  return out;
}

}  // namespace detail

/// v_k(x, y) = (Phi_k * P_y)(x) with y-scaled gradient and an error bound.
inline SmoothValue poisson_smooth(const StoppingConstruction& sc, int k, const Locus& x, double y, double tol = 1e-4,
                                  bool grad = false) {
  return detail::poisson_smooth_at(sc, k, x, 0.0, y, tol, grad);
}

/// Any real x; points outside (0, 1] are reached from t = 1.
inline SmoothValue poisson_smooth(const StoppingConstruction& sc, int k, double x, double y, double tol = 1e-4,
                                  bool grad = false) {
  if (x > 0.0 && x <= 1.0) return poisson_smooth(sc, k, Locus::at(x), y, tol, grad);
  if (!std::isfinite(x)) throw DomainError("poisson_smooth needs a finite x");
  return detail::poisson_smooth_at(sc, k, Locus::at(1.0), x - 1.0, y, tol, grad);
}

struct BlochGrowthCheck {
  double sup_y_grad = 0.0;  ///< sup y |grad v|
  double sup_growth = 0.0;  ///< sup |v| / w(y)
  double growth_bound = 0.0;
};

/// |v| / w(y) <= D + 2 + 2|phi'| + (2/pi)|phi|_1 follows from the envelope bound,
/// the doubling constant D and the tail estimate of the smoothing.
inline double smoothed_growth_bound(const StoppingConstruction& sc) {
  const auto& phi = sc.phi();
  return sc.params().weight.doubling_constant() + 2.0 + 2.0 * phi.deriv_sup + 2.0 / std::numbers::pi * phi.l1_norm;
}

inline BlochGrowthCheck bloch_and_growth_check_v(const StoppingConstruction& sc, std::span<const Locus> xs,
                                                 std::span<const double> ys, double tol = 1e-3) {
  BlochGrowthCheck out;
  out.growth_bound = smoothed_growth_bound(sc);
  for (double y : ys) {
    if (!(y > 0.0 && y <= 1.0)) throw DomainError("grid heights must lie in (0, 1]");
    for (const auto& x : xs) {
      const auto v = poisson_smooth(sc, sc.depth(), x, y, tol, true);
      out.sup_y_grad = std::max(out.sup_y_grad, std::hypot(v.y_dx, v.y_dy));
      out.sup_growth = std::max(out.sup_growth, std::abs(v.v) / sc.params().weight(y));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Level sets of v at the heights y_k

/// y_k = 2^(-beta_k - 2) / (10 |phi'|) for the 1-based generation k.
inline double witness_height(const StoppingConstruction& sc, int k) {
  return std::ldexp(1.0, -sc.params().beta_of(k) - 2) / (10.0 * sc.phi().deriv_sup);
}

struct WitnessResult {
  double measure = 0.0;  ///< fraction with |v| >= w(y_k)/A
  double lower = 0.0;    ///< fraction with |v| - err >= w(y_k)/A
  double stderr_ = 0.0;
  double y = 0.0;
  double threshold = 0.0;
  double A = 0.0;
  double max_err = 0.0;
  std::size_t n = 0;
};

inline std::vector<SmoothValue> witness_values(const StoppingConstruction& sc, int k, const Sampler& sp, double tol) {
  const auto& p = sc.params();
  if (k < 1 || k > p.generations()) throw DomainError("generation out of range");
  if (k < p.j0 && !p.overrides.relax_j0) throw DomainError("witness below j0 needs the relax_j0 override");
  const double y = witness_height(sc, k);
  std::vector<SmoothValue> out;
  for (const auto& x : sample_loci(sp, sc.depth())) out.push_back(poisson_smooth(sc, sc.depth(), x, y, tol));
  return out;
}

/// A = w(y_k) / q, q the `quantile` of |v(., y_k)| over the sample.
inline double measure_witness_constant(const StoppingConstruction& sc, int k, const Sampler& sp, double quantile = 0.75,
                                       double tol = 1e-3) {
  const auto vals = witness_values(sc, k, sp, tol);
  std::vector<double> mags;
  for (const auto& v : vals) mags.push_back(std::abs(v.v));
  std::sort(mags.begin(), mags.end());
  const auto idx = static_cast<std::size_t>(quantile * static_cast<double>(mags.size() - 1));
  if (!(mags[idx] > 0.0)) throw ConstructionError("v vanishes on the sample; no finite witness constant");
  return sc.params().weight(witness_height(sc, k)) / mags[idx];
}

inline WitnessResult growth_witness(const StoppingConstruction& sc, int k, double A, const Sampler& sp,
                                         double tol = 1e-3, double precision = 0.05) {
  if (!(A > 0.0)) throw DomainError("witness constant must be positive");
  require_precision(sp.n, precision);
  WitnessResult out;
  out.y = witness_height(sc, k);
  out.A = A;
  out.threshold = sc.params().weight(out.y) / A;
  const auto vals = witness_values(sc, k, sp, tol);
  std::size_t hit = 0, sure = 0;
  for (const auto& v : vals) {
    if (std::abs(v.v) >= out.threshold) ++hit;
    if (std::abs(v.v) - v.err >= out.threshold) ++sure;
    out.max_err = std::max(out.max_err, v.err);
  }
  out.n = vals.size();
  out.measure = static_cast<double>(hit) / out.n;
  out.lower = static_cast<double>(sure) / out.n;
  out.stderr_ = std::sqrt(out.lower * (1.0 - out.lower) / out.n);
  return out;
}

// ---------------------------------------------------------------------------
// Snapshot

/// Memo rows sorted by (rank, index): rank,index,c,stopped,generation,blocked.
inline void write_snapshot_csv(std::ostream& out, const StoppingConstruction& sc) {
  std::vector<std::pair<DyadicInterval, Decision>> rows(sc.memo().begin(), sc.memo().end());
  std::sort(rows.begin(), rows.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  out << "rank,index,c,stopped,generation,blocked\n";
  for (const auto& [I, d] : rows) {
    const std::string key = I.key();
    out << I.rank() << ',' << key.substr(key.find(':') + 1) << ',' << d.c << ',' << int(d.stopped) << ','
        << d.generation << ',' << int(d.blocked) << '\n';
  }
}

inline std::vector<std::pair<DyadicInterval, Decision>> read_snapshot_csv(std::istream& in) {
  const auto t = read_csv(in);
  if (t.header != std::vector<std::string>{"rank", "index", "c", "stopped", "generation", "blocked"}) {
    throw ParseError("snapshot header mismatch", t.header.empty() ? std::string() : t.header[0]);
  }
  auto flag = [](const std::string& v) {
    if (v != "0" && v != "1") throw ParseError("snapshot flag must be 0 or 1", v);
    return v == "1";
  };
  std::vector<std::pair<DyadicInterval, Decision>> rows;
  for (const auto& r : t.rows) {
    if (r.size() != 6) throw ParseError("snapshot row needs 6 cells", r.empty() ? std::string() : r[0]);
    Decision d;
    d.c = flag(r[2]) ? 1 : 0;
    d.stopped = flag(r[3]);
    try {
      d.generation = std::stoi(r[4]);
    } catch (const std::logic_error&) {
      throw ParseError("snapshot generation is not an integer", r[4]);
    }
    d.blocked = flag(r[5]);
    rows.emplace_back(DyadicInterval::from_key(r[0] + ":" + r[1]), d);
  }
  return rows;
}

}  // namespace blil

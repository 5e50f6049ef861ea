#pragma once

// Haar analysis on (0, 1] in the L-infinity normalisation psi_I = +-1, tables of
// piecewise-constant levels on a (thinned) dyadic filtration, quadratic
// functions, and sampling of a field into such a table.

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "blil/csv.hpp"
#include "blil/dyadic.hpp"
#include "blil/error.hpp"
#include "blil/harmonic.hpp"
#include "blil/quadrature.hpp"
#include "blil/weights.hpp"

namespace blil {

/// psi_I(t): -1 on the left half of I, +1 on the right half, 0 off I.
inline double haar_psi(const DyadicInterval& I, double t) {
  if (!I.contains(t)) return 0.0;
  return DyadicInterval::containing(t, I.rank() + 1).side() ? 1.0 : -1.0;
}

/// Mean plus coefficients b_I for every interval of rank <= max_rank, stored
/// densely by rank. max_rank = -1 means the mean alone.
struct HaarExpansion {
  double mean = 0.0;
  int max_rank = -1;
  std::vector<std::vector<double>> coeffs;

  explicit HaarExpansion(int max_rank_ = -1, double mean_ = 0.0) : mean(mean_), max_rank(max_rank_) {
    if (max_rank_ > 30) throw DomainError("dense Haar expansions are limited to rank 30");
    for (int r = 0; r <= max_rank_; ++r) coeffs.emplace_back(std::size_t{1} << r, 0.0);
  }

  double& at(int rank, std::uint64_t index) { return coeffs.at(rank).at(index); }
  double at(int rank, std::uint64_t index) const { return coeffs.at(rank).at(index); }
  double coeff(const DyadicInterval& I) const { return at(I.rank(), I.index()); }
};

/// Coefficients of a function that is constant on each rank-n interval, given
/// the 2^n values. Exact up to rounding.
inline HaarExpansion haar_analyze_piecewise(std::span<const double> values, int max_rank) {
  const std::size_t n = values.size();
  if (n == 0 || (n & (n - 1)) != 0) throw DomainError("piecewise values need a power-of-two count");
  const int fine = std::countr_zero(n);
  if (max_rank >= fine) throw DomainError("max_rank must be below the rank of the pieces");
  // Integrals over every interval, built bottom-up.
  std::vector<double> mass(values.begin(), values.end());
  for (auto& m : mass) m /= static_cast<double>(n);
  HaarExpansion e(max_rank);
  for (int r = fine - 1; r >= 0; --r) {
    std::vector<double> up(std::size_t{1} << r);
    for (std::size_t i = 0; i < up.size(); ++i) {
      if (r <= max_rank) e.at(r, i) = (mass[2 * i + 1] - mass[2 * i]) / std::ldexp(1.0, -r);
      up[i] = mass[2 * i] + mass[2 * i + 1];
    }
    mass.swap(up);
  }
  e.mean = mass[0];
  return e;
}

/// L = integral of f, b_I = (1/|I|) integral of f psi_I. Every half-interval at
/// rank max_rank + 1 is integrated once by Gauss-Kronrod and coarser integrals are sums.
template <class F>
HaarExpansion haar_analyze(F&& f, int max_rank, double tol = 1e-12) {
  if (max_rank < -1) throw DomainError("max_rank must be >= -1");
  const int fine = max_rank + 1;
  const std::size_t n = std::size_t{1} << fine;
  std::vector<double> mass(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = std::ldexp(static_cast<double>(i), -fine);
    const double b = std::ldexp(static_cast<double>(i + 1), -fine);
    mass[i] = integrate(f, a, b, tol, {}, 1e-300).value;
  }
  HaarExpansion e(max_rank);
  for (int r = fine - 1; r >= 0; --r) {
    std::vector<double> up(std::size_t{1} << r);
    for (std::size_t i = 0; i < up.size(); ++i) {
      e.at(r, i) = (mass[2 * i + 1] - mass[2 * i]) / std::ldexp(1.0, -r);
      up[i] = mass[2 * i] + mass[2 * i + 1];
    }
    mass.swap(up);
  }
  e.mean = mass[0];
  return e;
}

/// L + sum over ranks <= k of b_I psi_I(t). k = -1 gives L.
inline double haar_synthesize(const HaarExpansion& e, int k, double t) {
  if (!(t > 0.0 && t <= 1.0)) throw DomainError("synthesis point outside (0, 1]");
  if (k > e.max_rank || k < -1) throw DomainError("synthesis rank beyond the expansion");
  CompensatedSum s;
  s.add(e.mean);
  if (k < 0) return s.value();
  const DyadicInterval leaf = DyadicInterval::containing(t, k + 1);
  for (int r = 0; r <= k; ++r) {
    const DyadicInterval I = leaf.ancestor(r);
    const double sign = leaf.ancestor(r + 1).side() ? 1.0 : -1.0;
    s.add(sign * e.coeff(I));
  }
  return s.value();
}

/// Values of the rank-k synthesis on each of the 2^(k+1) rank-(k+1) intervals.
inline std::vector<double> haar_synthesize_pieces(const HaarExpansion& e, int k) {
  if (k > e.max_rank || k < -1) throw DomainError("synthesis rank beyond the expansion");
  std::vector<double> v{e.mean};
  for (int r = 0; r <= k; ++r) {
    std::vector<double> next(v.size() * 2);
    for (std::size_t i = 0; i < v.size(); ++i) {
      next[2 * i] = v[i] - e.at(r, i);
      next[2 * i + 1] = v[i] + e.at(r, i);
    }
    v.swap(next);
  }
  return v;
}

// ---------------------------------------------------------------------------
// Martingale tables

/// Level k is constant on each rank-alpha_k interval. Levels are stored as maps
/// index -> value so that sampled tables need only hold the intervals they use.
/// Only the uniform measure is supported.
struct MartingaleTable {
  std::vector<int> filtration;
  std::vector<std::map<std::uint64_t, double>> levels;
  bool exact = true;            ///< false for sampled surrogates
  std::vector<double> defect;   ///< per level k < K for surrogates

  std::size_t depth() const { return levels.size(); }

  double value(std::size_t k, double t) const {
    if (k >= levels.size()) throw DomainError("level beyond the table");
    const auto idx = DyadicInterval::containing(t, filtration[k]).index();
    const auto it = levels[k].find(idx);
    if (it == levels[k].end()) throw DomainError("level " + std::to_string(k) + " not materialised at t");
    return it->second;
  }

  void validate() const {
    if (filtration.size() != levels.size()) throw DomainError("filtration and level counts differ");
    for (std::size_t k = 0; k < filtration.size(); ++k) {
      if (filtration[k] < 0 || filtration[k] > 62) throw DomainError("filtration rank out of range");
      if (k && filtration[k] < filtration[k - 1]) throw DomainError("filtration must be non-decreasing");
    }
  }
};

/// Average of level k+1 over I, where I has rank alpha_k.
inline double conditional_expectation(const MartingaleTable& table, std::size_t k, const DyadicInterval& I) {
  if (k + 1 >= table.depth()) throw DomainError("conditional expectation needs level k + 1");
  if (I.rank() != table.filtration[k]) throw DomainError("interval rank does not match alpha_k");
  const int gap = table.filtration[k + 1] - table.filtration[k];
  const std::uint64_t first = I.index() << gap;
  const std::uint64_t count = std::uint64_t{1} << gap;
  CompensatedSum s;
  for (std::uint64_t j = 0; j < count; ++j) {
    const auto it = table.levels[k + 1].find(first + j);
    if (it == table.levels[k + 1].end()) throw DomainError("child of interval not materialised");
    s.add(it->second);
  }
  return s.value() / static_cast<double>(count);
}

/// Largest |E[level k+1 | I] - level k on I| over the materialised intervals of
/// level k whose children are all present.
inline double martingale_defect(const MartingaleTable& table, std::size_t k) {
  double worst = 0.0;
  for (const auto& [idx, v] : table.levels[k]) {
    try {
      worst = std::max(worst, std::abs(conditional_expectation(table, k, DyadicInterval(table.filtration[k], idx)) - v));
    } catch (const DomainError&) {
      // interval sampled without its children
    }
  }
  return worst;
}

/// <Lambda>^2_k(t) = Lambda_0^2 + sum_{j=1}^k E[(Lambda_j - Lambda_{j-1})^2 | F_{alpha_{j-1}}](t).
/// The Lambda_0^2 term reproduces the mean-squared term of the Haar form.
inline double quadratic_function(const MartingaleTable& table, std::size_t k, double t) {
  if (k >= table.depth()) throw DomainError("level beyond the table");
  if (!(t > 0.0 && t <= 1.0)) throw DomainError("point outside (0, 1]");
  CompensatedSum s;
  const double l0 = table.value(0, t);
  s.add(l0 * l0);
  for (std::size_t j = 1; j <= k; ++j) {
    const auto I = DyadicInterval::containing(t, table.filtration[j - 1]);
    const double prev = table.levels[j - 1].at(I.index());
    const int gap = table.filtration[j] - table.filtration[j - 1];
    const std::uint64_t first = I.index() << gap;
    const std::uint64_t count = std::uint64_t{1} << gap;
    CompensatedSum inc;
    for (std::uint64_t c = 0; c < count; ++c) {
      const double d = table.levels[j].at(first + c) - prev;
      inc.add(d * d);
    }
    s.add(inc.value() / static_cast<double>(count));
  }
  return s.value();
}

/// Table with alpha_k = k and level k = L + sum_{rank < k} b_I psi_I, for k = 0..max_rank+1.
/// quadratic_function at level k + 1 then equals L^2 + sum over ranks <= k of b_I^2.
inline MartingaleTable table_from_expansion(const HaarExpansion& e) {
  MartingaleTable t;
  for (int k = 0; k <= e.max_rank + 1; ++k) {
    t.filtration.push_back(k);
    const auto pieces = haar_synthesize_pieces(e, k - 1);
    std::map<std::uint64_t, double> level;
    for (std::size_t i = 0; i < pieces.size(); ++i) level.emplace(i, pieces[i]);
    t.levels.push_back(std::move(level));
  }
  return t;
}

/// Exact martingale of conditional expectations of a function given by its 2^n
/// values on rank-n intervals, on the filtration `ranks` (each <= n).
inline MartingaleTable table_from_conditional_expectations(std::span<const double> values,
                                                           const std::vector<int>& ranks) {
  const int fine = std::countr_zero(values.size());
  MartingaleTable t;
  t.filtration = ranks;
  for (int r : ranks) {
    if (r > fine) throw DomainError("filtration rank exceeds the resolution of the values");
    const std::size_t block = std::size_t{1} << (fine - r);
    std::map<std::uint64_t, double> level;
    for (std::size_t i = 0; i < (std::size_t{1} << r); ++i) {
      CompensatedSum s;
      for (std::size_t j = 0; j < block; ++j) s.add(values[i * block + j]);
      level.emplace(i, s.value() / static_cast<double>(block));
    }
    t.levels.push_back(std::move(level));
  }
  t.validate();
  return t;
}

/// Keeps only the levels listed in `keep` (increasing level numbers).
inline MartingaleTable thin_table(const MartingaleTable& t, const std::vector<std::size_t>& keep) {
  MartingaleTable out;
  out.exact = t.exact;
  for (std::size_t k : keep) {
    out.filtration.push_back(t.filtration.at(k));
    out.levels.push_back(t.levels.at(k));
  }
  out.validate();
  return out;
}

/// Integral over (0, 1] of the square of a fully materialised level.
inline double level_square_integral(const MartingaleTable& t, std::size_t k) {
  const std::size_t n = std::size_t{1} << t.filtration[k];
  if (t.levels[k].size() != n) throw DomainError("level is not fully materialised");
  CompensatedSum s;
  for (const auto& [i, v] : t.levels[k]) s.add(v * v);
  return s.value() / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Sampling a field into a table

/// Level k on I in Delta_{alpha_k} takes H(x_I, phi(x_I) + A 2^-alpha_k) at the
/// centre x_I. With an empty `points` every interval is filled; otherwise only the
/// intervals containing a point, together with all their children at the next
/// level so that the defect can be measured there.
inline MartingaleTable bloch_to_martingale(const std::function<double(double, double)>& H, const GraphDomain& dom,
                                           const ScaleSequence& scales, double A, int K,
                                           std::span<const double> points = {}) {
  if (!(A > 0.0)) throw DomainError("sampling offset A must be positive");
  if (K < 0 || static_cast<std::size_t>(K) >= scales.alpha.size()) {
    throw DomainError("K exceeds the scale sequence");
  }
  MartingaleTable t;
  t.exact = false;
  for (int k = 0; k <= K; ++k) t.filtration.push_back(scales.alpha[k]);
  t.levels.resize(K + 1);
  t.validate();
  auto fill = [&](int k, std::uint64_t idx) {
    auto& level = t.levels[k];
    if (level.count(idx)) return;
    const DyadicInterval I(t.filtration[k], idx);
    const double x = I.center();
    level.emplace(idx, H(x, dom.phi(x) + A * std::ldexp(1.0, -t.filtration[k])));
  };
  if (points.empty()) {
    for (int k = 0; k <= K; ++k) {
      if (t.filtration[k] > 24) throw DomainError("dense sampling limited to rank 24; pass sample points");
      for (std::uint64_t i = 0; i < (std::uint64_t{1} << t.filtration[k]); ++i) fill(k, i);
    }
  } else {
    for (int k = 0; k <= K; ++k) {
      for (double p : points) {
        const auto idx = DyadicInterval::containing(p, t.filtration[k]).index();
        fill(k, idx);
        if (k < K) {
          const int gap = t.filtration[k + 1] - t.filtration[k];
          if (gap > 16) throw DomainError("filtration gap too wide for sampled defects");
          for (std::uint64_t c = 0; c < (std::uint64_t{1} << gap); ++c) fill(k + 1, (idx << gap) + c);
        }
      }
    }
  }
  for (int k = 0; k < K; ++k) t.defect.push_back(martingale_defect(t, k));
  return t;
}

struct LiBounds {
  std::vector<double> level_vs_average;  ///< per k: max over x of |Lambda_k(x) - I(x, s_k)|
  std::vector<double> level_steps;       ///< per k < K: max over x of |Lambda_k(x) - Lambda_{k+1}(x)|
  double sup_level_vs_average = 0.0;
  double sup_level_steps = 0.0;
};

/// `averages[i][k]` is I(xs[i], s_k) for k = 0..K.
inline LiBounds li_bounds_check(const MartingaleTable& table, std::span<const double> xs,
                                const std::vector<std::vector<double>>& averages) {
  if (averages.size() != xs.size()) throw DomainError("average grid does not match the x grid");
  const std::size_t K = table.depth();
  LiBounds out;
  out.level_vs_average.assign(K, 0.0);
  out.level_steps.assign(K ? K - 1 : 0, 0.0);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (averages[i].size() != K) throw DomainError("average grid does not match the table depth");
    for (std::size_t k = 0; k < K; ++k) {
      const double lk = table.value(k, xs[i]);
      out.level_vs_average[k] = std::max(out.level_vs_average[k], std::abs(lk - averages[i][k]));
      if (k + 1 < K) out.level_steps[k] = std::max(out.level_steps[k], std::abs(lk - table.value(k + 1, xs[i])));
    }
  }
  for (double v : out.level_vs_average) out.sup_level_vs_average = std::max(out.sup_level_vs_average, v);
  for (double v : out.level_steps) out.sup_level_steps = std::max(out.sup_level_steps, v);
  return out;
}

struct LilStatistic {
  std::vector<double> per_point;
  double sup = 0.0;
};

/// Per point: max over m >= 3 of |Lambda_m(t)| / sqrt(m log log m).
inline LilStatistic martingale_lil_statistic(const MartingaleTable& table, std::span<const double> ts) {
  if (table.depth() < 4) throw DomainError("the statistic needs at least four levels");
  LilStatistic out;
  for (double t : ts) {
    double best = 0.0;
    for (std::size_t m = 3; m < table.depth(); ++m) {
      const double md = static_cast<double>(m);
      best = std::max(best, std::abs(table.value(m, t)) / std::sqrt(md * std::log(std::log(md))));
    }
    out.per_point.push_back(best);
    out.sup = std::max(out.sup, best);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialisation

inline void write_table_csv(std::ostream& out, const MartingaleTable& t) {
  out << "filtration";
  for (int r : t.filtration) out << ',' << r;
  out << "\nlevel,rank,index,value\n";
  for (std::size_t k = 0; k < t.levels.size(); ++k) {
    for (const auto& [i, v] : t.levels[k]) out << k << ',' << t.filtration[k] << ',' << i << ',' << fmt17(v) << '\n';
  }
}

inline MartingaleTable read_table_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty table CSV", "");
  auto head = split_csv_line(line);
  if (head.empty() || head[0] != "filtration") throw ParseError("table CSV must start with filtration", line);
  MartingaleTable t;
  try {
    for (std::size_t i = 1; i < head.size(); ++i) t.filtration.push_back(std::stoi(head[i]));
    t.levels.resize(t.filtration.size());
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto c = split_csv_line(line);
      if (c.size() != 4) throw ParseError("table row needs 4 cells", line);
      const auto k = static_cast<std::size_t>(std::stoul(c[0]));
      if (k >= t.levels.size() || std::stoi(c[1]) != t.filtration[k]) throw ParseError("inconsistent table row", line);
      t.levels[k][std::stoull(c[2])] = std::stod(c[3]);
    }
  } catch (const std::logic_error& e) {
    if (auto p = dynamic_cast<const ParseError*>(&e)) throw *p;
    throw ParseError("non-numeric table cell", line);
  }
  t.validate();
  return t;
}

inline void write_expansion_csv(std::ostream& out, const HaarExpansion& e) {
  out << "mean," << fmt17(e.mean) << "\nmax_rank," << e.max_rank << "\nrank,index,value\n";
  for (int r = 0; r <= e.max_rank; ++r) {
    for (std::size_t i = 0; i < e.coeffs[r].size(); ++i) out << r << ',' << i << ',' << fmt17(e.coeffs[r][i]) << '\n';
  }
}

inline HaarExpansion read_expansion_csv(std::istream& in) {
  std::string l1, l2, l3, line;
  std::getline(in, l1);
  std::getline(in, l2);
  std::getline(in, l3);
  const auto a = split_csv_line(l1);
  const auto b = split_csv_line(l2);
  if (a.size() != 2 || a[0] != "mean" || b.size() != 2 || b[0] != "max_rank") {
    throw ParseError("expansion CSV header malformed", l1);
  }
  try {
    HaarExpansion e(std::stoi(b[1]), std::stod(a[1]));
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto c = split_csv_line(line);
      if (c.size() != 3) throw ParseError("expansion row needs 3 cells", line);
      e.at(std::stoi(c[0]), std::stoull(c[1])) = std::stod(c[2]);
    }
    return e;
  } catch (const std::out_of_range&) {
    throw ParseError("expansion row out of range", line);
  } catch (const std::invalid_argument& e) {
    if (auto p = dynamic_cast<const ParseError*>(&e)) throw *p;
    throw ParseError("non-numeric expansion cell", line);
  }
}

}  // namespace blil

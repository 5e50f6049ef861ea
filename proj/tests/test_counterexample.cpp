#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "blil/counterexample.hpp"

using namespace blil;

namespace {

const MotherWavelet& wavelet() {
  static const MotherWavelet phi = make_mother_wavelet();
  return phi;
}

// Frozen from the oracles in Wavelet.* below.
constexpr double kPairing = -0.325843741165747801417900845047;
constexpr double kDerivSup = 15.6404995759558944680592405623;

Overrides with_a(int a, bool relax_upper = false) {
  Overrides ov;
  ov.a = a;
  ov.relax_bracket_upper = relax_upper;
  return ov;
}

// Small instances whose last generation start is at most 12.
struct Instance {
  std::string name;
  ConstructionParams params;
  bool stops = false;  ///< some interval is stopped
};

std::vector<Instance> small_instances() {
  const auto& phi = wavelet();
  return {
      {"a2_0_2_6", make_params(phi, 2, {0, 2, 6}, weights::log_linear(3), with_a(2)), false},
      {"a2_0_2_6_12", make_params(phi, 2, {0, 2, 6, 12}, weights::log_linear(3), with_a(2, true)), true},
      {"a1_0_6_12", make_params(phi, 1, {0, 6, 12}, weights::log_linear(6), with_a(1)), true},
      {"a2_0_8_12", make_params(phi, 2, {0, 8, 12}, weights::log_linear(8), with_a(2)), true},
      {"a3_0_9_12", make_params(phi, 3, {0, 9, 12}, weights::log_linear(9), with_a(3)), true},
      {"a9_0_9", make_params(phi, 9, {0, 9}, weights::log_linear(9)), false},
  };
}

ConstructionParams deep_params(bool relax_j0 = false) {
  Overrides ov;
  ov.relax_j0 = relax_j0;
  return make_params(wavelet(), 9, {0, 72, 144, 216}, weights::log_linear(72), ov);
}

// The point 1/3 at full depth: index (2^R - 1)/3 = 0b0101...01 and local coordinate 1/3 (R even).
Locus one_third(int R) {
  constexpr std::uint64_t w = 0x5555555555555555ULL;
  return {DyadicInterval::from_words(R, {w, w, w, w}), 1.0 / 3};
}

// Whole-tree construction: every interval of rank <= K is materialised, Phi_m is
// kept on the grid p 2^-(K+1), and each generation's stopped region is a point mask.
struct FullTree {
  int K = 0;
  std::vector<std::vector<int>> c;          // c[m][i]
  std::vector<std::vector<int>> in_region;  // interval inside the stopped region of its check generation
  std::vector<std::vector<double>> phi_at;  // Phi_m on the grid, after step m
};

FullTree build_full_tree(const MotherWavelet& phi, int a, const std::vector<int>& beta, bool stopping = true) {
  FullTree T;
  T.K = beta.back();
  const int K = T.K;
  const std::size_t P = std::size_t{2} << K;  // grid points p / P, p = 1..P
  auto t_of = [&](std::size_t p) { return static_cast<double>(p) / static_cast<double>(P); };
  std::vector<double> Phi(P + 1, 0.0);
  std::vector<char> region(P + 1, 0);  // the stopped region of the current generation
  auto gen_of_step = [&](int m) {       // steps beta_g + 1 .. beta_(g+1) belong to generation g
    int g = 0;
    for (int b : beta) g += b < m;
    return g;
  };
  auto center_value = [&](int m, std::size_t i) {
    // centre of (i 2^-m, (i+1) 2^-m] is grid point (2i+1) 2^(K-m)
    return Phi[(2 * i + 1) << (K - m)];
  };
  auto inside = [&](int m, std::size_t i) {
    const std::size_t w = std::size_t{2} << (K - m);
    return region[i * w + w / 2] != 0;  // regions are unions of whole intervals of rank <= m
  };
  auto mark = [&](int m, std::size_t i) {
    const std::size_t w = std::size_t{2} << (K - m);
    for (std::size_t p = i * w + 1; p <= (i + 1) * w; ++p) region[p] = 1;
  };
  for (int m = 0; m <= K; ++m) {
    const std::size_t n = std::size_t{1} << m;
    T.c.emplace_back(n, 0);
    T.in_region.emplace_back(n, 0);
    const bool add_step = m == 0 || m % a == 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool add = m == 0 || (add_step && !inside(m, i));
      if (!add) continue;
      T.c[m][i] = 1;
      const std::size_t w = std::size_t{2} << (K - m);
      for (std::size_t p = i * w + 1; p < (i + 1) * w; ++p) Phi[p] += phi(std::ldexp(t_of(p), m) - double(i));
    }
    const bool fresh = std::find(beta.begin(), beta.end(), m) != beta.end();
    const int g = fresh ? gen_of_step(m) + 1 : gen_of_step(m);
    if (fresh) std::fill(region.begin(), region.end(), 0);
    if (stopping && (fresh || m % a == 0)) {
      for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(center_value(m, i)) > g) mark(m, i);
      }
    }
    for (std::size_t i = 0; i < n; ++i) T.in_region[m][i] = inside(m, i);
    T.phi_at.push_back(Phi);
  }
  return T;
}

// Phi_k(t) = (1/pi) int_0^1 Phi_k(s) y / ((x - s)^2 + y^2) ds, piecewise on rank-k cells.
struct Direct {
  double v, y_dx, y_dy;
};

Direct direct_poisson(const StoppingConstruction& sc, int k, double x, double y) {
  Direct out{0, 0, 0};
  const std::size_t n = std::size_t{1} << k;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = std::ldexp(double(i), -k), b = std::ldexp(double(i + 1), -k);
    auto F = [&](double s) { return sc.phi_eval(k, std::clamp(s, std::nextafter(a, 1.0), b)); };
    std::vector<double> cuts{x};
    for (double r = y; r < 1.0; r *= 4) {
      cuts.push_back(x - r);
      cuts.push_back(x + r);
    }
    out.v += integrate([&](double s) { return F(s) * y / ((x - s) * (x - s) + y * y) / std::numbers::pi; }, a, b,
                       1e-12, cuts, 1e-15)
                 .value;
    out.y_dx += integrate(
                    [&](double s) {
                      const double q = (x - s) * (x - s) + y * y;
                      return -F(s) * 2 * y * y * (x - s) / (q * q) / std::numbers::pi;
                    },
                    a, b, 1e-12, cuts, 1e-15)
                    .value;
    out.y_dy += integrate(
                    [&](double s) {
                      const double q = (x - s) * (x - s) + y * y;
                      return F(s) * y * ((x - s) * (x - s) - y * y) / (q * q) / std::numbers::pi;
                    },
                    a, b, 1e-12, cuts, 1e-15)
                    .value;
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

TEST(Wavelet, Constants) {
  const auto& phi = wavelet();
  // <phi, psi> = 2 c int_{1/2}^1 (t(1-t))^11 (1-2t) dt = -c 4^-12 / 6 by u = t(1-t).
  const double q = 11.0 / 46.0;
  const double c = 1.0 / (std::pow(q, 11) * std::sqrt(1 - 4 * q));
  EXPECT_NEAR(phi.haar_pairing, -c * std::pow(4.0, -12) / 6, 1e-15);
  EXPECT_NEAR(phi.haar_pairing, kPairing, 1e-15);
  EXPECT_NEAR(phi.l1_norm, -kPairing, 1e-15);
  // sup |phi'| by central differences of phi on a fine grid.
  double dmax = 0.0;
  const int n = 200000;
  const double h = 1e-6;
  for (int i = 1; i < n; ++i) {
    const double t = double(i) / n;
    dmax = std::max(dmax, std::abs(phi(t + h) - phi(t - h)) / (2 * h));
  }
  EXPECT_NEAR(dmax, kDerivSup, 1e-5);
  EXPECT_NEAR(phi.deriv_sup, kDerivSup, 1e-12);
  EXPECT_NEAR(phi((1 - std::sqrt(1 - 4 * q)) / 2), 1.0, 1e-12);
  EXPECT_NEAR(phi.sup_norm, 1.0, 1e-10);
}

TEST(Wavelet, SupportMeanAndSmoothness) {
  const auto& phi = wavelet();
  EXPECT_EQ(phi(0.0), 0.0);
  EXPECT_EQ(phi(1.0), 0.0);
  EXPECT_EQ(phi(-0.5), 0.0);
  EXPECT_EQ(phi(1.5), 0.0);
  const double mean = gauss_legendre16([&](double t) { return phi(t); }, 0.0, 0.5) +
                      gauss_legendre16([&](double t) { return phi(t); }, 0.5, 1.0);
  EXPECT_NEAR(mean, 0.0, 1e-12);
  for (double t : {0.1, 0.3, 0.45}) EXPECT_NEAR(phi(t), -phi(1 - t), 1e-15);
  // Odd symmetry about 1/2 carries the vanishing at 0 over to 1.
  for (int k = 1; k <= 10; ++k) EXPECT_EQ(phi.derivative_n(k, 0.0), 0.0) << k;
  EXPECT_NE(phi.derivative_n(11, 0.0), 0.0);
  // Numerically through order 4: |phi(t)| = O(t^11) at both ends.
  for (double t : {1e-2, 1e-3}) {
    EXPECT_LT(std::abs(phi(t)), 1e-3 * std::pow(t, 5));
    EXPECT_LT(std::abs(phi(1 - t)), 1e-3 * std::pow(t, 5));
    EXPECT_LT(std::abs(phi.derivative(1 - t)), 1e-3 * std::pow(t, 4));
  }
  for (double t : {0.2, 0.6}) EXPECT_NEAR(phi.derivative(t), phi.derivative_n(1, t), 1e-9 * kDerivSup * 1e3);
}

TEST(Params, ChosenForTheBuiltWavelet) {
  const auto& phi = wavelet();
  // 2^(1-a) |phi'| <= |<phi,psi>|/4 first holds at a = 9.
  EXPECT_GT(std::ldexp(kDerivSup, -7), 0.25 * -kPairing);
  EXPECT_LE(std::ldexp(kDerivSup, -8), 0.25 * -kPairing);
  EXPECT_EQ(smallest_admissible_a(phi), 9);
  EXPECT_EQ(default_j0(phi), 67);  // ceil(4 * 15.64 + 4)
  const auto p = choose_params(phi, weights::log_linear(72), 4);
  EXPECT_EQ(p.a, 9);
  EXPECT_EQ(p.beta, (std::vector<int>{0, 9, 72, 144}));
  for (int b : p.beta) EXPECT_EQ(b % p.a, 0);
  EXPECT_TRUE(p.notes.empty());
}

TEST(Params, Errors) {
  const auto& phi = wavelet();
  // w0(2^-9) is already above 2, so no multiple of 9 brackets generation 2.
  EXPECT_THROW(choose_params(phi, weights::w0(), 3), ConstructionError);
  EXPECT_THROW(choose_params(phi, weights::w0(), 1), DomainError);
  EXPECT_THROW(make_params(phi, 2, {0, 2}, weights::log_linear(2)), ConstructionError);
  EXPECT_THROW(make_params(phi, 9, {0, 10}, weights::log_linear(10)), ConstructionError);
  EXPECT_THROW(make_params(phi, 9, {9, 18}, weights::log_linear(9)), ConstructionError);
  EXPECT_THROW(make_params(phi, 9, {0, 9}, weights::log_linear(1)), ConstructionError);
  const auto relaxed = make_params(phi, 9, {0, 9}, weights::log_linear(1), with_a(9, true));
  EXPECT_FALSE(relaxed.notes.empty());
  Overrides ov;
  ov.max_depth = 100;
  EXPECT_THROW(choose_params(phi, weights::log_linear(9), 20, ov), ConstructionError);
}

TEST(Construction, LazyEqualsFullTree) {
  for (const auto& inst : small_instances()) {
    const auto& p = inst.params;
    StoppingConstruction sc(wavelet(), p);
    const auto T = build_full_tree(wavelet(), p.a, p.beta);
    const int K = T.K;
    int stops = 0;
    for (int m = 0; m <= K; ++m) {
      for (std::uint64_t i = 0; i < (std::uint64_t{1} << m); ++i) {
        const auto d = sc.decision(DyadicInterval(m, i));
        ASSERT_EQ(d.c, T.c[m][i]) << inst.name << ' ' << m << ' ' << i;
        ASSERT_EQ(d.blocked, bool(T.in_region[m][i])) << inst.name << ' ' << m << ' ' << i;
        stops += d.stopped;
      }
    }
    EXPECT_EQ(stops > 0, inst.stops) << inst.name;
    const std::size_t P = std::size_t{2} << K;
    for (int m = 0; m <= K; ++m) {
      for (std::size_t q = 1; q <= P; ++q) {
        const double t = static_cast<double>(q) / static_cast<double>(P);
        ASSERT_NEAR(sc.phi_eval(m, t), T.phi_at[m][q], 1e-12) << inst.name << ' ' << m << ' ' << t;
      }
    }
  }
}

TEST(Construction, SmallExampleOnSamplePoints) {
  const auto inst = small_instances()[0];
  StoppingConstruction sc(wavelet(), inst.params);
  const auto T = build_full_tree(wavelet(), 2, {0, 2, 6});
  for (int i = 0; i < 64; ++i) {
    const std::size_t q = 2 * i + 1;  // (i + 1/2) / 64 on the 128-point grid
    EXPECT_NEAR(sc.phi_eval(6, (i + 0.5) / 64), T.phi_at[6][q], 1e-12);
  }
  for (double t : {0.01, 0.37, 0.999}) EXPECT_EQ(sc.phi_eval(0, t), wavelet()(t));
  EXPECT_THROW(sc.phi_eval(7, 0.5), DomainError);
}

TEST(Construction, StoppedIntervalsFreezePhi) {
  const auto p = small_instances()[1].params;
  StoppingConstruction sc(wavelet(), p);
  int checked = 0;
  for (int m = 1; m < p.depth(); ++m) {
    for (std::uint64_t i = 0; i < (std::uint64_t{1} << m); ++i) {
      const DyadicInterval I(m, i);
      if (!sc.decision(I).stopped) continue;
      const int next = *std::upper_bound(p.beta.begin(), p.beta.end(), m);
      for (int k = m + 1; k < next; ++k) {
        for (double s : {0.1, 0.5, 0.77}) {
          const double t = I.left() + s * I.length();
          EXPECT_EQ(sc.phi_eval(k, t), sc.phi_eval(m, t));
          ++checked;
        }
      }
    }
  }
  EXPECT_GT(checked, 0);
}

TEST(Construction, MonotoneSparseDeterministic) {
  auto insts = small_instances();
  insts.push_back({"deep", deep_params()});
  for (const auto& inst : insts) {
    const auto& p = inst.params;
    StoppingConstruction sc(wavelet(), p), twin(wavelet(), p);
    const auto loci = sample_loci({Sampler::Kind::monte_carlo, 300, 5}, p.depth());
    for (const auto& x : loci) {
      const Chain ch = sc.chain(x, p.depth());
      twin.chain(x, p.depth());
      int last = -1;
      for (int m = 0; m <= p.depth(); ++m) {
        if (ch.d[m].c) {
          if (last >= 0) {
            EXPECT_GE(m - last, p.a) << inst.name;
          }
          last = m;
        }
      }
    }
    // Inside a stopped interval every later decision of the generation inherits with c = 0.
    for (const auto& [I, d] : sc.memo()) {
      if (I.rank() == 0 || std::binary_search(p.beta.begin(), p.beta.end(), I.rank())) continue;
      if (sc.decision(I.parent()).blocked) {
        EXPECT_EQ(d.c, 0) << inst.name << ' ' << I.key();
        EXPECT_TRUE(d.blocked);
        EXPECT_FALSE(d.stopped);
      }
    }
    ASSERT_EQ(sc.memo().size(), twin.memo().size());
    for (const auto& [I, d] : sc.memo()) EXPECT_EQ(twin.memo().at(I), d);
  }
}

TEST(Construction, FrozenStateIsReadOnly) {
  StoppingConstruction sc(wavelet(), deep_params());
  const auto loci = sample_loci({Sampler::Kind::monte_carlo, 50, 3}, 216);
  for (const auto& x : loci) sc.chain(x, 216);
  const auto before = sc.memo().size();
  sc.freeze();
  EXPECT_TRUE(sc.frozen());
  const auto first = sc.phi_eval(216, loci[0]);
  for (const auto& x : sample_loci({Sampler::Kind::monte_carlo, 50, 4}, 216)) sc.phi_eval(216, x);
  EXPECT_EQ(sc.memo().size(), before);
  EXPECT_EQ(sc.phi_eval(216, loci[0]), first);
}

TEST(Construction, SnapshotCsv) {
  StoppingConstruction sc(wavelet(), small_instances()[0].params);
  for (int i = 0; i < 64; ++i) sc.phi_eval(6, (i + 0.5) / 64);
  std::ostringstream os;
  write_snapshot_csv(os, sc);
  std::istringstream is(os.str());
  const auto table = read_csv(is);
  EXPECT_EQ(table.header, (std::vector<std::string>{"rank", "index", "c", "stopped", "generation", "blocked"}));
  EXPECT_EQ(table.rows.size(), sc.memo().size());
  EXPECT_EQ(table.rows[0][0], "0");
  EXPECT_EQ(table.rows[0][2], "1");
  for (const auto& row : table.rows) {
    const DyadicInterval I(std::stoi(row[0]), std::stoull(row[1], nullptr, 16));
    EXPECT_EQ(std::stoi(row[2]), sc.memo().at(I).c);
  }
}

// ---------------------------------------------------------------------------

TEST(Bounds, StepAndEnvelope) {
  auto insts = small_instances();
  insts.push_back({"deep", deep_params()});
  for (const auto& inst : insts) {
    StoppingConstruction sc(wavelet(), inst.params);
    const int K = inst.params.depth();
    const auto loci = K <= 12 ? sample_loci({Sampler::Kind::grid, 4096}, K)
                              : sample_loci({Sampler::Kind::monte_carlo, 2000, 9}, K);
    for (int k = 1; k <= K; ++k) {
      const double step = bloch_step_norm(sc, k, loci);
      EXPECT_LE(step, 1.0) << inst.name << ' ' << k;
      if (k % inst.params.a != 0) {
        EXPECT_EQ(step, 0.0);
      }
    }
    for (int k = 0; k <= K; ++k) {
      const double env = growth_envelope(sc, k, loci);
      EXPECT_LE(env, growth_bound(sc, k)) << inst.name << ' ' << k;
      const int j = sc.check_generation(k);
      EXPECT_LE(env, generation_bound(sc, j)) << inst.name << ' ' << k;
    }
  }
}

TEST(Bounds, ExactValuesAtKnownPoints) {
  StoppingConstruction sc(wavelet(), small_instances()[0].params);
  const double q = 11.0 / 46.0;
  const std::vector<Locus> peak{Locus::at((1 - std::sqrt(1 - 4 * q)) / 2)};
  EXPECT_NEAR(growth_envelope(sc, 0, peak), 1.0, 1e-12);
  // A rank-2 interval not stopped at generation start adds a full-height bump.
  StoppingConstruction deep(wavelet(), deep_params());
  const auto grid = sample_loci({Sampler::Kind::grid, 1 << 14}, 216);
  EXPECT_GT(bloch_step_norm(deep, 9, grid), 0.99);
}

TEST(Bounds, NegativeControlBreaksEnvelope) {
  Overrides ov = with_a(2);
  ov.disable_stopping = true;
  const auto p = make_params(wavelet(), 2, {0, 254}, weights::log_linear(254), ov);
  StoppingConstruction sc(wavelet(), p);
  const std::vector<Locus> x{one_third(254)};
  // 1/3 sits at local coordinate 1/3 or 2/3 of every interval, so each of the 128 bumps adds phi(1/3) in sign.
  const double env = growth_envelope(sc, 254, x);
  EXPECT_NEAR(env, 128 * wavelet()(1.0 / 3), 1e-9);
  EXPECT_GT(env, growth_bound(sc, 254));
  EXPECT_LE(bloch_step_norm(sc, 254, x), 1.0);
}

TEST(Haar, CoefficientAgreesWithDenseAnalysis) {
  for (const auto& inst : small_instances()) {
    const auto& p = inst.params;
    StoppingConstruction sc(wavelet(), p);
    for (int j = 1; j < p.generations(); ++j) {
      const int n = p.beta_of(j + 1);
      const int R = std::min(10, p.depth());
      const auto e = haar_analyze([&](double t) { return sc.phi_eval(n, t); }, R, 1e-9);
      for (int r = 0; r <= R; ++r) {
        for (std::uint64_t i = 0; i < (std::uint64_t{1} << r); ++i) {
          ASSERT_NEAR(haar_coefficient(sc, n, DyadicInterval(r, i)), e.at(r, i), 1e-10) << inst.name << ' ' << r;
        }
      }
    }
  }
}

TEST(Haar, IsolatedAndVanishingCoefficients) {
  StoppingConstruction sc(wavelet(), deep_params());
  EXPECT_EQ(haar_coefficient(sc, 0, DyadicInterval(0, 0)), wavelet().haar_pairing);
  // Phi_0 = phi is a polynomial; its deep coefficients are O(2^-r |phi'|).
  const DyadicInterval deep = DyadicInterval::from_words(80, {0x1234, 0x5678, 0, 0});
  EXPECT_LE(std::abs(haar_coefficient(sc, 0, deep)), std::ldexp(kDerivSup, -80));
}

TEST(Haar, CoefficientLowerBoundOnDeepInstance) {
  StoppingConstruction sc(wavelet(), deep_params());
  const auto loci = sample_loci({Sampler::Kind::monte_carlo, 200, 21}, 216);
  for (int j = 1; j <= 2; ++j) {
    const auto active = active_intervals(sc, j, loci);
    ASSERT_FALSE(active.empty());
    const auto b = haar_coefficient_bound(sc, j, active);
    EXPECT_EQ(b.count, active.size());
    EXPECT_GE(b.min_abs, 0.5 * std::abs(kPairing) - 1e-8);
  }
  EXPECT_THROW(haar_coefficient_bound(sc, 1, std::vector<DyadicInterval>{DyadicInterval(1, 0)}), DomainError);
}

TEST(Haar, QuadraticFunctionMatchesBruteForce) {
  for (const auto& inst : small_instances()) {
    const auto& p = inst.params;
    StoppingConstruction sc(wavelet(), p);
    for (int j = 1; j < p.generations(); ++j) {
      const int n = p.beta_of(j + 1);
      const auto e = haar_analyze([&](double t) { return sc.phi_eval(n, t); }, n, 1e-9);
      for (const auto& x : sample_loci({Sampler::Kind::grid, 256}, p.depth())) {
        const Chain ch = sc.chain(x, n);
        double brute = 0.0;
        for (int m = p.beta_of(j); m < n; ++m) {
          if (ch.d[m].c) brute += e.coeff(ch.J[m]) * e.coeff(ch.J[m]);
        }
        ASSERT_NEAR(generation_square_sum(sc, j, ch), brute, 1e-8) << inst.name << ' ' << j;
      }
    }
  }
}

TEST(Haar, QuadraticLowerBoundOnDeepInstance) {
  StoppingConstruction sc(wavelet(), deep_params());
  const auto loci = sample_loci({Sampler::Kind::monte_carlo, 1000, 31}, 216);
  for (int j = 1; j <= 2; ++j) {
    const auto q = quadratic_lower_bound(sc, j, loci);
    EXPECT_GT(q.surviving, 0u);
    EXPECT_GE(q.min_sum, q.threshold);
    // Every active rank of a surviving chain has |b| >= |<phi,psi>|/2.
    const double n_act = double(sc.params().beta_of(j + 1) - sc.params().beta_of(j)) / 9;
    EXPECT_GE(q.min_sum, n_act * 0.25 * kPairing * kPairing);
  }
}

TEST(Haar, StoppedEverywhereGenerationIsOutsideG) {
  // Generation 1 of this instance stops at every rank-2 interval before adding anything further.
  const auto p = small_instances()[0].params;
  StoppingConstruction sc(wavelet(), p);
  for (const auto& x : sample_loci({Sampler::Kind::grid, 256}, 6)) {
    const Chain ch = sc.chain(x, 6);
    if (!survives(sc, 2, ch)) {
      EXPECT_TRUE(ch.d[5].blocked);
    } else {
      EXPECT_GT(generation_square_sum(sc, 2, ch), 0.0);
    }
  }
}

TEST(Parseval, Examples) {
  const auto e = haar_analyze([&](double t) { return wavelet()(t); }, 14, 1e-9);
  const auto r = parseval_residual(e);
  EXPECT_LT(r.residual, 1e-10);
  double direct = 0.0;
  for (int r2 = 0; r2 <= 14; ++r2)
    for (double b : e.coeffs[r2]) direct += b * b * std::ldexp(1.0, -r2);
  EXPECT_NEAR(r.quadratic_side, direct, 1e-13);
  const auto z = parseval_residual(haar_analyze([](double) { return 0.0; }, 6));
  EXPECT_EQ(z.quadratic_side, 0.0);
  EXPECT_EQ(z.residual, 0.0);
  for (const auto& inst : small_instances()) {
    StoppingConstruction sc(wavelet(), inst.params);
    for (int j = 1; j < inst.params.generations(); ++j) {
      const auto c = parseval_identity_check(sc, j, std::min(14, inst.params.beta_of(j + 1) + 2));
      EXPECT_LT(c.residual, 1e-8) << inst.name << ' ' << j;
      EXPECT_GT(c.square_side, 0.0);
    }
  }
  StoppingConstruction sc(wavelet(), deep_params());
  EXPECT_THROW(parseval_identity_check(sc, 1, 21), DomainError);
}

TEST(LevelSet, Examples) {
  StoppingConstruction sc(wavelet(), small_instances()[0].params);
  const Sampler grid{Sampler::Kind::grid, 4096};
  EXPECT_EQ(level_set_measure(sc, 2, 0.0, grid).measure, 1.0);
  const double env = growth_envelope(sc, 6, sample_loci(grid, 6));
  EXPECT_EQ(level_set_measure(sc, 2, env + 1e-9, grid).measure, 0.0);
  EXPECT_THROW(level_set_measure(sc, 2, 0.5, {Sampler::Kind::grid, 50}), PrecisionError);
  EXPECT_NO_THROW(level_set_measure(sc, 2, 0.5, {Sampler::Kind::grid, 50}, 0.1));
  EXPECT_THROW(level_set_measure(sc, 3, 0.5, grid), DomainError);
  for (int j = 0; j < 3; ++j) EXPECT_GE(level_set_measure(sc, j, level_threshold(sc, j), grid).measure, 0.1) << j;
  // Grid and Monte Carlo estimates agree within their error.
  const auto g = level_set_measure(sc, 2, 0.8, grid);
  const auto mc = level_set_measure(sc, 2, 0.8, {Sampler::Kind::monte_carlo, 4096, 3});
  EXPECT_NEAR(g.measure, mc.measure, 4 * mc.stderr_ + 1e-3);
}

TEST(LevelSet, DeepInstanceEveryGeneration) {
  StoppingConstruction sc(wavelet(), deep_params());
  const Sampler mc{Sampler::Kind::monte_carlo, 2000, 17};
  for (int j = 0; j < 4; ++j) {
    const auto m = level_set_measure(sc, j, level_threshold(sc, j), mc);
    EXPECT_GE(m.measure, 0.1) << j;
    if (j + 1 < 4) {
      const auto next = level_set_measure(sc, j, level_threshold(sc, j), mc, 0.05, sc.params().beta[j + 1]);
      EXPECT_GE(next.measure, 0.1) << j;
    }
  }
}

// ---------------------------------------------------------------------------

TEST(Smoothing, MatchesDirectQuadrature) {
  StoppingConstruction sc(wavelet(), small_instances()[0].params);
  for (double x : {0.3, 0.51, 0.9, 1.4, -0.2}) {
    for (double y : {0.5, 0.05, 0.003}) {
      const auto got = poisson_smooth(sc, 6, x, y, 1e-9, true);
      if (x <= 0.0 || x > 1.0) continue;
      const auto want = direct_poisson(sc, 6, x, y);
      EXPECT_NEAR(got.v, want.v, 1e-8 + got.err) << x << ' ' << y;
      EXPECT_NEAR(got.y_dx, want.y_dx, 1e-7) << x << ' ' << y;
      EXPECT_NEAR(got.y_dy, want.y_dy, 1e-7) << x << ' ' << y;
      EXPECT_LE(got.err, 1e-9);
    }
  }
}

TEST(Smoothing, ApproximateIdentityAndMeanZero) {
  StoppingConstruction sc(wavelet(), deep_params());
  for (double x : {0.2, 0.37, 0.8}) {
    const auto v = poisson_smooth(sc, 0, x, 1e-9, 1e-10);
    EXPECT_NEAR(v.v, wavelet()(x), 1e-6);
  }
  // int v(x, y) dx = int Phi = 0; the part beyond |x| = L is below the dipole tail 2 |phi|_1 / (pi L).
  StoppingConstruction small(wavelet(), small_instances()[0].params);
  const double y = 0.05, L = 200.0;
  auto f = [&](double x) { return poisson_smooth(small, 6, x, y, 1e-8).v; };
  std::vector<double> cuts;
  for (int i = 0; i <= 64; ++i) cuts.push_back(i / 64.0);
  for (double r = 2; r < L; r *= 2) {
    cuts.push_back(-r);
    cuts.push_back(1 + r);
  }
  const double total = integrate(f, -L, 1 + L, 1e-9, cuts, 1e-12).value;
  EXPECT_LT(std::abs(total), 2 * wavelet().l1_norm / (std::numbers::pi * L) + 1e-8 * (2 * L + 1));
}

TEST(Smoothing, TruncationAcrossRanks) {
  StoppingConstruction sc(wavelet(), deep_params());
  const double bound = 2 / std::numbers::pi * wavelet().l1_norm / (1 - std::ldexp(1.0, -9));
  double C = 0.0;
  for (double x : {0.123, 0.5, 0.877}) {
    for (double y : {1e-2, 1e-4}) {
      const auto top = poisson_smooth(sc, 216, x, y, 1e-6);
      for (int k : {0, 9, 18}) {
        const auto vk = poisson_smooth(sc, k, x, y, 1e-6);
        const double scale = y * std::ldexp(1.0, k);
        const double c = std::abs(vk.v - top.v) * scale;
        C = std::max(C, c);
        EXPECT_LE(c, bound + (vk.err + top.err) * scale) << x << ' ' << y << ' ' << k;
      }
    }
  }
  RecordProperty("measured_C", fmt17(C));
  EXPECT_GT(C, 0.0);
  EXPECT_THROW(poisson_smooth(sc, 216, 0.5, 0.0), DomainError);
  EXPECT_THROW(poisson_smooth(sc, 216, 0.5, 1e-3, 1e-12), PrecisionError);
}

TEST(Smoothing, SingleLayerGradient) {
  // v of Phi_0 alone: y |d/dx v| <= y |phi'|, so the layer is O(2^0 y) for y <= 1.
  StoppingConstruction sc(wavelet(), small_instances()[4].params);
  for (double y : {1.0, 0.1, 1e-3}) {
    for (double x : {0.1, 0.5, 0.8, 2.0}) {
      const auto v = poisson_smooth(sc, 0, x, y, 1e-10, true);
      EXPECT_LE(std::abs(v.y_dx), y * kDerivSup * (1 + 1e-9) + 1e-10);
      const auto d = direct_poisson(sc, 0, std::min(x, 1.0), y);
      if (x <= 1.0) {
        EXPECT_NEAR(v.y_dy, d.y_dy, 1e-8);
      }
    }
  }
  const auto xs = sample_loci({Sampler::Kind::grid, 64}, 9);
  const std::vector<double> ys{1.0, 0.1, 0.01, 1e-4};
  const auto g = bloch_and_growth_check_v(sc, xs, ys);
  EXPECT_TRUE(std::isfinite(g.sup_y_grad));
  EXPECT_TRUE(std::isfinite(g.sup_growth));
  EXPECT_LE(g.sup_growth, g.growth_bound);
}

TEST(Smoothing, DeepInstanceBoundedAndNegativeControl) {
  StoppingConstruction sc(wavelet(), deep_params());
  const auto xs = sample_loci({Sampler::Kind::monte_carlo, 40, 8}, 216);
  const std::vector<double> ys{0.5, 1e-3, 1e-12, 1e-30, 1e-60};
  const auto g = bloch_and_growth_check_v(sc, xs, ys);
  EXPECT_LE(g.sup_growth, g.growth_bound);
  EXPECT_LT(g.sup_y_grad, 10.0);

  Overrides ov = with_a(2);
  ov.disable_stopping = true;
  StoppingConstruction neg(wavelet(), make_params(wavelet(), 2, {0, 254}, weights::log_linear(254), ov));
  const std::vector<Locus> third{one_third(254)};
  const std::vector<double> y{std::ldexp(1.0, -260)};
  const auto n = bloch_and_growth_check_v(neg, third, y);
  EXPECT_GT(n.sup_growth, n.growth_bound);
  EXPECT_THROW(bloch_and_growth_check_v(sc, xs, std::vector<double>{2.0}), DomainError);
}

TEST(Witness, Examples) {
  StoppingConstruction strict(wavelet(), deep_params());
  const Sampler build{Sampler::Kind::monte_carlo, 400, 11};
  EXPECT_THROW(growth_witness(strict, 1, 1.0, build), DomainError);
  StoppingConstruction sc(wavelet(), deep_params(true));
  EXPECT_THROW(growth_witness(sc, 1, 0.0, build), DomainError);
  EXPECT_THROW(growth_witness(sc, 1, 1.0, {Sampler::Kind::monte_carlo, 40, 1}), PrecisionError);
  EXPECT_EQ(growth_witness(sc, 1, 1e300, build).measure, 1.0);
  EXPECT_NEAR(witness_height(sc, 2), std::ldexp(1.0, -74) / (10 * kDerivSup), 1e-40);
  double A = 0.0;
  for (int k = 1; k <= 4; ++k) A = std::max(A, measure_witness_constant(sc, k, build));
  EXPECT_TRUE(std::isfinite(A));
  for (int k = 1; k <= 4; ++k) {
    const auto r = growth_witness(sc, k, A, {Sampler::Kind::monte_carlo, 400, 99});
    EXPECT_GE(r.lower, 0.1) << k;
    EXPECT_LE(r.lower, r.measure);
    EXPECT_LT(r.max_err, 1e-3);
  }
}

#include <cmath>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "blil/averages.hpp"

using namespace blil;

namespace {

BoundaryData make_data(std::function<double(double)> fn, std::vector<double> kinks = {}) {
  BoundaryData f;
  f.fn = std::move(fn);
  f.lo = -10.0;
  f.hi = 10.0;
  f.kinks = std::move(kinks);
  return f;
}

// Integral of u(x, y) d(1/w0) over [delta, 1] after y = exp(-z): the measure is
// dz / ((1 + z) w0^2). Computed by Gauss-Kronrod, independent of the partition engine.
double w0_average_oracle(const HarmonicField& u, double x, double delta) {
  auto g = [&](double z) {
    const double w = std::log1p(z) + 1.0;
    return u(x, std::exp(-z)) / ((1.0 + z) * w * w);
  };
  std::vector<double> cuts;
  for (double z = 0.5; z < -std::log(delta); z += 0.5) cuts.push_back(z);
  return integrate(g, 0.0, -std::log(delta), 1e-13, cuts).value;
}

}  // namespace

TEST(AverageI, Examples) {
  const auto flat = flat_domain();
  for (const auto& w : {weights::w0(), weights::power(0.5), weights::log_power(2.0)}) {
    for (double delta : {0.5, 1e-4, 1e-30}) {
      EXPECT_NEAR(weighted_average_I(constant_field(3.0), flat, w, 0.2, delta), 3.0 * (1 - 1 / w(delta)), 1e-9);
      EXPECT_NEAR(weighted_average_I(weight_field(w), flat, w, 0.2, delta) / std::log(w(delta)), 1.0, 1e-8);
    }
  }
  const auto u = lacunary_series(weights::w0(), 16, {}, 5);
  for (double x : {0.0, 1.1, 4.5}) {
    EXPECT_NEAR(weighted_average_I(u, flat, weights::w0(), x, std::ldexp(1.0, -10)),
                w0_average_oracle(u, x, std::ldexp(1.0, -10)), 1e-6);
  }
  EXPECT_THROW(weighted_average_I(u, flat, weights::w0(), 0.0, 0.0), DomainError);
  EXPECT_THROW(weighted_average_I(u, flat, weights::w0(), 0.0, 1.5), DomainError);
}

TEST(AverageI, AdditiveInDelta) {
  const auto u = lacunary_series(weights::power(0.5), 12, {}, 2);
  const auto w = weights::power(0.5);
  const double tol = 1e-9;
  for (double x : {0.3, 2.0}) {
    const double d2 = 1e-5, d1 = 3e-2;
    const double diff = weighted_average_I(u, flat_domain(), w, x, d2, tol) -
                        weighted_average_I(u, flat_domain(), w, x, d1, tol);
    const double piece = stieltjes_integrate([&](double y) { return u(x, y); }, w, d2, d1, {.tol = tol});
    EXPECT_NEAR(diff, piece, 2 * tol * (1 + std::abs(piece)));
  }
}

TEST(AverageI, LevelFormAgreesWhereDeltaIsRepresentable) {
  const auto w = weights::power(1.0);
  const auto u = lacunary_series(w, 10, {}, 6);
  for (double v : {4.0, 1e3, 1e12}) {
    EXPECT_NEAR(weighted_average_level(u, flat_domain(), w, 0.7, v),
                weighted_average_I(u, flat_domain(), w, 0.7, 1 / v), 1e-9);
  }
  // Beyond double range the synthetic field still yields log v.
  EXPECT_NEAR(weighted_average_level(weight_field(weights::w0()), flat_domain(), weights::w0(), 0.1,
                                     std::ldexp(1.0, 800)),
              800 * std::numbers::ln2, 1e-9);
  EXPECT_THROW(weighted_average_level(poisson_extend(make_data([](double) { return 1.0; })), flat_domain(),
                                      weights::w0(), 0.0, 1e6),
               UnboundedWeightError);
}

TEST(ApproximantH, Examples) {
  const auto flat = flat_domain();
  for (double t : {0.0, 1e-6, 0.3}) {
    EXPECT_NEAR(bloch_approximant_H(constant_field(-2.0), flat, weights::w0(), 0.4, t), -2.0, 1e-9);
  }
  EXPECT_THROW(bloch_approximant_H(weight_field(weights::w0()), flat, weights::w0(), 0.4, 0.0), DivergenceError);
  EXPECT_THROW(bloch_approximant_H(poisson_extend(make_data([](double) { return 1.0; })), flat, weights::w0(), 0.0,
                                   0.0),
               DivergenceError);
  EXPECT_THROW(bloch_approximant_H(constant_field(1.0), flat, weights::w0(), 0.0, -1.0), DomainError);
}

TEST(ApproximantH, LacunaryClosedFormForPowerOne) {
  // d(1/w) = dy on (0, 1], so each mode picks up (1 - e^{-2^k}) / 2^k.
  const auto w = weights::power(1.0);
  const int K = 12;
  const auto phases = lacunary_phases(K, 17);
  const auto u = lacunary_series(w, K, phases);
  for (double x : {0.0, 0.9, 3.3}) {
    for (double t : {0.0, 1e-3, 0.25}) {
      double expect = 0.0;
      for (int k = 0; k <= K; ++k) {
        const double f = std::ldexp(1.0, k);
        const double c = k == 0 ? 1.0 : f - f / 2;
        expect += c * std::exp(-f * t) * std::cos(f * x + phases[k]) * (1 - std::exp(-f)) / f;
      }
      EXPECT_NEAR(bloch_approximant_H(u, flat_domain(), w, x, t), expect, 1e-8) << x << ' ' << t;
    }
  }
}

TEST(ApproximantH, LacunaryMatchesMultiplierForm) {
  const auto w = weights::w0();
  const int K = 14;
  const auto phases = lacunary_phases(K, 23);
  const auto u = lacunary_series(w, K, phases);
  for (double x : {0.2, 2.7}) {
    for (double t : {0.0, 1e-4}) {
      double expect = 0.0;
      for (int k = 0; k <= K; ++k) {
        const double f = std::ldexp(1.0, k);
        const double c = k == 0 ? 1.0 : w(1 / f) - w(2 / f);
        expect += c * std::exp(-f * t) * std::cos(f * x + phases[k]) *
                  multiplier_symbol(w, f / (2 * std::numbers::pi), 1e-11);
      }
      EXPECT_NEAR(bloch_approximant_H(u, flat_domain(), w, x, t), expect, 1e-7);
    }
  }
}

TEST(ApproximantH, LipschitzInLogHeight) {
  const auto w = weights::w0();
  const auto u = lacunary_series(w, 12, {}, 4);
  const auto H = approximant_field(u, w, 1e-8);
  const std::vector<double> xs = {0.5, 2.0};
  GridSpec grid{0.5, 2.0, 2, std::ldexp(1.0, -12), 1.0, 241};
  const double bloch = bloch_seminorm(H, flat_domain(), grid);
  for (double x : xs) {
    for (int k = 0; k < 12; ++k) {
      const double t1 = std::ldexp(1.0, -k), t2 = std::ldexp(1.0, -k - 1);
      EXPECT_LE(std::abs(H(x, t1) - H(x, t2)), bloch * std::numbers::ln2 * (1 + 1e-8)) << x << ' ' << k;
    }
  }
}

TEST(ErrorScan, Examples) {
  const std::vector<double> xs = {0.0, 1.0};
  const std::vector<double> th = {0.5, 0.1, 1e-3};
  const auto w = weights::w0();
  const auto zero = approximation_error_scan(constant_field(0.0), flat_domain(), w, xs, th);
  EXPECT_EQ(zero.sup, 0.0);
  const auto c = approximation_error_scan(constant_field(2.0), flat_domain(), w, xs, th);
  for (std::size_t i = 0; i < th.size(); ++i) EXPECT_NEAR(c.per_theta[i], 2.0 / w(th[i]), 1e-9);
  EXPECT_NEAR(c.sup, 2.0 / w(0.5), 1e-9);
}

TEST(TrendFree, RunningMedianRule) {
  EXPECT_TRUE(trend_free(std::vector<double>{1, 1.1, 0.9, 1.0, 1.15}));
  EXPECT_FALSE(trend_free(std::vector<double>{1, 2, 4, 8}));
  EXPECT_TRUE(trend_free(std::vector<double>{0, 0, 0}));
  EXPECT_TRUE(trend_free(std::vector<double>{0, 1e-12}, 1.2, 1e-9));
  EXPECT_TRUE(trend_free(std::vector<double>{}));
}

TEST(ThetaEps, Examples) {
  for (double alpha : {0.3, 0.5, 0.7}) {
    for (double eps : {1.0 / 16, 1e-3}) {
      const double got = theta_epsilon(make_data([](double t) { return t; }), alpha, eps, 0.1);
      EXPECT_NEAR(got, 2 * (1 - std::pow(eps, 1 - alpha)) / (1 - alpha), 1e-10);
      EXPECT_EQ(theta_epsilon(make_data([](double) { return 2.0; }), alpha, eps, 0.1), 0.0);
      EXPECT_NEAR(theta_epsilon(make_data([alpha](double t) { return std::pow(std::abs(t), alpha); }, {0.0}),
                                alpha, eps, 0.0),
                  0.0, 1e-15);
    }
  }
  EXPECT_THROW(theta_epsilon(make_data([](double t) { return t; }), 0.5, 0.5, 0.0), DomainError);
  EXPECT_THROW(theta_epsilon(make_data([](double t) { return t; }), 0.5, 0.0, 0.0), DomainError);
}

TEST(ThetaIdentity, Examples) {
  for (double alpha : {0.3, 0.5, 0.7}) {
    EXPECT_LT(theta_identity_residual(make_data([](double t) { return t; }), alpha, 1e-3, 0.2), 1e-8);
    EXPECT_EQ(theta_identity_residual(make_data([](double) { return 5.0; }), alpha, 1e-3, 0.2), 0.0);
    auto saw = make_data([](double t) {
      const double r = t - std::floor(t) - 0.5;
      return std::sqrt(r * r + 1e-4);
    }, {-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0});
    EXPECT_LT(theta_identity_residual(saw, alpha, std::ldexp(1.0, -8), 0.37), 1e-6);
  }
}

TEST(Profile, ConstantFieldRatioVanishes) {
  std::vector<double> levels;
  for (int k = 1; k <= 600; ++k) levels.push_back(std::ldexp(1.0, k));
  const auto p = lil_ratio_profile_levels(constant_field(1.5), flat_domain(), weights::w0(), 0.0, levels);
  ASSERT_EQ(p.ratios.size(), levels.size());
  for (std::size_t i = 0; i < levels.size(); ++i) {
    EXPECT_EQ(p.ratios[i].has_value(), levels[i] > kRatioGuard);
    EXPECT_NEAR(p.values[i], 1.5 * (1 - 1 / levels[i]), 1e-9);
  }
  EXPECT_LT(std::abs(*p.ratios.back()), 0.1);
  EXPECT_LT(std::abs(*p.ratios.back()), std::abs(*p.ratios[10]));
}

TEST(Profile, SyntheticFieldRatioGrows) {
  std::vector<double> levels;
  for (int k = 100; k <= 1000; k += 100) levels.push_back(std::ldexp(1.0, k));
  const auto p = lil_ratio_profile_levels(weight_field(weights::w0()), flat_domain(), weights::w0(), 0.0, levels);
  for (std::size_t i = 0; i < levels.size(); ++i) {
    EXPECT_NEAR(p.values[i], std::log(levels[i]), 1e-8 * std::log(levels[i]));
    EXPECT_NEAR(*p.ratios[i], std::sqrt(std::log(levels[i]) / std::log(std::log(std::log(levels[i])))), 1e-8);
    if (i) {
      EXPECT_GT(*p.ratios[i], *p.ratios[i - 1]);
    }
  }
  EXPECT_GT(p.max_abs_ratio(), 19.0);
}

TEST(Profile, DeltaGridAndCsv) {
  const auto w = weights::power(1.0);
  const std::vector<double> deltas = {0.5, 0.01, 1e-9};
  const auto p = lil_ratio_profile(lacunary_series(w, 6, {}, 1), flat_domain(), w, 0.3, deltas);
  EXPECT_FALSE(p.ratios[0].has_value());
  EXPECT_TRUE(p.ratios[1].has_value());
  std::ostringstream os;
  write_profile_csv(os, p);
  std::istringstream is(os.str());
  const auto table = read_csv(is);
  EXPECT_EQ(table.header, (std::vector<std::string>{"delta", "value", "ratio", "ratio_valid", "level"}));
  ASSERT_EQ(table.rows.size(), 3u);
  EXPECT_EQ(table.numeric("value")[2], p.values[2]);
  EXPECT_EQ(table.rows[0][3], "0");
  EXPECT_THROW(lil_ratio_profile(constant_field(1), flat_domain(), w, 0.0, std::vector<double>{0.1, 0.2}),
               DomainError);
}

TEST(StepBound, ConsecutiveScaleAverages) {
  const auto w = weights::power(0.5);
  const auto u = lacunary_series(w, 16, {}, 12);
  GridSpec grid{0, 2 * std::numbers::pi, 0, std::ldexp(1.0, -30), 4.0, 40, true, 8.0, 128};
  const double gn = growth_norm(u, flat_domain(), w, grid);
  const auto seq = scale_sequence(w, 14);
  for (double x : {0.1, 1.7, 5.0}) {
    for (int k = 0; k < 14; ++k) {
      const double d = weighted_average_I(u, flat_domain(), w, x, seq.s[k + 1]) -
                       weighted_average_I(u, flat_domain(), w, x, seq.s[k]);
      EXPECT_LE(std::abs(d), 2 * gn * (1 + 1e-6)) << k;
    }
  }
}

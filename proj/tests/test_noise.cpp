#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "retard/noise.hpp"

using namespace retard;

namespace {

double phi(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double ks_against_normal(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = phi(x[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

struct Moments {
  double mean = 0.0;
  double var = 0.0;
};

Moments moments(const std::vector<double>& x) {
  Moments m;
  for (double v : x) m.mean += v;
  m.mean /= static_cast<double>(x.size());
  for (double v : x) m.var += (v - m.mean) * (v - m.mean);
  m.var /= static_cast<double>(x.size() - 1);
  return m;
}

double empirical_cf(const std::vector<double>& x, double u) {
  // Symmetric law: the characteristic function is real.
  double acc = 0.0;
  for (double v : x) acc += std::cos(u * v);
  return acc / static_cast<double>(x.size());
}

}  // namespace

TEST(Stream, SameSeedAndReplicaRepeat) {
  Stream a(5, 3), b(5, 3), c(5, 4), d(6, 3);
  for (int i = 0; i < 10; ++i) {
    const double x = a.normal();
    EXPECT_EQ(x, b.normal());
    EXPECT_NE(x, c.normal());
    EXPECT_NE(x, d.normal());
  }
}

TEST(CompoundPoisson, MeanAndVarianceMatchMomentFormulas) {
  auto noise = NoiseSpec::compound_poisson(2.0, JumpLaw::exponential(1.0));
  Stream s(101, 0);
  auto x = sample_increments(noise, 1.0, 100000, s);
  auto m = moments(x);
  // mean = rate * E J, variance = rate * E J^2
  const double se = std::sqrt(4.0 / 1e5);
  EXPECT_NEAR(m.mean, 2.0, 3.0 * se);
  EXPECT_NEAR(m.var, 4.0, 0.05 * 4.0);
  EXPECT_DOUBLE_EQ(noise.mean_per_unit_time(), 2.0);
}

TEST(CompoundPoisson, ZeroIncrementsWithoutArrivals) {
  auto noise = NoiseSpec::compound_poisson(0.5, JumpLaw::normal(1.0));
  Stream s(3, 0);
  auto x = sample_increments(noise, 0.01, 20000, s);
  const auto zeros = std::count(x.begin(), x.end(), 0.0);
  // P(no arrival) = e^{-0.005}
  EXPECT_NEAR(static_cast<double>(zeros) / 20000.0, std::exp(-0.005), 0.003);
}

TEST(AlphaStable, GaussianCaseIsStandardNormal) {
  auto noise = NoiseSpec::alpha_stable(2.0, 1.0 / std::numbers::sqrt2);
  Stream s(7, 0);
  auto x = sample_increments(noise, 1.0, 100000, s);
  EXPECT_LT(ks_against_normal(x), 1.6276 / std::sqrt(1e5));
}

TEST(AlphaStable, CharacteristicFunctionAtThreeHalves) {
  const double scale = 0.8;
  auto noise = NoiseSpec::alpha_stable(1.5, scale);
  Stream s(9, 0);
  auto x = sample_increments(noise, 1.0, 200000, s);
  for (double u : {0.5, 1.0, 2.0}) {
    EXPECT_NEAR(empirical_cf(x, u), std::exp(-std::pow(scale * u, 1.5)), 0.01) << "u=" << u;
  }
}

TEST(AlphaStable, IncrementScalesWithStepPower) {
  const double dt = 0.25;
  auto noise = NoiseSpec::alpha_stable(1.5, 1.0);
  Stream s(10, 0);
  auto x = sample_increments(noise, dt, 200000, s);
  EXPECT_NEAR(empirical_cf(x, 1.5), std::exp(-dt * std::pow(1.5, 1.5)), 0.01);
}

TEST(AlphaStable, CauchyCase) {
  auto noise = NoiseSpec::alpha_stable(1.0, 1.0);
  Stream s(12, 0);
  auto x = sample_increments(noise, 1.0, 100000, s);
  EXPECT_NEAR(empirical_cf(x, 1.0), std::exp(-1.0), 0.01);
}

TEST(AlphaStable, RejectsIndexOutsideRange) {
  EXPECT_THROW(NoiseSpec::alpha_stable(2.5, 1.0), DomainError);
  EXPECT_THROW(NoiseSpec::alpha_stable(0.0, 1.0), DomainError);
}

TEST(Brownian, VarianceScalesWithStep) {
  Stream s(15, 0);
  auto x = sample_increments(NoiseSpec::brownian(), 0.01, 100000, s);
  EXPECT_NEAR(moments(x).var, 0.01, 0.0003);
}

TEST(BrownianPlusJumps, MeanIncludesDrift) {
  auto noise = NoiseSpec::brownian_plus_compound_poisson(0.3, 1.0, JumpLaw::exponential(2.0));
  EXPECT_DOUBLE_EQ(noise.mean_per_unit_time(), 2.3);
  Stream s(16, 0);
  auto m = moments(sample_increments(noise, 0.5, 100000, s));
  // variance per unit time: 1 + rate * E J^2 = 1 + 8
  EXPECT_NEAR(m.mean, 1.15, 3.0 * std::sqrt(4.5 / 1e5));
  EXPECT_NEAR(m.var, 4.5, 0.05 * 4.5);
}

TEST(MomentConditions, ParetoTails) {
  EXPECT_FALSE(JumpLaw::pareto(0.8, 1.0).finite_first_moment());
  EXPECT_TRUE(JumpLaw::pareto(1.5, 1.0).finite_first_moment());
  EXPECT_FALSE(JumpLaw::pareto(1.5, 1.0).finite_second_moment());
  EXPECT_TRUE(JumpLaw::pareto(2.5, 1.0).finite_second_moment());
  EXPECT_DOUBLE_EQ(JumpLaw::pareto(3.0, 2.0).first_moment(), 3.0);
  EXPECT_DOUBLE_EQ(JumpLaw::pareto(3.0, 2.0).second_moment(), 12.0);
}

TEST(MomentConditions, NoiseLevel) {
  EXPECT_TRUE(NoiseSpec::brownian().second_moment_condition());
  EXPECT_TRUE(NoiseSpec::alpha_stable(1.5, 1.0).first_moment_condition());
  EXPECT_FALSE(NoiseSpec::alpha_stable(1.5, 1.0).second_moment_condition());
  EXPECT_FALSE(NoiseSpec::alpha_stable(0.9, 1.0).first_moment_condition());
  EXPECT_TRUE(NoiseSpec::compound_poisson(1.0, JumpLaw::exponential(1.0)).second_moment_condition());
  EXPECT_FALSE(
      NoiseSpec::compound_poisson(1.0, JumpLaw::pareto(1.5, 1.0)).second_moment_condition());
}

TEST(Pareto, SampleMeanMatches) {
  auto law = JumpLaw::pareto(4.0, 1.0);
  Stream s(21, 0);
  double acc = 0.0;
  for (int i = 0; i < 100000; ++i) acc += law.sample(s);
  EXPECT_NEAR(acc / 1e5, law.first_moment(), 0.01);
}

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "retard/measures.hpp"

using namespace retard;

namespace {

// Hand-rolled generators for the property tests.
SignedMeasure random_measure(std::mt19937_64& g, double tau) {
  std::uniform_real_distribution<double> loc(-tau, 0.0), w(-2.0, 2.0);
  std::uniform_int_distribution<int> count(0, 4);
  std::vector<Atom> atoms;
  const int na = count(g);
  for (int k = 0; k < na; ++k) {
    double th = loc(g);
    bool clash = false;
    for (const auto& a : atoms) clash = clash || std::abs(a.theta - th) < 1e-6;
    if (!clash) atoms.push_back({th, w(g)});
  }
  std::vector<DensityPiece> dens;
  if (count(g) % 2 == 0) {
    double a = loc(g), b = loc(g);
    if (a > b) std::swap(a, b);
    if (b - a > 1e-3) dens.push_back({a, b, w(g)});
  }
  return SignedMeasure(tau, atoms, dens);
}

Segment random_segment(std::mt19937_64& g, double tau, std::size_t n) {
  std::normal_distribution<double> z;
  std::vector<double> v(n + 1);
  for (auto& x : v) x = z(g);
  return Segment(tau, v);
}

}  // namespace

TEST(TotalVariation, UnitAtom) {
  EXPECT_DOUBLE_EQ(total_variation(SignedMeasure::dirac(1.0, 0.0)), 1.0);
}

TEST(TotalVariation, SumOfAbsoluteWeights) {
  SignedMeasure m(1.0, {{0.0, -1.0}, {-1.0, 0.5}});
  EXPECT_DOUBLE_EQ(total_variation(m), 1.5);
}

TEST(TotalVariation, NeutralCoefficientBelowHalf) {
  auto rho = SignedMeasure::dirac(1.0, -1.0, -1.0 / 3.0);
  EXPECT_NEAR(total_variation(rho), 1.0 / 3.0, 1e-15);
  EXPECT_LT(total_variation(rho), 0.5);
}

TEST(TotalVariation, DensityMass) {
  SignedMeasure m(2.0, {}, {{-2.0, -0.5, -0.4}});
  EXPECT_NEAR(total_variation(m), 0.6, 1e-15);
}

TEST(SignedMeasure, RejectsAtomsOutsideHorizon) {
  EXPECT_THROW(SignedMeasure::dirac(1.0, -1.5), DomainError);
  EXPECT_THROW(SignedMeasure::dirac(1.0, 0.2), DomainError);
}

TEST(SignedMeasure, RejectsRepeatedLocations) {
  EXPECT_THROW(SignedMeasure(1.0, {{-0.5, 1.0}, {-0.5, 2.0}}), DomainError);
}

TEST(SignedMeasure, RejectsOverlappingDensity) {
  EXPECT_THROW(SignedMeasure(1.0, {}, {{-1.0, -0.2, 1.0}, {-0.5, 0.0, 1.0}}), DomainError);
}

TEST(IntegrateAgainst, ConstantPath) {
  auto m = SignedMeasure::dirac(1.0, -1.0);
  EXPECT_DOUBLE_EQ(integrate_against(m, Segment::constant(1.0, 10, 3.0)), 3.0);
  EXPECT_DOUBLE_EQ(integrate_against(m, [](double) { return 3.0; }, 10), 3.0);
}

TEST(IntegrateAgainst, TwoAtomsOnIdentity) {
  SignedMeasure m(1.0, {{0.0, 1.0}, {-1.0, 2.0}});
  EXPECT_DOUBLE_EQ(integrate_against(m, Segment::linear(1.0, 10, 0.0, 1.0)), -2.0);
  EXPECT_DOUBLE_EQ(integrate_against(m, [](double th) { return th; }, 10), -2.0);
}

TEST(IntegrateAgainst, LebesgueOnIdentity) {
  auto m = SignedMeasure::lebesgue(1.0);
  EXPECT_NEAR(integrate_against(m, Segment::linear(1.0, 100, 0.0, 1.0)), -0.5, 1e-12);
  EXPECT_NEAR(integrate_against(m, [](double th) { return th; }, 100), -0.5, 1e-12);
}

TEST(IntegrateAgainst, OffGridAtomInterpolates) {
  auto m = SignedMeasure::dirac(1.0, -0.25, 2.0);
  auto s = Segment::linear(1.0, 2, 1.0, 4.0);
  EXPECT_NEAR(integrate_against(m, s), 2.0 * (1.0 - 1.0), 1e-14);
}

TEST(IntegrateAgainst, PartialDensityMatchesExactIntegral) {
  // int_{-0.7}^{-0.2} theta^2 * 3 dtheta
  SignedMeasure m(1.0, {}, {{-0.7, -0.2, 3.0}});
  const double exact = (std::pow(0.7, 3) - std::pow(0.2, 3));
  auto s = Segment::from_function(1.0, 2000, [](double th) { return th * th; });
  EXPECT_NEAR(integrate_against(m, s), exact, 1e-6);
}

TEST(IntegrateAgainst, SupportBeyondSegmentThrows) {
  auto m = SignedMeasure::dirac(2.0, -2.0);
  EXPECT_THROW(integrate_against(m, Segment::constant(1.0, 10, 1.0)), DomainError);
}

TEST(SegmentEval, ConstantSegment) {
  auto s = Segment::constant(1.0, 8, 2.0);
  for (double th : {-1.0, -0.61, -0.3, 0.0}) EXPECT_DOUBLE_EQ(segment_eval(s, th), 2.0);
  EXPECT_DOUBLE_EQ(segment_sup_norm(s), 2.0);
}

TEST(SegmentEval, MidpointOfTwoValues) {
  Segment s(1.0, {-1.0, 1.0});
  EXPECT_DOUBLE_EQ(segment_eval(s, -0.5), 0.0);
}

TEST(SegmentEval, SampledSine) {
  auto s = Segment::sine(1.0, 100, 1.0, std::numbers::pi);
  EXPECT_NEAR(segment_eval(s, -0.25), std::sin(-std::numbers::pi / 4), 1e-3);
  EXPECT_NEAR(segment_eval(s, -0.253), std::sin(-0.253 * std::numbers::pi), 1e-3);
}

TEST(SegmentEval, OutsideHorizonThrows) {
  auto s = Segment::constant(1.0, 4, 1.0);
  EXPECT_THROW(segment_eval(s, -1.1), DomainError);
  EXPECT_THROW(segment_eval(s, 0.1), DomainError);
}

TEST(Segment, MissingDerivativeThrows) {
  Segment s(1.0, {1.0, 2.0, 3.0});
  EXPECT_FALSE(s.has_derivative());
  EXPECT_THROW(s.derivative_values(), MissingDerivative);
}

TEST(StepsPerHorizon, DividesOrThrows) {
  EXPECT_EQ(steps_per_horizon(1.0, 0.01), 100u);
  EXPECT_EQ(steps_per_horizon(2.0, 0.5), 4u);
  EXPECT_THROW(steps_per_horizon(1.0, 0.3), DomainError);
}

TEST(MeasureProperties, BoundedByVariationTimesSup) {
  std::mt19937_64 g(7);
  for (int trial = 0; trial < 300; ++trial) {
    const double tau = 0.5 + 2.0 * std::uniform_real_distribution<double>()(g);
    auto m = random_measure(g, tau);
    auto s = random_segment(g, tau, 64);
    EXPECT_LE(std::abs(integrate_against(m, s)),
              total_variation(m) * segment_sup_norm(s) * (1.0 + 1e-12) + 1e-14);
  }
}

TEST(MeasureProperties, LinearInPath) {
  std::mt19937_64 g(11);
  std::normal_distribution<double> z;
  for (int trial = 0; trial < 200; ++trial) {
    auto m = random_measure(g, 1.0);
    auto f = random_segment(g, 1.0, 40);
    auto h = random_segment(g, 1.0, 40);
    const double a = z(g), b = z(g);
    std::vector<double> mix(41);
    for (std::size_t i = 0; i <= 40; ++i) mix[i] = a * f.values()[i] + b * h.values()[i];
    const double lhs = integrate_against(m, Segment(1.0, mix));
    const double rhs = a * integrate_against(m, f) + b * integrate_against(m, h);
    EXPECT_NEAR(lhs, rhs, 1e-11 * (1.0 + std::abs(rhs)));
  }
}

TEST(MeasureProperties, ExactAtGridPointsAndSupIsMaxAbs) {
  std::mt19937_64 g(13);
  for (int trial = 0; trial < 50; ++trial) {
    auto s = random_segment(g, 1.5, 30);
    double mx = 0.0;
    for (std::size_t i = 0; i <= 30; ++i) {
      EXPECT_EQ(segment_eval(s, s.theta(i)), s.values()[i]);
      mx = std::max(mx, std::abs(s.values()[i]));
    }
    EXPECT_EQ(segment_sup_norm(s), mx);
  }
}

TEST(MeasureProperties, StencilMatchesDirectAtoms) {
  std::mt19937_64 g(17);
  for (int trial = 0; trial < 100; ++trial) {
    auto m = random_measure(g, 1.0);
    // Linear paths are reproduced exactly by the interpolant.
    auto s = Segment::linear(1.0, 50, 0.3, -1.7);
    const double direct = integrate_against(m, [](double th) { return 0.3 - 1.7 * th; }, 50);
    EXPECT_NEAR(integrate_against(m, s), direct, 1e-11);
  }
}

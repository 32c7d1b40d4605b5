#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "retard/simulate.hpp"
#include "retard/voc.hpp"

using namespace retard;

namespace {

const SignedMeasure kUnitDelay = SignedMeasure::dirac(1.0, -1.0, -1.0);

ModelSpec eq_a3() {
  return ModelSpec::retarded_diffusion(kUnitDelay, DiffusionFunctional::affine_endpoint(0.0, 0.1, 1.0));
}

ModelSpec neutral_example(double a) {
  return ModelSpec::neutral_diffusion(kUnitDelay, SignedMeasure::dirac(1.0, -1.0, -1.0 / 3.0),
                                      DiffusionFunctional::affine_integral(a));
}

Segment cosine(std::size_t n) {
  return Segment::sine(1.0, n, 1.0, std::numbers::pi, std::numbers::pi / 2);
}

// Sample E X(t)^p over replicas on a common time grid.
std::vector<double> sample_moment(const ModelSpec& m, const Segment& xi, double T, double dt,
                                  std::size_t replicas, std::uint64_t seed, int p) {
  std::vector<double> acc;
  for (std::size_t k = 0; k < replicas; ++k) {
    auto path = simulate(m, xi, T, dt, seed, k);
    auto fw = path.forward();
    if (acc.empty()) acc.assign(fw.size(), 0.0);
    for (std::size_t i = 0; i < fw.size(); ++i) acc[i] += std::pow(std::abs(fw[i]), p);
  }
  for (auto& v : acc) v /= static_cast<double>(replicas);
  return acc;
}

double max_over(const std::vector<double>& v, std::size_t lo, std::size_t hi) {
  return *std::max_element(v.begin() + static_cast<long>(lo), v.begin() + static_cast<long>(hi));
}

}  // namespace

TEST(Simulate, BitIdenticalForSameInputs) {
  auto xi = Segment::constant(1.0, 100, 1.0);
  auto a = simulate(eq_a3(), xi, 10.0, 0.01, 77, 5);
  auto b = simulate(eq_a3(), xi, 10.0, 0.01, 77, 5);
  EXPECT_EQ(a.values, b.values);
  auto c = simulate(eq_a3(), xi, 10.0, 0.01, 77, 6);
  EXPECT_NE(a.values, c.values);
}

TEST(Simulate, InitialSegmentIsCopied) {
  auto xi = cosine(100);
  auto path = simulate(eq_a3(), xi, 1.0, 0.01, 1);
  for (long i = -100; i <= 0; ++i) {
    EXPECT_EQ(path[i], xi.values()[static_cast<std::size_t>(i + 100)]);
  }
  EXPECT_EQ(path.steps(), 100u);
}

TEST(Simulate, ReplicaStreamsIgnoreOrder) {
  auto xi = Segment::constant(1.0, 50, 1.0);
  auto batch = simulate_replicas(eq_a3(), xi, 5.0, 0.02, 6, 9, 3);
  for (std::size_t k = 6; k-- > 0;) {
    auto alone = simulate(eq_a3(), xi, 5.0, 0.02, 9, 3 + k);
    EXPECT_EQ(batch[k].values, alone.values);
    EXPECT_EQ(batch[k].replica, 3 + k);
  }
}

TEST(Neutral, EmptyRhoMatchesRetardedStreamForStream) {
  auto sigma = DiffusionFunctional::affine_endpoint(0.2, 0.1, 1.0);
  auto ret = ModelSpec::retarded_diffusion(kUnitDelay, sigma);
  auto neu = ModelSpec::neutral_diffusion(kUnitDelay, SignedMeasure::zero(1.0), sigma);
  auto xi = cosine(100);
  EXPECT_EQ(euler_retarded(ret, xi, 8.0, 0.01, 4).values, euler_neutral(neu, xi, 8.0, 0.01, 4).values);
}

TEST(Simulate, ZeroNoiseMatchesVariationOfConstants) {
  // Explicit Euler is first order: the gap halves with dt.
  auto model = ModelSpec::retarded_diffusion(kUnitDelay, DiffusionFunctional::constant(0.0));
  auto gap = [&](double dt) {
    const auto n = static_cast<std::size_t>(std::lround(1.0 / dt));
    auto xi = Segment::constant(1.0, n, 1.0);
    auto path = euler_retarded(model, xi, 5.0, dt, 1);
    VocContext ctx(fundamental_retarded(kUnitDelay, 5.0, dt), kUnitDelay, std::nullopt, xi);
    double e = 0.0;
    for (long i = 0; i <= static_cast<long>(5 * n); ++i) {
      e = std::max(e, std::abs(path[i] - voc_deterministic(ctx, static_cast<double>(i) * dt)));
    }
    return e;
  };
  const double coarse = gap(1e-3), fine = gap(5e-4);
  EXPECT_LT(fine, 5e-4);
  EXPECT_LT(coarse, 1e-3);
  EXPECT_NEAR(coarse / fine, 2.0, 0.2);
}

TEST(Simulate, ZeroIncrementsGiveDeterministicPath) {
  auto xi = cosine(100);
  std::vector<double> zeros(300, 0.0);
  auto forced = simulate_path(eq_a3(), xi, 3.0, 0.01, zeros);
  auto quiet = ModelSpec::retarded_diffusion(kUnitDelay, DiffusionFunctional::constant(0.0));
  EXPECT_EQ(forced.values, simulate(quiet, xi, 3.0, 0.01, 123).values);
}

TEST(Neutral, ZeroNoiseMatchesNeutralRepresentation) {
  const double dt = 1e-3;
  auto model = neutral_example(0.0);
  auto xi = cosine(1000);
  auto path = euler_neutral(model, xi, 5.0, dt, 1);
  VocContext ctx(fundamental_neutral(*model.rho, kUnitDelay, 5.0, dt), kUnitDelay, model.rho, xi);
  for (double t : {0.5, 1.0, 2.0, 3.3, 5.0}) {
    EXPECT_NEAR(path.at(t), voc_neutral_deterministic(ctx, t), 1e-3) << "t=" << t;
  }
}

TEST(Neutral, InstantMassNeedsContraction) {
  auto model = ModelSpec::neutral_diffusion(kUnitDelay, SignedMeasure::dirac(1.0, 0.0, 0.3),
                                            DiffusionFunctional::constant(0.0));
  auto path = simulate(model, Segment::constant(1.0, 100, 1.0), 2.0, 0.01, 1);
  // (1 - 0.3) x' = -x(t-1) on [0,1] with x = 1 before
  EXPECT_NEAR(path.at(1.0), 1.0 - 1.0 / 0.7, 1e-9);
}

TEST(OrnsteinUhlenbeck, StationaryVariance) {
  auto model = ModelSpec::retarded_diffusion(SignedMeasure::dirac(1.0, 0.0, -1.0),
                                             DiffusionFunctional::constant(1.0));
  auto xi = Segment::constant(1.0, 100, 0.0);
  const std::size_t R = 10000;
  std::vector<double> terminal(R);
  parallel_for(R, [&](std::size_t k) { terminal[k] = simulate(model, xi, 50.0, 0.01, 31, k).at(50.0); });
  double mean = 0.0, var = 0.0;
  for (double x : terminal) mean += x;
  mean /= R;
  for (double x : terminal) var += (x - mean) * (x - mean);
  var /= R - 1;
  EXPECT_NEAR(var, 0.5, 0.025);
}

TEST(RetardedDiffusion, SmallLipschitzKeepsSecondMomentBounded) {
  auto m2 = sample_moment(eq_a3(), Segment::constant(1.0, 100, 1.0), 50.0, 0.01, 300, 5, 2);
  ASSERT_TRUE(std::all_of(m2.begin(), m2.end(), [](double v) { return std::isfinite(v); }));
  EXPECT_LE(max_over(m2, 2500, 5001), max_over(m2, 0, 2500));
}

TEST(Neutral, SmallIntegralDiffusionKeepsSecondMomentBounded) {
  auto m2 = sample_moment(neutral_example(0.05), cosine(100), 50.0, 0.01, 1000, 6, 2);
  ASSERT_TRUE(std::all_of(m2.begin(), m2.end(), [](double v) { return std::isfinite(v); }));
  EXPECT_LE(max_over(m2, 2500, 5001), max_over(m2, 0, 2500));
}

TEST(StrongConvergence, ErrorShrinksAtLeastLikeSquareRoot) {
  // Coarse paths reuse the reference path's Brownian increments.
  const double T = 5.0, fine = 1e-4;
  const std::size_t Nf = 50000;
  double err[2] = {0.0, 0.0};
  const double coarse[2] = {1e-2, 1e-3};
  const int reps = 10;
  for (int rep = 0; rep < reps; ++rep) {
    auto dw = model_increments(eq_a3(), fine, Nf, 808, static_cast<std::uint64_t>(rep));
    auto ref = simulate_path(eq_a3(), Segment::constant(1.0, 10000, 1.0), T, fine, dw);
    for (int c = 0; c < 2; ++c) {
      const std::size_t k = static_cast<std::size_t>(std::lround(coarse[c] / fine));
      std::vector<double> agg(Nf / k, 0.0);
      for (std::size_t i = 0; i < Nf; ++i) agg[i / k] += dw[i];
      auto path = simulate_path(eq_a3(), Segment::constant(1.0, 10000 / k, 1.0), T, coarse[c], agg);
      double e = 0.0;
      for (std::size_t i = 0; i <= Nf / k; ++i) {
        e = std::max(e, std::abs(path[static_cast<long>(i)] - ref[static_cast<long>(i * k)]));
      }
      err[c] += e / reps;
    }
  }
  EXPECT_GT(err[0], err[1]);
  EXPECT_GE(std::log10(err[0] / err[1]), 0.4);
}

TEST(LevyMultiplicative, SigmaIsPredictable) {
  auto model = ModelSpec::levy_multiplicative(kUnitDelay, DiffusionFunctional::affine_endpoint(0.5, 0.1, 0.0),
                                              NoiseSpec::compound_poisson(1.0, JumpLaw::exponential(1.0)));
  const double dt = 0.01;
  auto xi = Segment::constant(1.0, 100, 1.0);
  auto dz = model_increments(model, dt, 1000, 12, 0);
  const auto k = static_cast<std::size_t>(
      std::find_if(dz.begin() + 200, dz.end(), [](double v) { return v != 0.0; }) - dz.begin());
  ASSERT_LT(k, dz.size());
  std::vector<double> g0, g1;
  simulate_path(model, xi, 10.0, dt, dz, &g0);
  dz[k] = 0.0;
  simulate_path(model, xi, 10.0, dt, dz, &g1);
  for (std::size_t i = 0; i <= k; ++i) EXPECT_EQ(g0[i], g1[i]);
  EXPECT_NE(g0[k + 1], g1[k + 1]);
}

TEST(LevyOu, CompoundPoissonLongRunMean) {
  auto model = ModelSpec::levy_ou(kUnitDelay, NoiseSpec::compound_poisson(1.0, JumpLaw::exponential(1.0)));
  auto xi = Segment::constant(1.0, 100, 0.0);
  const std::size_t R = 2000;
  std::vector<double> late(R, 0.0), running(R, 0.0);
  parallel_for(R, [&](std::size_t k) {
    auto p = euler_levy_ou(model, xi, 200.0, 0.01, 41, k);
    double acc = 0.0;
    for (long i = 10000; i <= 20000; ++i) acc += p[i];
    late[k] = acc / 10001.0;
  });
  double mean = 0.0;
  for (double v : late) mean += v;
  mean /= R;
  EXPECT_NEAR(mean, 1.0, 0.05);
}

TEST(LevyOu, FirstMomentStaysBounded) {
  auto model = ModelSpec::levy_ou(kUnitDelay, NoiseSpec::compound_poisson(1.0, JumpLaw::exponential(1.0)));
  auto m1 = sample_moment(model, Segment::constant(1.0, 50, 0.0), 100.0, 0.02, 400, 8, 1);
  EXPECT_LE(max_over(m1, 2500, 5001), 1.1 * max_over(m1, 0, 2500));
}

TEST(LevyMultiplicative, BoundedSigmaWithStableNoise) {
  auto model = ModelSpec::levy_multiplicative(kUnitDelay, DiffusionFunctional::bounded_saturating(1.0, 1.0),
                                              NoiseSpec::alpha_stable(1.5, 1.0));
  auto m1 = sample_moment(model, Segment::constant(1.0, 50, 1.0), 100.0, 0.02, 400, 9, 1);
  ASSERT_TRUE(std::all_of(m1.begin(), m1.end(), [](double v) { return std::isfinite(v); }));
  EXPECT_LE(max_over(m1, 2500, 5001), 2.0 * max_over(m1, 0, 2500));
}

TEST(LevyMultiplicative, SecondMomentBoundedUnderJumpDiffusion) {
  auto model = ModelSpec::levy_multiplicative(
      kUnitDelay, DiffusionFunctional::affine_endpoint(0.0, 0.1, 1.0),
      NoiseSpec::brownian_plus_compound_poisson(0.0, 1.0, JumpLaw::normal(1.0)));
  auto m2 = sample_moment(model, Segment::constant(1.0, 50, 1.0), 60.0, 0.02, 400, 10, 2);
  EXPECT_LE(max_over(m2, 1500, 3001), max_over(m2, 0, 1500));
}

TEST(ModelSpec, Validation) {
  auto sigma = DiffusionFunctional::constant(1.0);
  EXPECT_THROW(ModelSpec::levy_ou(kUnitDelay, NoiseSpec::compound_poisson(1.0, JumpLaw::pareto(0.8, 1.0))),
               DomainError);
  EXPECT_NO_THROW(ModelSpec::levy_ou(kUnitDelay, NoiseSpec::compound_poisson(1.0, JumpLaw::pareto(1.5, 1.0))));
  EXPECT_THROW(ModelSpec::levy_multiplicative(kUnitDelay, DiffusionFunctional::affine_endpoint(0.0, 0.1, 1.0),
                                              NoiseSpec::alpha_stable(1.5, 1.0)),
               DomainError);
  EXPECT_NO_THROW(ModelSpec::levy_multiplicative(kUnitDelay, DiffusionFunctional::bounded_saturating(1.0, 1.0),
                                                 NoiseSpec::alpha_stable(1.5, 1.0)));
  EXPECT_THROW(ModelSpec::neutral_diffusion(kUnitDelay, SignedMeasure::dirac(1.0, -1.0, 1.0), sigma),
               DomainError);
  ModelSpec bad = ModelSpec::retarded_diffusion(kUnitDelay, sigma);
  bad.rho = SignedMeasure::dirac(1.0, -1.0, 0.2);
  EXPECT_THROW(bad.validate(), DomainError);
}

TEST(Simulate, RejectsMisalignedInitialSegment) {
  EXPECT_THROW(simulate(eq_a3(), Segment::constant(1.0, 50, 1.0), 1.0, 0.01, 1), DomainError);
  EXPECT_THROW(simulate(eq_a3(), Segment::constant(2.0, 200, 1.0), 1.0, 0.01, 1), DomainError);
  EXPECT_THROW(simulate(eq_a3(), Segment::constant(1.0, 100, 1.0), 1.0, 0.03, 1), DomainError);
}

TEST(Simulate, KindSpecificEntryPointsCheckKind) {
  auto xi = Segment::constant(1.0, 100, 1.0);
  EXPECT_THROW(euler_neutral(eq_a3(), xi, 1.0, 0.01, 1), DomainError);
  EXPECT_THROW(euler_levy_ou(eq_a3(), xi, 1.0, 0.01, 1), DomainError);
}

TEST(DiffusionFunctional, DeclaredLipschitzConstants) {
  EXPECT_EQ(DiffusionFunctional::constant(3.0).lipschitz(1.0), 0.0);
  EXPECT_DOUBLE_EQ(DiffusionFunctional::affine_endpoint(1.0, 0.1, 1.0).lipschitz(1.0), 0.01);
  EXPECT_DOUBLE_EQ(DiffusionFunctional::affine_integral(0.05).lipschitz(2.0), 0.005);
  EXPECT_EQ(DiffusionFunctional::bounded_saturating(2.0, 1.0).lipschitz(1.0), 1.0);
}

TEST(DiffusionFunctional, LipschitzBoundHoldsOnRandomSegments) {
  std::mt19937_64 g(99);
  std::normal_distribution<double> z;
  const std::vector<DiffusionFunctional> forms{
      DiffusionFunctional::affine_endpoint(0.3, -0.7, 0.5), DiffusionFunctional::affine_integral(0.4),
      DiffusionFunctional::bounded_saturating(0.5, 1.0)};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(21), b(21);
    for (auto& v : a) v = z(g);
    for (auto& v : b) v = z(g);
    Segment sa(1.0, a), sb(1.0, b);
    for (const auto& f : forms) {
      std::vector<double> d(21);
      for (std::size_t i = 0; i < 21; ++i) d[i] = (a[i] - b[i]) * (a[i] - b[i]);
      const double norm = f.form == DiffusionForm::affine_integral
                              ? integrate_against(SignedMeasure::lebesgue(1.0), Segment(1.0, d))
                              : segment_eval(Segment(1.0, d), -f.lag);
      const double diff = f(sa) - f(sb);
      EXPECT_LE(diff * diff, f.lipschitz(1.0) * norm * (1.0 + 1e-12) + 1e-14);
    }
  }
}

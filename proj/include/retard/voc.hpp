#pragma once

// Solutions rebuilt from the fundamental solution: the deterministic part
// r(t)xi(0) + int int r(t+theta-s) xi(s) ds mu(dtheta), its neutral analogue,
// and the Ito convolution sum r(t - t_i) g_i dZ_i.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "retard/errors.hpp"
#include "retard/fundsol.hpp"
#include "retard/measures.hpp"
#include "retard/simulate.hpp"

namespace retard {

class VocContext {
 public:
  VocContext(FundamentalSolution r, SignedMeasure mu, std::optional<SignedMeasure> rho, Segment xi)
      : r_(std::move(r)), mu_(std::move(mu)), rho_(std::move(rho)), xi_(std::move(xi)) {
    const double tol = kGridTolerance * std::max(1.0, r_.tau());
    if (std::abs(xi_.tau() - r_.tau()) > tol) throw DomainError("segment and fundamental solution differ in tau");
    if (xi_.intervals() != r_.lag_steps()) throw DomainError("segment and fundamental solution differ in dt");
    mu_stencil_ = make_stencil(mu_, r_.dt());
    if (rho_) rho_stencil_ = make_stencil(*rho_, r_.dt());
    if (mu_stencil_.max_lag() > r_.lag_steps() || rho_stencil_.max_lag() > r_.lag_steps()) {
      throw DomainError("measure support exceeds the delay horizon");
    }
  }

  const FundamentalSolution& r() const { return r_; }
  const SignedMeasure& mu() const { return mu_; }
  const std::optional<SignedMeasure>& rho() const { return rho_; }
  const Segment& xi() const { return xi_; }
  const GridStencil& mu_stencil() const { return mu_stencil_; }
  const GridStencil& rho_stencil() const { return rho_stencil_; }

  // Grid index of t, checked against the horizon of r.
  long step_of(double t) const {
    if (t < -kGridTolerance || t > r_.horizon() * (1.0 + kGridTolerance)) {
      throw DomainError("t outside [0, T] of the fundamental solution");
    }
    return r_.index_of(t);
  }

 private:
  FundamentalSolution r_;
  SignedMeasure mu_;
  std::optional<SignedMeasure> rho_;
  Segment xi_;
  GridStencil mu_stencil_;
  GridStencil rho_stencil_;
};

namespace detail {

// int_{-l dt}^0 r(t_m - l dt - s) f(s) ds by trapezoid panels. Each panel uses
// the right limit of r at its lower argument and the left limit at its upper
// one, so jumps of r on grid points are integrated exactly.
inline double inner_panel_sum(const FundamentalSolution& r, long m, std::size_t lag,
                              const std::vector<double>& f) {
  const std::size_t n = f.size() - 1;
  const long l = static_cast<long>(lag);
  double acc = 0.0;
  for (long q = 0; q < l; ++q) {
    const long u_lo = m - l + q;  // argument at s = -q dt
    const double a = r[u_lo] * f[n - static_cast<std::size_t>(q)];
    const double b = r.left_limit(u_lo + 1) * f[n - static_cast<std::size_t>(q) - 1];
    acc += a + b;
  }
  return 0.5 * r.dt() * acc;
}

inline double kernel_term(const FundamentalSolution& r, const GridStencil& s, long m,
                          const std::vector<double>& f) {
  double acc = 0.0;
  for (const auto& t : s.taps()) {
    if (t.lag > 0) acc += t.weight * inner_panel_sum(r, m, t.lag, f);
  }
  return acc;
}

}  // namespace detail

inline double voc_deterministic(const VocContext& ctx, double t) {
  const long m = ctx.step_of(t);
  const auto& xi = ctx.xi().values();
  return ctx.r()[m] * xi.back() + detail::kernel_term(ctx.r(), ctx.mu_stencil(), m, xi);
}

inline double voc_neutral_deterministic(const VocContext& ctx, double t) {
  if (!ctx.rho()) throw DomainError("neutral representation needs rho");
  const auto& dxi = ctx.xi().derivative_values();
  const long m = ctx.step_of(t);
  const auto& xi = ctx.xi().values();
  const auto& r = ctx.r();
  double rho_r = 0.0;
  for (const auto& tap : ctx.rho_stencil().taps()) rho_r += tap.weight * r[m - static_cast<long>(tap.lag)];
  return r[m] * xi.back() - rho_r * xi.back() + detail::kernel_term(r, ctx.mu_stencil(), m, xi) +
         detail::kernel_term(r, ctx.rho_stencil(), m, dxi);
}

// Left-endpoint sum over t_i < t of r(t - t_i) g_i dZ_i.
inline double stochastic_convolution(const FundamentalSolution& r, std::span<const double> integrand,
                                     std::span<const double> increments, double t) {
  if (integrand.size() != increments.size()) {
    throw DomainError("integrand and increments differ in length");
  }
  const long m = r.index_of(t);
  if (m < 0 || static_cast<std::size_t>(m) > increments.size()) {
    throw DomainError("t lies beyond the supplied increments");
  }
  if (m > static_cast<long>(r.steps())) throw DomainError("t lies beyond the fundamental solution");
  double acc = 0.0;
  for (long i = 0; i < m; ++i) {
    acc += r[m - i] * integrand[static_cast<std::size_t>(i)] * increments[static_cast<std::size_t>(i)];
  }
  return acc;
}

struct IdentityGap {
  double rms = 0.0;
  double max_abs = 0.0;
  std::vector<double> euler;
  std::vector<double> rebuilt;
};

// Simulates the model by Euler-Maruyama, then rebuilds every grid value on
// [0, T] from the fundamental solution with the same increments and the
// simulated sigma(X_{t_i}).
inline IdentityGap voc_identity_gap(const ModelSpec& model, const Segment& xi, double T, double dt,
                                    std::uint64_t seed, std::uint64_t replica = 0) {
  const std::size_t N = detail::horizon_steps(T, dt);
  const auto dz = model_increments(model, dt, N, seed, replica);
  std::vector<double> g;
  const auto path = simulate_path(model, xi, T, dt, dz, &g);
  if (model.kind == ModelKind::levy_ou) g.assign(N, 1.0);

  const double tau = model.tau();
  const SignedMeasure rho = model.rho ? *model.rho : SignedMeasure::zero(tau);
  auto r = detail::integrate_fundamental(rho, model.mu, T, dt);
  const bool neutral = model.kind == ModelKind::neutral_diffusion;
  VocContext ctx(std::move(r), model.mu, model.rho, xi);

  IdentityGap out;
  out.euler.assign(path.forward().begin(), path.forward().end());
  out.rebuilt.resize(N + 1);
  double ss = 0.0;
  for (std::size_t m = 0; m <= N; ++m) {
    const double t = static_cast<double>(m) * dt;
    const double det = neutral ? voc_neutral_deterministic(ctx, t) : voc_deterministic(ctx, t);
    out.rebuilt[m] = det + stochastic_convolution(ctx.r(), g, dz, t);
    const double d = out.rebuilt[m] - out.euler[m];
    ss += d * d;
    out.max_abs = std::max(out.max_abs, std::abs(d));
  }
  out.rms = std::sqrt(ss / static_cast<double>(N + 1));
  return out;
}

}  // namespace retard

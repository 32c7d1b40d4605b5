#pragma once

// Fundamental solutions of linear retarded and neutral delay equations by the
// method of steps, plus an exponential envelope fit |r(t)| <= c e^{gamma t}.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "retard/errors.hpp"
#include "retard/measures.hpp"

namespace retard {

// Grid values r(t_i), t_i = i*dt for i = -n..N with n = tau/dt. Grid values
// are right limits; left limits are kept alongside because r jumps at 0 (and,
// for neutral equations, at multiples of the delays).
class FundamentalSolution {
 public:
  FundamentalSolution(double tau, double dt, std::size_t steps, std::vector<double> right,
                      std::vector<double> left)
      : tau_(tau),
        dt_(dt),
        lag_steps_(steps_per_horizon(tau, dt)),
        steps_(steps),
        right_(std::move(right)),
        left_(std::move(left)) {
    if (right_.size() != lag_steps_ + steps_ + 1 || left_.size() != right_.size()) {
      throw DomainError("fundamental solution storage has the wrong length");
    }
  }

  double tau() const { return tau_; }
  double dt() const { return dt_; }
  double horizon() const { return static_cast<double>(steps_) * dt_; }
  std::size_t lag_steps() const { return lag_steps_; }
  std::size_t steps() const { return steps_; }

  // r(t_i), right limit; zero for i < 0.
  double operator[](long i) const {
    if (i < -static_cast<long>(lag_steps_)) return 0.0;
    return right_.at(static_cast<std::size_t>(i + static_cast<long>(lag_steps_)));
  }

  double left_limit(long i) const {
    if (i < -static_cast<long>(lag_steps_)) return 0.0;
    return left_.at(static_cast<std::size_t>(i + static_cast<long>(lag_steps_)));
  }

  long index_of(double t) const { return std::lround(t / dt_); }
  double at(double t) const { return (*this)[index_of(t)]; }

  std::span<const double> right_values() const { return right_; }
  std::span<const double> left_values() const { return left_; }

 private:
  double tau_;
  double dt_;
  std::size_t lag_steps_;
  std::size_t steps_;
  std::vector<double> right_;
  std::vector<double> left_;
};

namespace detail {

inline std::size_t horizon_steps(double T, double dt) {
  if (!(T > 0.0)) throw DomainError("horizon T must be positive");
  return static_cast<std::size_t>(std::ceil(T / dt - 1e-9));
}

// Solves x = c + w0 * x by successive substitution.
inline double recover_fixed_point(double c, double w0, double start) {
  if (w0 == 0.0) return c;
  if (!(std::abs(w0) < 1.0)) {
    throw NeutralRecoveryFailure("neutral recovery does not contract (|rho{0}| >= 1)");
  }
  double x = start;
  for (int it = 0; it < 2000; ++it) {
    const double next = c + w0 * x;
    if (std::abs(next - x) <= 1e-12 * (1.0 + std::abs(next))) return next;
    x = next;
  }
  throw NeutralRecoveryFailure("neutral fixed-point recovery did not converge");
}

// Method of steps with a trapezoidal predictor-corrector on
//   d/dt (r(t) - int r(t+theta) rho(dtheta)) = int r(t+theta) mu(dtheta).
// An empty rho gives the retarded equation with identical arithmetic.
inline FundamentalSolution integrate_fundamental(const SignedMeasure& rho, const SignedMeasure& mu,
                                                 double T, double dt) {
  const double tau = std::max(mu.tau(), rho.tau());
  const std::size_t n = steps_per_horizon(tau, dt);
  const std::size_t N = horizon_steps(T, dt);
  const GridStencil mu_s = make_stencil(mu, dt);
  const GridStencil rho_s = make_stencil(rho, dt);
  if (mu_s.max_lag() > n || rho_s.max_lag() > n) {
    throw DomainError("measure support exceeds the delay horizon");
  }
  const double rho0 = rho_s.weight_at(0);
  if (rho0 != 0.0 && !(total_variation(rho) < 0.5)) {
    throw NeutralRecoveryFailure("rho has mass at lag 0 and Var(rho) >= 1/2");
  }

  std::vector<double> right(n + N + 1, 0.0), left(n + N + 1, 0.0);
  right[n] = 1.0;  // r(0) = 1, r(0-) = 0

  // History terms (lag >= 1) of the rho functional at index j.
  auto rho_history = [&](const std::vector<double>& v, std::size_t j) {
    double acc = 0.0;
    for (const auto& t : rho_s.taps()) {
      if (t.lag > 0) acc += t.weight * v[j - t.lag];
    }
    return acc;
  };
  auto recover = [&](double M, const std::vector<double>& v, std::size_t j, double guess) {
    if (rho_s.empty()) return M;
    return recover_fixed_point(M + rho_history(v, j), rho0, guess);
  };

  double M = rho_s.empty() ? right[n] : right[n] - rho_s.apply(right, n);
  for (std::size_t i = 0; i < N; ++i) {
    const std::size_t j = n + i;
    const double f_i = mu_s.apply(right, j);
    const double M_pred = M + dt * f_i;
    double f_next = 0.0;
    double left_pred = 0.0;
    const double w_mu0 = mu_s.weight_at(0);
    if (w_mu0 != 0.0 || rho0 != 0.0) left_pred = recover(M_pred, left, j + 1, M_pred);
    for (const auto& t : mu_s.taps()) {
      f_next += t.weight * (t.lag == 0 ? left_pred : left[j + 1 - t.lag]);
    }
    M = M + 0.5 * dt * (f_i + f_next);
    right[j + 1] = recover(M, right, j + 1, M);
    left[j + 1] = recover(M, left, j + 1, right[j + 1]);
  }
  return FundamentalSolution(tau, dt, N, std::move(right), std::move(left));
}

}  // namespace detail

inline FundamentalSolution fundamental_retarded(const SignedMeasure& mu, double T, double dt) {
  return detail::integrate_fundamental(SignedMeasure::zero(mu.tau()), mu, T, dt);
}

inline FundamentalSolution fundamental_neutral(const SignedMeasure& rho, const SignedMeasure& mu,
                                               double T, double dt) {
  return detail::integrate_fundamental(rho, mu, T, dt);
}

struct DecayFit {
  double c = 0.0;
  double gamma = 0.0;  // -infinity when the tail underflows to zero
};

// Least-squares slope of log peak|r| over consecutive windows of length tau,
// then the smallest c with |r(t_i)| <= c e^{gamma t_i} on the grid.
inline DecayFit fit_decay(const FundamentalSolution& r) {
  const std::size_t n = r.lag_steps();
  const std::size_t N = r.steps();
  if (N < 5 * n) throw DomainError("fit_decay needs a horizon of at least 5 tau");
  const std::size_t windows = N / n;
  std::vector<double> ts, logs;
  double sup = 0.0;
  bool zero_tail = false;
  for (std::size_t w = 0; w < windows; ++w) {
    double peak = 0.0;
    std::size_t at = w * n;
    for (std::size_t i = w * n; i < (w + 1) * n; ++i) {
      const double v = std::max(std::abs(r[static_cast<long>(i)]),
                                std::abs(r.left_limit(static_cast<long>(i))));
      if (v > peak) {
        peak = v;
        at = i;
      }
    }
    sup = std::max(sup, peak);
    if (!(peak > 0.0) || !std::isfinite(std::log(peak))) {
      zero_tail = true;
      break;
    }
    ts.push_back(static_cast<double>(at) * r.dt());
    logs.push_back(std::log(peak));
  }
  if (zero_tail) return {sup, -std::numeric_limits<double>::infinity()};

  const double m = static_cast<double>(ts.size());
  double st = 0, sl = 0, stt = 0, stl = 0;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    st += ts[k];
    sl += logs[k];
    stt += ts[k] * ts[k];
    stl += ts[k] * logs[k];
  }
  const double gamma = (m * stl - st * sl) / (m * stt - st * st);

  double c = 0.0;
  for (std::size_t i = 0; i <= N; ++i) {
    const double t = static_cast<double>(i) * r.dt();
    const double v = std::max(std::abs(r[static_cast<long>(i)]),
                              std::abs(r.left_limit(static_cast<long>(i))));
    c = std::max(c, v * std::exp(-gamma * t));
  }
  for (std::size_t i = 0; i <= N; ++i) {
    const double t = static_cast<double>(i) * r.dt();
    if (std::abs(r[static_cast<long>(i)]) > c * std::exp(gamma * t) * (1.0 + 1e-12)) {
      throw Error("decay envelope violated after fitting");
    }
  }
  return {c, gamma};
}

}  // namespace retard

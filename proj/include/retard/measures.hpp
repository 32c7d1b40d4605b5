#pragma once

// Finite signed measures on [-tau, 0] and grid-sampled segment paths.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "retard/errors.hpp"

namespace retard {

// Relative slack used when deciding whether a location sits on the grid.
inline constexpr double kGridTolerance = 1e-9;

struct Atom {
  double theta = 0.0;
  double weight = 0.0;
};

// Constant mass per unit time on [lo, hi].
struct DensityPiece {
  double lo = 0.0;
  double hi = 0.0;
  double value = 0.0;
};

class SignedMeasure {
 public:
  SignedMeasure() = default;

  SignedMeasure(double tau, std::vector<Atom> atoms,
                std::vector<DensityPiece> density = {})
      : tau_(tau), atoms_(std::move(atoms)), density_(std::move(density)) {
    if (!(tau_ > 0.0) || !std::isfinite(tau_)) {
      throw DomainError("measure horizon tau must be positive and finite");
    }
    const double slack = kGridTolerance * std::max(1.0, tau_);
    for (auto& a : atoms_) {
      if (!std::isfinite(a.theta) || !std::isfinite(a.weight) ||
          a.theta < -tau_ - slack || a.theta > slack) {
        throw DomainError("atom location " + std::to_string(a.theta) +
                          " outside [-tau, 0]");
      }
      a.theta = std::clamp(a.theta, -tau_, 0.0);
    }
    std::sort(atoms_.begin(), atoms_.end(),
              [](const Atom& x, const Atom& y) { return x.theta > y.theta; });
    for (std::size_t k = 1; k < atoms_.size(); ++k) {
      if (std::abs(atoms_[k].theta - atoms_[k - 1].theta) <= slack) {
        throw DomainError("atom locations must be pairwise distinct");
      }
    }
    std::sort(density_.begin(), density_.end(),
              [](const DensityPiece& x, const DensityPiece& y) {
                return x.lo < y.lo;
              });
    for (std::size_t k = 0; k < density_.size(); ++k) {
      auto& p = density_[k];
      if (!(p.lo < p.hi) || p.lo < -tau_ - slack || p.hi > slack ||
          !std::isfinite(p.value)) {
        throw DomainError("density piece must satisfy -tau <= lo < hi <= 0");
      }
      p.lo = std::max(p.lo, -tau_);
      p.hi = std::min(p.hi, 0.0);
      if (k > 0 && p.lo < density_[k - 1].hi - slack) {
        throw DomainError("density pieces overlap");
      }
    }
  }

  static SignedMeasure zero(double tau) { return SignedMeasure(tau, {}); }

  static SignedMeasure dirac(double tau, double theta, double weight = 1.0) {
    return SignedMeasure(tau, {{theta, weight}});
  }

  static SignedMeasure lebesgue(double tau, double value = 1.0) {
    return SignedMeasure(tau, {}, {{-tau, 0.0, value}});
  }

  double tau() const { return tau_; }
  const std::vector<Atom>& atoms() const { return atoms_; }
  const std::vector<DensityPiece>& density() const { return density_; }
  bool empty() const { return atoms_.empty() && density_.empty(); }

  // Largest lag actually carrying mass (0 for the zero measure).
  double support_depth() const {
    double depth = 0.0;
    for (const auto& a : atoms_) depth = std::max(depth, -a.theta);
    for (const auto& p : density_) depth = std::max(depth, -p.lo);
    return depth;
  }

 private:
  double tau_ = 1.0;
  std::vector<Atom> atoms_;
  std::vector<DensityPiece> density_;
};

inline double total_variation(const SignedMeasure& m) {
  double tv = 0.0;
  for (const auto& a : m.atoms()) tv += std::abs(a.weight);
  for (const auto& p : m.density()) tv += std::abs(p.value) * (p.hi - p.lo);
  return tv;
}

// sup over Re(lambda) >= sigma of |int e^{lambda s} m(ds)|, bounded by the
// transform of |m| at sigma (every location is <= 0).
inline double transform_bound(const SignedMeasure& m, double sigma) {
  double b = 0.0;
  for (const auto& a : m.atoms()) b += std::abs(a.weight) * std::exp(sigma * a.theta);
  for (const auto& p : m.density()) {
    const double len = p.hi - p.lo;
    if (std::abs(sigma * len) < 1e-12) {
      b += std::abs(p.value) * len;
    } else {
      b += std::abs(p.value) * (std::exp(sigma * p.hi) - std::exp(sigma * p.lo)) / sigma;
    }
  }
  return b;
}

// Number of grid steps per delay horizon; throws unless dt divides tau.
inline std::size_t steps_per_horizon(double tau, double dt) {
  if (!(dt > 0.0) || !(tau > 0.0)) throw DomainError("tau and dt must be positive");
  const double ratio = tau / dt;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-7 * std::max(1.0, ratio)) {
    throw DomainError("dt = " + std::to_string(dt) + " does not divide tau = " +
                      std::to_string(tau));
  }
  return static_cast<std::size_t>(rounded);
}

struct Tap {
  std::size_t lag = 0;  // in grid steps back from the current time
  double weight = 0.0;
};

// A measure discretised against a uniform grid: int x(t+theta) m(dtheta)
// becomes sum_j w_j x[i - lag_j]. Atoms off the grid are split linearly
// between the two neighbouring nodes; density pieces are integrated exactly
// against the piecewise-linear interpolant (the trapezoid rule when aligned).
class GridStencil {
 public:
  GridStencil() = default;
  explicit GridStencil(std::vector<Tap> taps) : taps_(std::move(taps)) {}

  const std::vector<Tap>& taps() const { return taps_; }
  bool empty() const { return taps_.empty(); }

  std::size_t max_lag() const {
    std::size_t l = 0;
    for (const auto& t : taps_) l = std::max(l, t.lag);
    return l;
  }

  double weight_at(std::size_t lag) const {
    for (const auto& t : taps_) {
      if (t.lag == lag) return t.weight;
    }
    return 0.0;
  }

  // values[index - lag] for every tap.
  double apply(std::span<const double> values, std::size_t index) const {
    double acc = 0.0;
    for (const auto& t : taps_) acc += t.weight * values[index - t.lag];
    return acc;
  }

  // Generic form: value_at(lag) supplies x(t - lag*dt).
  template <typename ValueAt>
  double apply_with(ValueAt&& value_at) const {
    double acc = 0.0;
    for (const auto& t : taps_) acc += t.weight * value_at(t.lag);
    return acc;
  }

 private:
  std::vector<Tap> taps_;
};

inline GridStencil make_stencil(const SignedMeasure& m, double dt) {
  if (!(dt > 0.0)) throw DomainError("stencil step must be positive");
  std::map<std::size_t, double> acc;
  for (const auto& a : m.atoms()) {
    const double x = -a.theta / dt;
    const double r = std::round(x);
    if (std::abs(x - r) <= kGridTolerance * std::max(1.0, x)) {
      acc[static_cast<std::size_t>(r)] += a.weight;
    } else {
      const double k = std::floor(x);
      const double frac = x - k;
      acc[static_cast<std::size_t>(k)] += a.weight * (1.0 - frac);
      acc[static_cast<std::size_t>(k) + 1] += a.weight * frac;
    }
  }
  for (const auto& p : m.density()) {
    const auto k_lo = static_cast<std::size_t>(
        std::max(0.0, std::floor(-p.hi / dt + kGridTolerance)));
    const auto k_hi = static_cast<std::size_t>(std::ceil(-p.lo / dt - kGridTolerance));
    // Cell between lag k+1 (left, theta_l) and lag k (right, theta_r).
    for (std::size_t k = k_lo; k < k_hi; ++k) {
      const double theta_r = -static_cast<double>(k) * dt;
      const double theta_l = theta_r - dt;
      const double u0 = std::max(p.lo, theta_l);
      const double u1 = std::min(p.hi, theta_r);
      if (!(u1 > u0)) continue;
      const double w_left =
          ((theta_r - u0) * (theta_r - u0) - (theta_r - u1) * (theta_r - u1)) / (2.0 * dt);
      const double w_right =
          ((u1 - theta_l) * (u1 - theta_l) - (u0 - theta_l) * (u0 - theta_l)) / (2.0 * dt);
      acc[k + 1] += p.value * w_left;
      acc[k] += p.value * w_right;
    }
  }
  std::vector<Tap> taps;
  taps.reserve(acc.size());
  for (const auto& [lag, w] : acc) {
    if (w != 0.0) taps.push_back({lag, w});
  }
  return GridStencil(std::move(taps));
}

// A path on [-tau, 0] sampled at theta_i = -tau + i*tau/n, i = 0..n, with the
// piecewise-linear interpolant as its continuous representative.
class Segment {
 public:
  Segment() = default;

  Segment(double tau, std::vector<double> values,
          std::optional<std::vector<double>> derivative_values = std::nullopt)
      : tau_(tau), values_(std::move(values)), derivative_(std::move(derivative_values)) {
    if (!(tau_ > 0.0)) throw DomainError("segment horizon must be positive");
    if (values_.size() < 2) throw DomainError("segment needs at least two grid values");
    if (derivative_ && derivative_->size() != values_.size()) {
      throw DomainError("derivative_values must match values in length");
    }
  }

  static Segment constant(double tau, std::size_t n, double c) {
    return Segment(tau, std::vector<double>(n + 1, c), std::vector<double>(n + 1, 0.0));
  }

  // xi(theta) = a + b*theta
  static Segment linear(double tau, std::size_t n, double a, double b) {
    return from_function(
        tau, n, [=](double th) { return a + b * th; }, [=](double) { return b; });
  }

  // xi(theta) = amplitude * sin(omega*theta + phase)
  static Segment sine(double tau, std::size_t n, double amplitude, double omega,
                      double phase = 0.0) {
    return from_function(
        tau, n, [=](double th) { return amplitude * std::sin(omega * th + phase); },
        [=](double th) { return amplitude * omega * std::cos(omega * th + phase); });
  }

  template <typename F>
  static Segment from_function(double tau, std::size_t n, F&& f) {
    std::vector<double> v(n + 1);
    for (std::size_t i = 0; i <= n; ++i) v[i] = f(node(tau, n, i));
    return Segment(tau, std::move(v));
  }

  template <typename F, typename DF>
  static Segment from_function(double tau, std::size_t n, F&& f, DF&& df) {
    std::vector<double> v(n + 1), d(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
      v[i] = f(node(tau, n, i));
      d[i] = df(node(tau, n, i));
    }
    return Segment(tau, std::move(v), std::move(d));
  }

  double tau() const { return tau_; }
  std::size_t intervals() const { return values_.size() - 1; }
  double dt() const { return tau_ / static_cast<double>(intervals()); }
  const std::vector<double>& values() const { return values_; }
  bool has_derivative() const { return derivative_.has_value(); }
  const std::vector<double>& derivative_values() const {
    if (!derivative_) throw MissingDerivative("segment carries no derivative values");
    return *derivative_;
  }
  double theta(std::size_t i) const { return node(tau_, intervals(), i); }

  // Value at lag k steps before theta = 0, i.e. xi(-k*dt).
  double at_lag(std::size_t k) const { return values_[intervals() - k]; }

  Segment scaled(double c) const {
    std::vector<double> v = values_;
    for (auto& x : v) x *= c;
    std::optional<std::vector<double>> d = derivative_;
    if (d) {
      for (auto& x : *d) x *= c;
    }
    return Segment(tau_, std::move(v), std::move(d));
  }

 private:
  static double node(double tau, std::size_t n, std::size_t i) {
    if (i == n) return 0.0;
    return -tau + static_cast<double>(i) * (tau / static_cast<double>(n));
  }

  double tau_ = 1.0;
  std::vector<double> values_{0.0, 0.0};
  std::optional<std::vector<double>> derivative_;
};

inline double segment_eval(const Segment& s, double theta) {
  const double tau = s.tau();
  if (!(theta >= -tau - kGridTolerance * tau) || theta > kGridTolerance * tau) {
    throw DomainError("segment evaluated outside [-tau, 0]");
  }
  const auto n = s.intervals();
  const double x = std::clamp((theta + tau) / s.dt(), 0.0, static_cast<double>(n));
  const double r = std::round(x);
  if (std::abs(x - r) <= kGridTolerance * std::max(1.0, x)) {
    return s.values()[static_cast<std::size_t>(r)];
  }
  const auto i = static_cast<std::size_t>(std::floor(x));
  const double frac = x - static_cast<double>(i);
  return (1.0 - frac) * s.values()[i] + frac * s.values()[i + 1];
}

inline double segment_sup_norm(const Segment& s) {
  double m = 0.0;
  for (double v : s.values()) m = std::max(m, std::abs(v));
  return m;
}

// int_{-tau}^0 s(theta) m(dtheta) for the interpolated segment.
inline double integrate_against(const SignedMeasure& m, const Segment& s) {
  if (m.support_depth() > s.tau() * (1.0 + kGridTolerance)) {
    throw DomainError("measure support reaches beyond the segment horizon");
  }
  const auto stencil = make_stencil(m, s.dt());
  return stencil.apply_with([&](std::size_t lag) { return s.at_lag(lag); });
}

// Atoms are evaluated exactly; density pieces use the trapezoid rule on an
// n-interval grid over [-tau, 0].
template <typename F>
double integrate_against(const SignedMeasure& m, F&& f, std::size_t n) {
  double acc = 0.0;
  for (const auto& a : m.atoms()) acc += a.weight * f(a.theta);
  if (!m.density().empty()) {
    const SignedMeasure dens(m.tau(), {}, m.density());
    const double dt = m.tau() / static_cast<double>(n);
    acc += make_stencil(dens, dt).apply_with(
        [&](std::size_t lag) { return f(-static_cast<double>(lag) * dt); });
  }
  return acc;
}

}  // namespace retard

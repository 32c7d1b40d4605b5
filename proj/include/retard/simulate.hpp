#pragma once

// Euler-Maruyama paths for retarded and neutral diffusions and for
// Levy-driven retarded equations (additive and multiplicative).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "retard/errors.hpp"
#include "retard/fundsol.hpp"
#include "retard/measures.hpp"
#include "retard/noise.hpp"
#include "retard/parallel.hpp"

namespace retard {

enum class DiffusionForm { constant, affine_endpoint, affine_integral, bounded_saturating };

// A named diffusion functional sigma(xi) of the current segment.
//   constant            level
//   affine_endpoint     level + slope * xi(-lag)
//   affine_integral     slope * int_{-tau}^0 xi
//   bounded_saturating  bound * tanh(xi(-lag) / bound)
struct DiffusionFunctional {
  DiffusionForm form = DiffusionForm::constant;
  double level = 0.0;
  double slope = 0.0;
  double lag = 0.0;
  double bound = 1.0;

  static DiffusionFunctional constant(double c) { return {DiffusionForm::constant, c, 0.0, 0.0, 1.0}; }

  static DiffusionFunctional affine_endpoint(double level, double slope, double lag) {
    if (!(lag >= 0.0)) throw DomainError("diffusion lag must be non-negative");
    return {DiffusionForm::affine_endpoint, level, slope, lag, 1.0};
  }

  static DiffusionFunctional affine_integral(double a) {
    return {DiffusionForm::affine_integral, 0.0, a, 0.0, 1.0};
  }

  static DiffusionFunctional bounded_saturating(double bound, double lag) {
    if (!(bound > 0.0)) throw DomainError("saturation bound must be positive");
    if (!(lag >= 0.0)) throw DomainError("diffusion lag must be non-negative");
    return {DiffusionForm::bounded_saturating, 0.0, 0.0, lag, bound};
  }

  // L with |sigma(xi) - sigma(eta)|^2 <= L * int |xi - eta|^2 d(nu), where nu
  // is the point mass at -lag for the endpoint forms and Lebesgue measure on
  // [-tau, 0] for the integral form.
  double lipschitz(double tau) const {
    switch (form) {
      case DiffusionForm::constant: return 0.0;
      case DiffusionForm::affine_endpoint: return slope * slope;
      case DiffusionForm::affine_integral: return slope * slope * tau;
      case DiffusionForm::bounded_saturating: return 1.0;
    }
    return 0.0;
  }

  bool uniformly_bounded() const {
    return form == DiffusionForm::constant || form == DiffusionForm::bounded_saturating ||
           slope == 0.0;
  }

  double reach() const {
    return form == DiffusionForm::affine_endpoint || form == DiffusionForm::bounded_saturating ? lag
                                                                                               : 0.0;
  }

  double operator()(const Segment& s) const {
    switch (form) {
      case DiffusionForm::constant: return level;
      case DiffusionForm::affine_endpoint: return level + slope * segment_eval(s, -lag);
      case DiffusionForm::affine_integral:
        return slope * integrate_against(SignedMeasure::lebesgue(s.tau()), s);
      case DiffusionForm::bounded_saturating: return bound * std::tanh(segment_eval(s, -lag) / bound);
    }
    return 0.0;
  }
};

enum class ModelKind { retarded_diffusion, neutral_diffusion, levy_ou, levy_multiplicative };

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::retarded_diffusion: return "retarded_diffusion";
    case ModelKind::neutral_diffusion: return "neutral_diffusion";
    case ModelKind::levy_ou: return "levy_ou";
    case ModelKind::levy_multiplicative: return "levy_multiplicative";
  }
  return "?";
}

struct ModelSpec {
  ModelKind kind = ModelKind::retarded_diffusion;
  SignedMeasure mu;
  std::optional<SignedMeasure> rho;
  DiffusionFunctional sigma;
  NoiseSpec noise;

  static ModelSpec retarded_diffusion(SignedMeasure mu, DiffusionFunctional sigma) {
    return checked({ModelKind::retarded_diffusion, std::move(mu), std::nullopt, sigma, NoiseSpec::brownian()});
  }
  static ModelSpec neutral_diffusion(SignedMeasure mu, SignedMeasure rho, DiffusionFunctional sigma) {
    return checked({ModelKind::neutral_diffusion, std::move(mu), std::move(rho), sigma, NoiseSpec::brownian()});
  }
  static ModelSpec levy_ou(SignedMeasure mu, NoiseSpec noise) {
    return checked({ModelKind::levy_ou, std::move(mu), std::nullopt, DiffusionFunctional::constant(1.0), noise});
  }
  static ModelSpec levy_multiplicative(SignedMeasure mu, DiffusionFunctional sigma, NoiseSpec noise) {
    return checked({ModelKind::levy_multiplicative, std::move(mu), std::nullopt, sigma, noise});
  }

  double tau() const {
    double t = mu.tau();
    if (rho) t = std::max(t, rho->tau());
    return std::max(t, sigma.reach());
  }

  void validate() const {
    const bool diffusion = kind == ModelKind::retarded_diffusion || kind == ModelKind::neutral_diffusion;
    if (kind == ModelKind::neutral_diffusion && !rho) throw DomainError("neutral model needs rho");
    if (kind != ModelKind::neutral_diffusion && rho) throw DomainError("rho is only allowed for neutral models");
    if (diffusion && noise.kind != NoiseKind::brownian) {
      throw DomainError("diffusion models are driven by Brownian motion");
    }
    if (kind == ModelKind::levy_ou && !noise.first_moment_condition()) {
      throw DomainError("Levy OU model needs jumps with a finite first moment");
    }
    if (kind == ModelKind::levy_multiplicative && !sigma.uniformly_bounded() &&
        !noise.second_moment_condition()) {
      throw DomainError("unbounded sigma needs noise with a finite second moment");
    }
    if (rho && !(total_variation(*rho) < 1.0)) throw DomainError("neutral operator needs Var(rho) < 1");
  }

 private:
  static ModelSpec checked(ModelSpec m) {
    m.validate();
    return m;
  }
};

// One realized trajectory on the grid t_i = i*dt, i = -n..N.
struct PathGrid {
  double dt = 0.0;
  double T = 0.0;
  std::size_t lag_steps = 0;
  std::vector<double> values;  // index k <-> t = (k - lag_steps) * dt
  std::uint64_t seed = 0;
  std::uint64_t replica = 0;

  std::size_t steps() const { return values.size() - 1 - lag_steps; }
  double time_of(long i) const { return static_cast<double>(i) * dt; }
  long index_of(double t) const { return std::lround(t / dt); }

  double operator[](long i) const { return values.at(static_cast<std::size_t>(i + static_cast<long>(lag_steps))); }
  double at(double t) const { return (*this)[index_of(t)]; }

  // Values on [0, T].
  std::span<const double> forward() const { return std::span<const double>(values).subspan(lag_steps); }

  // The segment X_{t_i} on [-tau, 0].
  Segment segment_at(long i) const {
    const auto end = static_cast<std::size_t>(i + static_cast<long>(lag_steps));
    if (end < lag_steps || end >= values.size()) throw DomainError("segment index outside the path");
    std::vector<double> v(values.begin() + static_cast<long>(end - lag_steps),
                          values.begin() + static_cast<long>(end) + 1);
    return Segment(static_cast<double>(lag_steps) * dt, std::move(v));
  }
};

namespace detail {

// sigma evaluated along a grid path; the integral form keeps a running sum.
class GridDiffusion {
 public:
  GridDiffusion(const DiffusionFunctional& f, std::size_t n, double dt) : f_(f), n_(n), dt_(dt) {
    if (f.form == DiffusionForm::affine_endpoint || f.form == DiffusionForm::bounded_saturating) {
      lag_ = steps_from(f.lag, dt);
      if (lag_ > n) throw DomainError("diffusion lag exceeds the delay horizon");
    }
  }

  void start(std::span<const double> x, std::size_t j) {
    if (f_.form != DiffusionForm::affine_integral) return;
    sum_ = 0.0;
    for (std::size_t m = j - n_; m <= j; ++m) sum_ += x[m];
  }

  double at(std::span<const double> x, std::size_t j) const {
    switch (f_.form) {
      case DiffusionForm::constant: return f_.level;
      case DiffusionForm::affine_endpoint: return f_.level + f_.slope * x[j - lag_];
      case DiffusionForm::affine_integral: return f_.slope * dt_ * (sum_ - 0.5 * (x[j - n_] + x[j]));
      case DiffusionForm::bounded_saturating: return f_.bound * std::tanh(x[j - lag_] / f_.bound);
    }
    return 0.0;
  }

  // Moves the window from j to j + 1 once x[j + 1] is known.
  void advance(std::span<const double> x, std::size_t j) {
    if (f_.form == DiffusionForm::affine_integral) sum_ += x[j + 1] - x[j - n_];
  }

 private:
  static std::size_t steps_from(double lag, double dt) {
    const double k = lag / dt;
    const double r = std::round(k);
    if (std::abs(k - r) > 1e-7 * std::max(1.0, k)) throw DomainError("diffusion lag is not a multiple of dt");
    return static_cast<std::size_t>(r);
  }

  DiffusionFunctional f_;
  std::size_t n_;
  double dt_;
  std::size_t lag_ = 0;
  double sum_ = 0.0;
};

struct CompiledModel {
  ModelKind kind;
  double tau;
  double dt;
  std::size_t n;
  GridStencil drift;
  GridStencil rho;
  double rho0 = 0.0;
  DiffusionFunctional sigma;
};

inline CompiledModel compile(const ModelSpec& model, double dt) {
  model.validate();
  const double tau = model.tau();
  CompiledModel c{model.kind, tau, dt, steps_per_horizon(tau, dt), make_stencil(model.mu, dt), {}, 0.0,
                  model.sigma};
  if (model.rho) {
    c.rho = make_stencil(*model.rho, dt);
    c.rho0 = c.rho.weight_at(0);
    if (c.rho0 != 0.0 && !(total_variation(*model.rho) < 0.5)) {
      throw NeutralRecoveryFailure("rho has mass at lag 0 and Var(rho) >= 1/2");
    }
  }
  if (c.drift.max_lag() > c.n || c.rho.max_lag() > c.n) {
    throw DomainError("measure support exceeds the delay horizon");
  }
  return c;
}

inline void check_initial(const CompiledModel& c, const Segment& xi) {
  if (std::abs(xi.tau() - c.tau) > kGridTolerance * std::max(1.0, c.tau)) {
    throw DomainError("initial segment horizon differs from the model delay");
  }
  if (xi.intervals() != c.n) throw DomainError("initial segment grid differs from tau/dt");
}

// The Euler recursion. next_increment(i) supplies the noise increment over
// [t_i, t_{i+1}]; sigma is evaluated on the segment before the increment.
template <typename NextIncrement>
PathGrid run(const CompiledModel& c, const Segment& xi, std::size_t N, NextIncrement&& next_increment,
             std::vector<double>* sigma_trace) {
  check_initial(c, xi);
  const std::size_t n = c.n;
  PathGrid path;
  path.dt = c.dt;
  path.T = static_cast<double>(N) * c.dt;
  path.lag_steps = n;
  path.values.assign(n + N + 1, 0.0);
  std::copy(xi.values().begin(), xi.values().end(), path.values.begin());
  std::span<double> x(path.values);
  if (sigma_trace) sigma_trace->assign(N, 0.0);

  GridDiffusion sigma(c.sigma, n, c.dt);
  sigma.start(x, n);
  const bool neutral = c.kind == ModelKind::neutral_diffusion;
  const bool additive = c.kind == ModelKind::levy_ou;

  auto rho_history = [&](std::size_t j) {
    double acc = 0.0;
    for (const auto& t : c.rho.taps()) {
      if (t.lag > 0) acc += t.weight * x[j - t.lag];
    }
    return acc;
  };

  double M = neutral && !c.rho.empty() ? x[n] - c.rho.apply(x, n) : x[n];
  for (std::size_t i = 0; i < N; ++i) {
    const std::size_t j = n + i;
    const double drift = c.drift.apply(x, j);
    const double g = additive ? 1.0 : sigma.at(x, j);
    if (sigma_trace) (*sigma_trace)[i] = g;
    const double dz = next_increment(i);
    if (neutral) {
      M = M + drift * c.dt + g * dz;
      x[j + 1] = c.rho.empty() ? M : recover_fixed_point(M + rho_history(j + 1), c.rho0, M);
    } else {
      x[j + 1] = x[j] + drift * c.dt + g * dz;
    }
    sigma.advance(x, j);
  }
  return path;
}

inline NoiseSpec driving_noise(const ModelSpec& model) {
  return model.kind == ModelKind::retarded_diffusion || model.kind == ModelKind::neutral_diffusion
             ? NoiseSpec::brownian()
             : model.noise;
}

}  // namespace detail

// The increments a replica's stream produces for this model, in step order.
inline std::vector<double> model_increments(const ModelSpec& model, double dt, std::size_t count,
                                            std::uint64_t seed, std::uint64_t replica) {
  Stream stream(seed, replica);
  return sample_increments(detail::driving_noise(model), dt, count, stream);
}

// Path driven by caller-supplied increments. When sigma_trace is given it
// receives sigma(X_{t_i}) for every step.
inline PathGrid simulate_path(const ModelSpec& model, const Segment& xi, double T, double dt,
                              std::span<const double> increments,
                              std::vector<double>* sigma_trace = nullptr) {
  const auto c = detail::compile(model, dt);
  const std::size_t N = detail::horizon_steps(T, dt);
  if (increments.size() != N) throw DomainError("increment count differs from the number of steps");
  return detail::run(c, xi, N, [&](std::size_t i) { return increments[i]; }, sigma_trace);
}

inline PathGrid simulate(const ModelSpec& model, const Segment& xi, double T, double dt,
                         std::uint64_t seed, std::uint64_t replica = 0) {
  const auto c = detail::compile(model, dt);
  const std::size_t N = detail::horizon_steps(T, dt);
  Stream stream(seed, replica);
  const NoiseSpec noise = detail::driving_noise(model);
  auto path = detail::run(
      c, xi, N, [&](std::size_t) { return sample_levy_increment(noise, dt, stream); }, nullptr);
  path.seed = seed;
  path.replica = replica;
  return path;
}

namespace detail {
inline void require_kind(const ModelSpec& m, ModelKind k) {
  if (m.kind != k) throw DomainError("expected a " + to_string(k) + " model, got " + to_string(m.kind));
}
}  // namespace detail

inline PathGrid euler_retarded(const ModelSpec& model, const Segment& xi, double T, double dt,
                               std::uint64_t seed, std::uint64_t replica = 0) {
  detail::require_kind(model, ModelKind::retarded_diffusion);
  return simulate(model, xi, T, dt, seed, replica);
}

inline PathGrid euler_neutral(const ModelSpec& model, const Segment& xi, double T, double dt,
                              std::uint64_t seed, std::uint64_t replica = 0) {
  detail::require_kind(model, ModelKind::neutral_diffusion);
  return simulate(model, xi, T, dt, seed, replica);
}

inline PathGrid euler_levy_ou(const ModelSpec& model, const Segment& xi, double T, double dt,
                              std::uint64_t seed, std::uint64_t replica = 0) {
  detail::require_kind(model, ModelKind::levy_ou);
  return simulate(model, xi, T, dt, seed, replica);
}

inline PathGrid euler_levy_multiplicative(const ModelSpec& model, const Segment& xi, double T, double dt,
                                          std::uint64_t seed, std::uint64_t replica = 0) {
  detail::require_kind(model, ModelKind::levy_multiplicative);
  return simulate(model, xi, T, dt, seed, replica);
}

// Replica k uses the stream (seed, first_replica + k).
inline std::vector<PathGrid> simulate_replicas(const ModelSpec& model, const Segment& xi, double T,
                                               double dt, std::size_t replicas, std::uint64_t seed,
                                               std::uint64_t first_replica = 0) {
  std::vector<PathGrid> out(replicas);
  parallel_for(replicas, [&](std::size_t k) { out[k] = simulate(model, xi, T, dt, seed, first_replica + k); });
  return out;
}

}  // namespace retard

#pragma once

// Monte Carlo diagnostics for stationarity: synchronous-coupling contraction,
// segment moment bounds, empirical marginal laws and 1-d Wasserstein curves.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "retard/errors.hpp"
#include "retard/noise.hpp"
#include "retard/parallel.hpp"
#include "retard/simulate.hpp"

namespace retard {

namespace detail {

// make(k) runs replica k; merge(k, result) folds results in replica order, so
// the outcome does not depend on how the blocks were scheduled.
template <typename Make, typename Merge>
void reduce_replicas(std::size_t replicas, Make&& make, Merge&& merge, std::size_t block = 64) {
  using Result = decltype(make(std::size_t{0}));
  std::vector<Result> slots;
  for (std::size_t start = 0; start < replicas; start += block) {
    const std::size_t count = std::min(block, replicas - start);
    slots.assign(count, Result{});
    parallel_for(count, [&](std::size_t i) { slots[i] = make(start + i); });
    for (std::size_t i = 0; i < count; ++i) merge(start + i, std::move(slots[i]));
  }
}

inline std::vector<std::size_t> record_indices(std::size_t steps, std::size_t max_points) {
  const std::size_t stride = std::max<std::size_t>(1, (steps + max_points - 1) / max_points);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i <= steps; i += stride) idx.push_back(i);
  if (idx.back() != steps) idx.push_back(steps);
  return idx;
}

// Independent sub-seed for a second family of streams.
inline std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t role) {
  return splitmix64(seed ^ splitmix64(0xA5A5A5A5A5A5A5A5ULL + role));
}

// Least-squares slope of log(peak) over windows of the given length inside
// [lo, hi], stopping at the first window whose peak is zero.
inline double envelope_rate(std::span<const double> times, std::span<const double> values, double window,
                            double lo, double hi) {
  std::vector<double> ts, logs;
  double w_start = lo;
  while (w_start < hi - 1e-12) {
    const double w_end = std::min(hi, w_start + window);
    double peak = 0.0, at = w_start;
    bool any = false;
    for (std::size_t k = 0; k < times.size(); ++k) {
      if (times[k] + 1e-12 < w_start || times[k] > w_end + 1e-12) continue;
      any = true;
      if (std::abs(values[k]) > peak) {
        peak = std::abs(values[k]);
        at = times[k];
      }
    }
    w_start = w_end;
    if (!any) continue;
    if (!(peak > 0.0) || !std::isfinite(std::log(peak))) break;
    ts.push_back(at);
    logs.push_back(std::log(peak));
  }
  if (ts.size() < 2) return -std::numeric_limits<double>::infinity();
  const double m = static_cast<double>(ts.size());
  const double st = std::accumulate(ts.begin(), ts.end(), 0.0);
  const double sl = std::accumulate(logs.begin(), logs.end(), 0.0);
  double stt = 0.0, stl = 0.0;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    stt += ts[k] * ts[k];
    stl += ts[k] * logs[k];
  }
  return (m * stl - st * sl) / (m * stt - st * st);
}

// max |x| over the trailing window of `lag` steps, at every forward index.
inline std::vector<double> sliding_sup(const PathGrid& p) {
  const std::size_t n = p.lag_steps;
  const auto& v = p.values;
  std::vector<double> out(p.steps() + 1);
  std::deque<std::size_t> q;
  for (std::size_t k = 0; k < v.size(); ++k) {
    while (!q.empty() && std::abs(v[q.back()]) <= std::abs(v[k])) q.pop_back();
    q.push_back(k);
    if (q.front() + n < k) q.pop_front();
    if (k >= n) out[k - n] = std::abs(v[q.front()]);
  }
  return out;
}

}  // namespace detail

struct ContractionReport {
  std::vector<double> times;
  std::vector<double> msd;
  double fitted_rate = 0.0;  // -infinity for an identically zero curve
  double fit_from = 0.0;
  double fit_to = 0.0;
};

struct CouplingOptions {
  bool shared_noise = true;
  std::size_t max_points = 2000;
};

inline ContractionReport coupling_contraction(const ModelSpec& model, const Segment& xi, const Segment& eta,
                                              double T, double dt, std::size_t replicas, std::uint64_t seed,
                                              CouplingOptions opts = {}) {
  if (replicas == 0) throw DomainError("need at least one replica");
  const std::size_t N = detail::horizon_steps(T, dt);
  const auto idx = detail::record_indices(N, opts.max_points);
  const std::uint64_t other = detail::derived_seed(seed, 1);

  ContractionReport rep;
  rep.times.resize(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) rep.times[k] = static_cast<double>(idx[k]) * dt;
  rep.msd.assign(idx.size(), 0.0);

  detail::reduce_replicas(
      replicas,
      [&](std::size_t k) {
        const auto dz = model_increments(model, dt, N, seed, k);
        const auto a = simulate_path(model, xi, T, dt, dz);
        const auto b = opts.shared_noise ? simulate_path(model, eta, T, dt, dz)
                                         : simulate_path(model, eta, T, dt, model_increments(model, dt, N, other, k));
        std::vector<double> sq(idx.size());
        for (std::size_t j = 0; j < idx.size(); ++j) {
          const long i = static_cast<long>(idx[j]);
          const double d = a[i] - b[i];
          sq[j] = d * d;
        }
        return sq;
      },
      [&](std::size_t, std::vector<double>&& sq) {
        for (std::size_t j = 0; j < sq.size(); ++j) rep.msd[j] += sq[j];
      });
  for (auto& v : rep.msd) v /= static_cast<double>(replicas);

  const double tau = model.tau();
  rep.fit_from = std::min(2.0 * tau, 0.5 * T);
  rep.fit_to = T;
  rep.fitted_rate = detail::envelope_rate(rep.times, rep.msd, tau, rep.fit_from, rep.fit_to);
  return rep;
}

enum class MomentVerdict { Bounded, Unbounded };

inline std::string to_string(MomentVerdict v) { return v == MomentVerdict::Bounded ? "Bounded" : "Unbounded"; }

namespace detail {
inline std::size_t model_lag_steps(const ModelSpec& m, double dt) { return steps_per_horizon(m.tau(), dt); }
}  // namespace detail

struct MomentReport {
  int power = 2;
  std::vector<double> times;
  std::vector<double> moment;       // median of group means of ||X_t||^p
  std::vector<double> running_max;  // of `moment`
  std::vector<double> std_error;
  double last_quarter_rise = 0.0;
  double allowance = 0.0;
  MomentVerdict verdict = MomentVerdict::Bounded;
  double long_run_mean = 0.0;      // mean of X over replicas and the last half of [0, T]
  std::vector<double> terminal;     // X(T) per replica
  std::vector<double> late_samples; // X at ten late times spaced max(tau, T/20) apart, all replicas
};

inline double median(std::vector<double> v) {
  if (v.empty()) throw DomainError("median of an empty sample");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<long>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<long>(mid)));
  return m;
}

// Sample E||X_t||_inf^p along [0, T]. Replicas are split into groups and the
// curve is the median of the group means, which keeps a single extreme path
// from dominating under heavy-tailed noise.
inline MomentReport segment_moment_bound(const ModelSpec& model, const Segment& xi, double T, double dt,
                                         std::size_t replicas, std::uint64_t seed, int p,
                                         std::size_t max_points = 2000) {
  if (p != 1 && p != 2) throw DomainError("moment power must be 1 or 2");
  if (p == 2 && model.kind != ModelKind::retarded_diffusion && model.kind != ModelKind::neutral_diffusion &&
      !model.noise.second_moment_condition()) {
    throw DomainError("second moments need noise with a finite second moment");
  }
  if (replicas == 0) throw DomainError("need at least one replica");
  const std::size_t N = detail::horizon_steps(T, dt);
  const auto idx = detail::record_indices(N, max_points);
  const std::size_t G = std::min<std::size_t>(16, replicas);
  const std::size_t half = N / 2;

  MomentReport rep;
  rep.power = p;
  rep.times.resize(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) rep.times[k] = static_cast<double>(idx[k]) * dt;
  std::vector<std::vector<double>> group_sum(G, std::vector<double>(idx.size(), 0.0));
  std::vector<std::size_t> group_count(G, 0);
  rep.terminal.resize(replicas);
  double mean_acc = 0.0;

  std::vector<std::size_t> late;
  const auto spacing = std::max<std::size_t>(detail::model_lag_steps(model, dt), N / 20);
  for (std::size_t j = 0; j < 10 && j * spacing <= N; ++j) late.push_back(N - j * spacing);

  struct Out {
    std::vector<double> norms;
    std::vector<double> late;
    double tail_sum = 0.0;
    double terminal = 0.0;
  };
  detail::reduce_replicas(
      replicas,
      [&](std::size_t k) {
        const auto path = simulate(model, xi, T, dt, seed, k);
        const auto sup = detail::sliding_sup(path);
        Out o;
        o.norms.resize(idx.size());
        for (std::size_t j = 0; j < idx.size(); ++j) o.norms[j] = p == 1 ? sup[idx[j]] : sup[idx[j]] * sup[idx[j]];
        for (std::size_t i = half; i <= N; ++i) o.tail_sum += path[static_cast<long>(i)];
        o.terminal = path[static_cast<long>(N)];
        for (std::size_t i : late) o.late.push_back(path[static_cast<long>(i)]);
        return o;
      },
      [&](std::size_t k, Out&& o) {
        auto& g = group_sum[k % G];
        for (std::size_t j = 0; j < g.size(); ++j) g[j] += o.norms[j];
        ++group_count[k % G];
        mean_acc += o.tail_sum;
        rep.terminal[k] = o.terminal;
        rep.late_samples.insert(rep.late_samples.end(), o.late.begin(), o.late.end());
      });
  rep.long_run_mean = mean_acc / (static_cast<double>(replicas) * static_cast<double>(N - half + 1));

  rep.moment.resize(idx.size());
  rep.std_error.resize(idx.size());
  std::vector<double> gm(G);
  for (std::size_t j = 0; j < idx.size(); ++j) {
    double s = 0.0;
    for (std::size_t g = 0; g < G; ++g) {
      gm[g] = group_sum[g][j] / static_cast<double>(group_count[g]);
      s += gm[g];
    }
    const double mean = s / static_cast<double>(G);
    double var = 0.0;
    for (double v : gm) var += (v - mean) * (v - mean);
    rep.std_error[j] = G > 1 ? std::sqrt(var / static_cast<double>(G - 1) / static_cast<double>(G)) : 0.0;
    rep.moment[j] = median(gm);
  }
  rep.running_max.resize(idx.size());
  double run = 0.0;
  for (std::size_t j = 0; j < idx.size(); ++j) {
    run = std::max(run, rep.moment[j]);
    rep.running_max[j] = run;
  }

  // Bounded when the running max rises over the last quarter by no more than
  // a slope of 1e-3 * scale plus three standard errors of the estimate.
  const double t_q = 0.75 * T;
  std::size_t q = 0;
  while (q + 1 < idx.size() && rep.times[q] < t_q) ++q;
  const double scale = std::max(rep.running_max.back(), std::numeric_limits<double>::min());
  double se = 0.0;
  for (std::size_t j = q; j < idx.size(); ++j) se = std::max(se, rep.std_error[j]);
  rep.last_quarter_rise = rep.running_max.back() - rep.running_max[q > 0 ? q - 1 : 0];
  rep.allowance = 1e-3 * scale * (T - t_q) + 3.0 * se;
  rep.verdict = rep.last_quarter_rise <= rep.allowance ? MomentVerdict::Bounded : MomentVerdict::Unbounded;
  return rep;
}

// Fraction of sum x_i^2 carried by the largest term. It shrinks like
// 2 log(n) / n for light tails and stays of order one when the variance is
// infinite.
inline double max_square_share(std::span<const double> samples) {
  double total = 0.0, top = 0.0;
  for (double x : samples) {
    total += x * x;
    top = std::max(top, x * x);
  }
  return total > 0.0 ? top / total : 0.0;
}

// Hill estimate of the tail index of |x| from the k largest magnitudes.
// Values below 2 point to an infinite variance.
inline double hill_tail_index(std::span<const double> samples, std::size_t k) {
  if (k < 2 || k >= samples.size()) throw DomainError("hill_tail_index needs 2 <= k < n");
  std::vector<double> a(samples.size());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::abs(samples[i]);
  std::sort(a.begin(), a.end(), std::greater<>());
  const double threshold = a[k];
  if (!(threshold > 0.0)) throw DomainError("hill_tail_index needs k+1 non-zero magnitudes");
  double acc = 0.0;
  for (std::size_t i = 0; i < k; ++i) acc += std::log(a[i] / threshold);
  return static_cast<double>(k) / acc;
}

struct EmpiricalLaw {
  double t = 0.0;
  std::vector<double> offsets;
  std::size_t replicas = 0;
  std::vector<double> samples;  // replica-major: samples[r * offsets.size() + j]

  double at(std::size_t replica, std::size_t j) const { return samples[replica * offsets.size() + j]; }

  std::vector<double> column(std::size_t j) const {
    std::vector<double> c(replicas);
    for (std::size_t r = 0; r < replicas; ++r) c[r] = at(r, j);
    return c;
  }

  std::size_t offset_index(double offset) const {
    for (std::size_t j = 0; j < offsets.size(); ++j) {
      if (std::abs(offsets[j] - offset) <= 1e-9 * std::max(1.0, std::abs(offset))) return j;
    }
    throw DomainError("offset not present in the empirical law");
  }
};

inline std::vector<double> default_offsets(double tau) { return {0.0, -0.5 * tau, -tau}; }

namespace detail {
inline long offset_steps(double offset, double dt) {
  const double k = offset / dt;
  const double r = std::round(k);
  if (std::abs(k - r) > 1e-7 * std::max(1.0, std::abs(k))) throw DomainError("offset is not grid-aligned");
  return static_cast<long>(r);
}

inline void append_marginals(const PathGrid& p, double t, std::span<const double> offsets, std::vector<double>& out) {
  const long i = p.index_of(t);
  for (double th : offsets) {
    const long at = i + offset_steps(th, p.dt);
    if (at < -static_cast<long>(p.lag_steps)) throw DomainError("t + offset lies before -tau");
    if (at > static_cast<long>(p.steps())) throw DomainError("t + offset lies beyond the path");
    out.push_back(p[at]);
  }
}
}  // namespace detail

inline EmpiricalLaw empirical_marginal_law(std::span<const PathGrid> paths, double t, std::vector<double> offsets) {
  if (paths.empty()) throw DomainError("no paths given");
  if (t < -1e-12) throw DomainError("t must be non-negative");
  EmpiricalLaw law;
  law.t = t;
  law.offsets = std::move(offsets);
  law.replicas = paths.size();
  law.samples.reserve(paths.size() * law.offsets.size());
  for (const auto& p : paths) detail::append_marginals(p, t, law.offsets, law.samples);
  return law;
}

// Mean absolute difference of sorted samples; the larger set is truncated to
// the size of the smaller.
inline double wasserstein1(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw DomainError("empty sample set");
  const std::size_t m = std::min(a.size(), b.size());
  std::vector<double> x(a.begin(), a.begin() + static_cast<long>(m));
  std::vector<double> y(b.begin(), b.begin() + static_cast<long>(m));
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  double acc = 0.0;
  for (std::size_t k = 0; k < m; ++k) acc += std::abs(x[k] - y[k]);
  return acc / static_cast<double>(m);
}

inline double wasserstein1(const EmpiricalLaw& a, const EmpiricalLaw& b, double offset) {
  if (a.replicas == 0 || b.replicas == 0) throw DomainError("empty empirical law");
  return wasserstein1(a.column(a.offset_index(offset)), b.column(b.offset_index(offset)));
}

// Largest per-offset distance.
inline double wasserstein1_max(const EmpiricalLaw& a, const EmpiricalLaw& b) {
  double w = 0.0;
  for (double th : a.offsets) w = std::max(w, wasserstein1(a, b, th));
  return w;
}

inline double normal_cdf(double x, double mean, double sd) {
  return 0.5 * std::erfc(-(x - mean) / (sd * std::sqrt(2.0)));
}

template <typename Cdf>
double ks_statistic(std::span<const double> samples, Cdf&& cdf) {
  if (samples.empty()) throw DomainError("empty sample set");
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double d = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double f = cdf(s[k]);
    d = std::max({d, static_cast<double>(k + 1) / n - f, f - static_cast<double>(k) / n});
  }
  return d;
}

// Asymptotic one-sample critical value at the 1% level.
inline double ks_critical_1pct(std::size_t n) { return 1.6276 / std::sqrt(static_cast<double>(n)); }

enum class TrendVerdict { Converging, NotConverging };

inline std::string to_string(TrendVerdict v) {
  return v == TrendVerdict::Converging ? "Converging" : "NotConverging";
}

// Converging when no step rises by more than the floor and the curve ends at
// the floor or below half its starting value.
inline TrendVerdict trend_verdict(std::span<const double> curve, double floor) {
  if (curve.empty()) return TrendVerdict::Converging;
  for (std::size_t k = 1; k < curve.size(); ++k) {
    if (curve[k] > curve[k - 1] + floor) return TrendVerdict::NotConverging;
  }
  const double last = curve.back();
  return last <= floor || last < 0.5 * curve.front() ? TrendVerdict::Converging : TrendVerdict::NotConverging;
}

// Marginal laws at the given times without keeping whole paths.
inline std::vector<EmpiricalLaw> sample_marginals(const ModelSpec& model, const Segment& xi, std::vector<double> times,
                                                  std::vector<double> offsets, double dt, std::size_t replicas,
                                                  std::uint64_t seed) {
  if (times.empty()) throw DomainError("need at least one time");
  if (replicas == 0) throw DomainError("need at least one replica");
  const double T = *std::max_element(times.begin(), times.end());
  const std::size_t J = offsets.size();
  std::vector<EmpiricalLaw> laws(times.size());
  for (std::size_t c = 0; c < times.size(); ++c) {
    laws[c].t = times[c];
    laws[c].offsets = offsets;
    laws[c].replicas = replicas;
    laws[c].samples.assign(replicas * J, 0.0);
  }
  detail::reduce_replicas(
      replicas,
      [&](std::size_t k) {
        const auto path = simulate(model, xi, T, dt, seed, k);
        std::vector<double> v;
        for (double t : times) detail::append_marginals(path, t, offsets, v);
        return v;
      },
      [&](std::size_t k, std::vector<double>&& v) {
        for (std::size_t c = 0; c < times.size(); ++c) {
          std::copy_n(v.begin() + static_cast<long>(c * J), J, laws[c].samples.begin() + static_cast<long>(k * J));
        }
      });
  return laws;
}

struct ConvergenceReport {
  std::vector<double> checkpoints;
  std::vector<double> consecutive;  // W1(law at t_{k-1}, law at t_k), k >= 1
  std::vector<double> cross;        // W1(law from xi, law from eta) at t_k
  std::vector<double> coupled;      // sqrt of the coupled msd at t_k
  double floor = 0.0;
  TrendVerdict consecutive_verdict = TrendVerdict::Converging;
  TrendVerdict cross_verdict = TrendVerdict::Converging;
  TrendVerdict coupled_verdict = TrendVerdict::Converging;
  std::vector<EmpiricalLaw> laws_xi;
  std::vector<EmpiricalLaw> laws_eta;

  bool all_converging() const {
    return consecutive_verdict == TrendVerdict::Converging && cross_verdict == TrendVerdict::Converging &&
           coupled_verdict == TrendVerdict::Converging;
  }
};

// Replica k drives xi with stream (seed, k), eta with an independent stream
// for the law comparison, and eta again with xi's increments for the coupled
// distance.
inline ConvergenceReport stationarity_convergence_test(const ModelSpec& model, const Segment& xi, const Segment& eta,
                                                       std::vector<double> checkpoints, double dt,
                                                       std::size_t replicas, std::uint64_t seed,
                                                       std::vector<double> offsets = {}) {
  if (checkpoints.empty()) throw DomainError("need at least one checkpoint");
  for (std::size_t k = 1; k < checkpoints.size(); ++k) {
    if (!(checkpoints[k] > checkpoints[k - 1])) throw DomainError("checkpoints must increase");
  }
  if (replicas == 0) throw DomainError("need at least one replica");
  if (offsets.empty()) offsets = default_offsets(model.tau());
  const double T = checkpoints.back();
  const std::size_t N = detail::horizon_steps(T, dt);
  const std::size_t K = checkpoints.size();
  const std::uint64_t other = detail::derived_seed(seed, 2);
  const std::size_t J = offsets.size();

  ConvergenceReport rep;
  rep.checkpoints = checkpoints;
  rep.floor = 2.0 / std::sqrt(static_cast<double>(replicas));
  rep.laws_xi.resize(K);
  rep.laws_eta.resize(K);
  for (std::size_t c = 0; c < K; ++c) {
    for (auto* law : {&rep.laws_xi[c], &rep.laws_eta[c]}) {
      law->t = checkpoints[c];
      law->offsets = offsets;
      law->replicas = replicas;
      law->samples.assign(replicas * J, 0.0);
    }
  }
  std::vector<double> msd(K, 0.0);

  struct Out {
    std::vector<double> xi, eta, sq;
  };
  detail::reduce_replicas(
      replicas,
      [&](std::size_t k) {
        const auto dz = model_increments(model, dt, N, seed, k);
        const auto a = simulate_path(model, xi, T, dt, dz);
        const auto b = simulate_path(model, eta, T, dt, dz);
        const auto c = simulate_path(model, eta, T, dt, model_increments(model, dt, N, other, k));
        Out o;
        for (double t : checkpoints) {
          detail::append_marginals(a, t, offsets, o.xi);
          detail::append_marginals(c, t, offsets, o.eta);
          const double d = a.at(t) - b.at(t);
          o.sq.push_back(d * d);
        }
        return o;
      },
      [&](std::size_t k, Out&& o) {
        for (std::size_t c = 0; c < K; ++c) {
          for (std::size_t j = 0; j < J; ++j) {
            rep.laws_xi[c].samples[k * J + j] = o.xi[c * J + j];
            rep.laws_eta[c].samples[k * J + j] = o.eta[c * J + j];
          }
          msd[c] += o.sq[c];
        }
      });

  for (std::size_t c = 0; c < K; ++c) {
    if (c > 0) rep.consecutive.push_back(wasserstein1_max(rep.laws_xi[c - 1], rep.laws_xi[c]));
    rep.cross.push_back(wasserstein1_max(rep.laws_xi[c], rep.laws_eta[c]));
    rep.coupled.push_back(std::sqrt(msd[c] / static_cast<double>(replicas)));
  }
  rep.consecutive_verdict = trend_verdict(rep.consecutive, rep.floor);
  rep.cross_verdict = trend_verdict(rep.cross, rep.floor);
  rep.coupled_verdict = trend_verdict(rep.coupled, rep.floor);
  return rep;
}

}  // namespace retard

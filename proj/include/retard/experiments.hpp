#pragma once

// Named end-to-end scenarios. Each returns its pass/fail checks, scalar
// metrics and CSV artifacts; nothing here touches the filesystem.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "retard/errors.hpp"
#include "retard/fundsol.hpp"
#include "retard/io.hpp"
#include "retard/measures.hpp"
#include "retard/simulate.hpp"
#include "retard/spectrum.hpp"
#include "retard/stationarity.hpp"

namespace retard {

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ExperimentResult {
  std::string name;
  std::vector<Check> checks;
  std::vector<std::pair<std::string, double>> metrics;
  std::vector<std::pair<std::string, std::string>> artifacts;  // file name, CSV text

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
  }
  void check(std::string name, bool ok, std::string detail = {}) {
    checks.push_back({std::move(name), ok, std::move(detail)});
  }
  void metric(std::string name, double v) { metrics.emplace_back(std::move(name), v); }
};

using Overrides = std::map<std::string, double>;

namespace detail {

class Params {
 public:
  Params(const Overrides& o, std::map<std::string, double> defaults) : values_(std::move(defaults)) {
    for (const auto& [k, v] : o) {
      if (!values_.count(k)) {
        std::string known;
        for (const auto& [name, _] : values_) known += (known.empty() ? "" : ", ") + name;
        throw DomainError("unknown parameter '" + k + "' (known: " + known + ")");
      }
      values_[k] = v;
    }
  }
  double operator[](const std::string& k) const { return values_.at(k); }
  std::size_t count(const std::string& k) const { return static_cast<std::size_t>(std::llround(values_.at(k))); }

 private:
  std::map<std::string, double> values_;
};

inline double snap(double t, double dt) { return std::round(t / dt) * dt; }

inline std::vector<double> checkpoints_for(double T, double dt) {
  std::vector<double> out;
  for (double f : {1.0 / 12, 1.0 / 6, 1.0 / 3, 0.5, 2.0 / 3, 5.0 / 6, 1.0}) out.push_back(snap(f * T, dt));
  return out;
}

inline std::string fmt(double x) { return format_double(x); }

inline std::string roots_csv(const CharSpec& spec, const RootReport& rep) {
  CsvWriter w({"index", "re", "im", "residual"});
  for (std::size_t k = 0; k < rep.roots.size(); ++k) {
    w.row(k, rep.roots[k].real(), rep.roots[k].imag(), std::abs(characteristic(spec, rep.roots[k]).value));
  }
  return w.str();
}

inline std::string contraction_csv(const ContractionReport& c) {
  CsvWriter w({"t", "msd"});
  for (std::size_t k = 0; k < c.times.size(); ++k) w.row(c.times[k], c.msd[k]);
  return w.str();
}

inline std::string moments_csv(const MomentReport& m) {
  CsvWriter w({"t", "moment", "running_max", "std_error"});
  for (std::size_t k = 0; k < m.times.size(); ++k) w.row(m.times[k], m.moment[k], m.running_max[k], m.std_error[k]);
  return w.str();
}

inline std::string convergence_csv(const ConvergenceReport& r) {
  CsvWriter w({"curve", "t", "value"});
  for (std::size_t k = 0; k < r.consecutive.size(); ++k) w.row("consecutive", r.checkpoints[k + 1], r.consecutive[k]);
  for (std::size_t k = 0; k < r.cross.size(); ++k) w.row("cross", r.checkpoints[k], r.cross[k]);
  for (std::size_t k = 0; k < r.coupled.size(); ++k) w.row("coupled", r.checkpoints[k], r.coupled[k]);
  return w.str();
}

// Contraction rate, cross-initial distance at T and a Bounded second moment.
inline void stationarity_checks(ExperimentResult& res, const ModelSpec& model, const Segment& xi, const Segment& eta,
                                double T, double dt, std::size_t replicas, std::uint64_t seed, int power = 2) {
  const auto c = coupling_contraction(model, xi, eta, T, dt, replicas, seed);
  res.metric("coupling_rate", c.fitted_rate);
  res.check("coupling msd fitted rate < -0.1", c.fitted_rate < -0.1, "rate " + fmt(c.fitted_rate));
  res.artifacts.emplace_back("contraction.csv", contraction_csv(c));

  const auto conv = stationarity_convergence_test(model, xi, eta, checkpoints_for(T, dt), dt, replicas, seed);
  res.metric("cross_w1_at_T", conv.cross.back());
  res.metric("floor", conv.floor);
  res.check("cross-initial W1 at T below 3 x floor", conv.cross.back() < 3.0 * conv.floor,
            "W1 " + fmt(conv.cross.back()) + ", floor " + fmt(conv.floor));
  res.check("convergence curves all Converging", conv.all_converging(),
            to_string(conv.consecutive_verdict) + "/" + to_string(conv.cross_verdict) + "/" +
                to_string(conv.coupled_verdict));
  res.artifacts.emplace_back("convergence.csv", convergence_csv(conv));

  const auto m = segment_moment_bound(model, xi, T, dt, replicas, seed, power);
  res.metric("moment_rise", m.last_quarter_rise);
  res.metric("moment_allowance", m.allowance);
  res.check("segment moment verdict Bounded", m.verdict == MomentVerdict::Bounded,
            "rise " + fmt(m.last_quarter_rise) + " vs allowance " + fmt(m.allowance));
  res.artifacts.emplace_back("moments.csv", moments_csv(m));
}

inline ExperimentResult ex36(const Overrides& o, std::uint64_t seed) {
  const Params p(o, {{"replicas", 4000}, {"T", 60}, {"dt", 0.01}, {"slope", 0.1}});
  ExperimentResult res{"ex36", {}, {}, {}};
  const auto mu = SignedMeasure::dirac(1.0, -1.0, -1.0);
  const auto spec = CharSpec::retarded(mu);
  const auto roots = rightmost_roots(spec, 4);
  const Complex target(-0.3181, 1.3372);
  const bool found = std::any_of(roots.roots.begin(), roots.roots.end(), [&](Complex z) {
    return std::abs(z.real() - target.real()) < 1e-3 && std::abs(std::abs(z.imag()) - target.imag()) < 1e-3;
  });
  res.metric("v0", roots.v0_estimate);
  res.check("rightmost root -0.3181 +/- 1.3372i", found, "v0 " + fmt(roots.v0_estimate));
  res.check("certified negative", roots.certified_negative);
  res.artifacts.emplace_back("roots.csv", roots_csv(spec, roots));

  const double dt = p["dt"];
  const auto model = ModelSpec::retarded_diffusion(mu, DiffusionFunctional::affine_endpoint(0.0, p["slope"], 1.0));
  const std::size_t n = steps_per_horizon(1.0, dt);
  stationarity_checks(res, model, Segment::constant(1.0, n, 1.0), Segment::constant(1.0, n, -1.0), p["T"], dt,
                      p.count("replicas"), seed);
  return res;
}

inline std::vector<double> linspace(double a, double b, int k) {
  std::vector<double> v(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) v[static_cast<std::size_t>(i)] = a + (b - a) * i / (k - 1);
  return v;
}

inline ExperimentResult ex38(const Overrides& o, std::uint64_t seed) {
  const Params p(o, {{"a", -1.0}, {"b", 0.5}, {"slope", 0.0}, {"replicas", 1}, {"T", 50}, {"dt", 0.01}});
  ExperimentResult res{"ex38", {}, {}, {}};
  const double a = p["a"], b = p["b"];
  const SignedMeasure mu(1.0, {{0.0, a}, {-1.0, b}});
  const auto spec = CharSpec::retarded(mu);
  const auto roots = rightmost_roots(spec, 2);
  const bool interval = stability_interval_check(a, b);
  res.metric("v0", roots.v0_estimate);
  res.metric("interval_check", interval ? 1.0 : 0.0);
  res.check("interval check agrees with root finder", interval == (roots.v0_estimate < 0.0),
            std::string("check ") + (interval ? "true" : "false") + ", v0 " + fmt(roots.v0_estimate));
  res.artifacts.emplace_back("roots.csv", roots_csv(spec, roots));

  const double dt = p["dt"];
  const auto model = ModelSpec::retarded_diffusion(mu, DiffusionFunctional::affine_endpoint(0.0, p["slope"], 1.0));
  const auto m = segment_moment_bound(model, Segment::constant(1.0, steps_per_horizon(1.0, dt), 1.0), p["T"], dt,
                                      p.count("replicas"), seed, 2);
  const bool bounded = m.verdict == MomentVerdict::Bounded;
  res.check("moment verdict matches the sign of v0", bounded == (roots.v0_estimate < 0.0),
            to_string(m.verdict) + ", v0 " + fmt(roots.v0_estimate));
  res.artifacts.emplace_back("moments.csv", moments_csv(m));

  // The 7x7 sweep is reported, not gated.
  CsvWriter region({"a", "b", "interval_check", "v0", "agree"});
  int agree = 0, total = 0;
  for (double ga : linspace(-3.0, -0.5, 7)) {
    for (double gb : linspace(-3.0, 3.0, 7)) {
      if (std::abs(gb - ga) < 0.1 || std::abs(gb + ga) < 0.1) continue;
      const auto r = rightmost_roots(CharSpec::retarded(SignedMeasure(1.0, {{0.0, ga}, {-1.0, gb}})), 2);
      const bool chk = stability_interval_check(ga, gb);
      const bool ok = chk == (r.v0_estimate < 0.0);
      agree += ok;
      ++total;
      region.row(ga, gb, chk ? 1 : 0, r.v0_estimate, ok ? 1 : 0);
    }
  }
  res.metric("region_agree", agree);
  res.metric("region_total", total);
  res.artifacts.emplace_back("region.csv", region.str());
  return res;
}

inline ExperimentResult ex43(const Overrides& o, std::uint64_t seed) {
  const Params p(o, {{"a", 0.05}, {"replicas", 4000}, {"T", 60}, {"dt", 0.01}});
  ExperimentResult res{"ex43", {}, {}, {}};
  const auto mu = SignedMeasure::dirac(1.0, -1.0, -1.0);
  const auto rho = SignedMeasure::dirac(1.0, -1.0, -1.0 / 3.0);
  const auto spec = CharSpec::neutral(rho, mu);
  const double residual = std::abs(characteristic(spec, Complex(-2.313474269, 0.0)).value);
  res.metric("residual_at_real_root", residual);
  res.check("|char(-2.313474269)| < 1e-6", residual < 1e-6, fmt(residual));
  const auto roots = rightmost_roots(spec, 12);
  const auto chain = std::count_if(roots.roots.begin(), roots.roots.end(),
                                   [](Complex z) { return z.real() > -1.2 && z.real() < -0.9; });
  res.metric("chain_roots", static_cast<double>(chain));
  res.metric("v0", roots.v0_estimate);
  res.check("at least 3 roots with Re in (-1.2, -0.9)", chain >= 3, std::to_string(chain) + " found");
  res.check("v0 estimate < 0", roots.v0_estimate < 0.0, fmt(roots.v0_estimate));
  res.artifacts.emplace_back("roots.csv", roots_csv(spec, roots));
  const double kappa = total_variation(rho);
  res.metric("kappa", kappa);
  res.check("Var(rho) < 1/2", kappa < 0.5, fmt(kappa));

  const double dt = p["dt"];
  const auto model = ModelSpec::neutral_diffusion(mu, rho, DiffusionFunctional::affine_integral(p["a"]));
  const std::size_t n = steps_per_horizon(1.0, dt);
  stationarity_checks(res, model, Segment::constant(1.0, n, 1.0), Segment::constant(1.0, n, -1.0), p["T"], dt,
                      p.count("replicas"), seed);
  return res;
}

inline ExperimentResult thm51(const Overrides& o, std::uint64_t seed) {
  const Params p(o, {{"replicas", 2000}, {"T", 200}, {"dt", 0.01}, {"alpha", 1.5}});
  ExperimentResult res{"thm51", {}, {}, {}};
  const double dt = p["dt"], T = p["T"];
  const std::size_t R = p.count("replicas");
  const auto mu = SignedMeasure::dirac(1.0, -1.0, -1.0);
  const auto xi = Segment::constant(1.0, steps_per_horizon(1.0, dt), 1.0);

  const auto cp = ModelSpec::levy_ou(mu, NoiseSpec::compound_poisson(1.0, JumpLaw::exponential(1.0)));
  const auto m1 = segment_moment_bound(cp, xi, T, dt, R, seed, 1);
  res.metric("cp_long_run_mean", m1.long_run_mean);
  res.check("compound Poisson: E|X| Bounded", m1.verdict == MomentVerdict::Bounded,
            "rise " + fmt(m1.last_quarter_rise) + " vs allowance " + fmt(m1.allowance));
  res.check("compound Poisson: stationary mean 1.0 +/- 5%", std::abs(m1.long_run_mean - 1.0) <= 0.05,
            fmt(m1.long_run_mean));
  res.artifacts.emplace_back("moments_compound_poisson.csv", moments_csv(m1));

  const auto st = ModelSpec::levy_ou(mu, NoiseSpec::alpha_stable(p["alpha"], 1.0));
  const auto m2 = segment_moment_bound(st, xi, T, dt, R, seed, 1);
  res.check("alpha-stable: E|X| Bounded", m2.verdict == MomentVerdict::Bounded,
            "rise " + fmt(m2.last_quarter_rise) + " vs allowance " + fmt(m2.allowance));
  const std::size_t k_st = std::max<std::size_t>(10, m2.late_samples.size() / 50);
  const std::size_t k_cp = std::max<std::size_t>(10, m1.late_samples.size() / 50);
  const double hill_st = hill_tail_index(m2.late_samples, k_st);
  const double hill_cp = hill_tail_index(m1.late_samples, k_cp);
  res.metric("stable_tail_index", hill_st);
  res.metric("cp_tail_index", hill_cp);
  res.metric("stable_max_square_share", max_square_share(m2.late_samples));
  res.metric("cp_max_square_share", max_square_share(m1.late_samples));
  res.check("alpha-stable: tail index < 2 (infinite variance)", hill_st < 2.0, fmt(hill_st));
  res.check("compound Poisson: tail index > 2 (finite variance)", hill_cp > 2.0, fmt(hill_cp));
  res.artifacts.emplace_back("moments_alpha_stable.csv", moments_csv(m2));
  return res;
}

inline ExperimentResult thm54(const Overrides& o, std::uint64_t seed) {
  const Params p(o, {{"replicas", 4000}, {"T", 60}, {"dt", 0.01}, {"slope", 0.1}});
  ExperimentResult res{"thm54", {}, {}, {}};
  const double dt = p["dt"];
  const auto noise = NoiseSpec::brownian_plus_compound_poisson(0.0, 1.0, JumpLaw::normal(1.0));
  res.check("noise has a finite second moment", noise.second_moment_condition());
  const auto model = ModelSpec::levy_multiplicative(SignedMeasure::dirac(1.0, -1.0, -1.0),
                                                    DiffusionFunctional::affine_endpoint(0.0, p["slope"], 1.0), noise);
  const std::size_t n = steps_per_horizon(1.0, dt);
  stationarity_checks(res, model, Segment::constant(1.0, n, 1.0), Segment::constant(1.0, n, -1.0), p["T"], dt,
                      p.count("replicas"), seed);
  return res;
}

inline ExperimentResult ou_closed_form(const Overrides& o, std::uint64_t seed) {
  const Params p(o, {{"a", -1.0}, {"replicas", 10000}, {"T", 50}, {"dt", 0.01}});
  ExperimentResult res{"ou_closed_form", {}, {}, {}};
  const double a = p["a"], dt = p["dt"];
  if (!(a < 0.0)) throw DomainError("ou_closed_form needs a < 0");
  const auto model = ModelSpec::retarded_diffusion(SignedMeasure::dirac(1.0, 0.0, a), DiffusionFunctional::constant(1.0));
  const auto laws = sample_marginals(model, Segment::constant(1.0, steps_per_horizon(1.0, dt), 0.0), {snap(p["T"], dt)},
                                     {0.0}, dt, p.count("replicas"), seed);
  const auto x = laws.front().column(0);
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= n - 1.0;
  const double target = 1.0 / (2.0 * std::abs(a));
  const double ks = ks_statistic(x, [&](double v) { return normal_cdf(v, 0.0, std::sqrt(target)); });
  const double crit = ks_critical_1pct(x.size());
  res.metric("variance", var);
  res.metric("ks", ks);
  res.metric("ks_critical", crit);
  res.check("terminal variance within 5% of 1/(2|a|)", std::abs(var - target) <= 0.05 * target, fmt(var));
  res.check("KS against N(0, 1/(2|a|)) below the 1% critical value", ks < crit, fmt(ks) + " vs " + fmt(crit));
  CsvWriter w({"replica", "x"});
  for (std::size_t k = 0; k < x.size(); ++k) w.row(k, x[k]);
  res.artifacts.emplace_back("terminal.csv", w.str());
  return res;
}

}  // namespace detail

inline std::vector<std::string> experiment_names() {
  return {"ex36", "ex38", "ex43", "thm51", "thm54", "ou_closed_form"};
}

inline ExperimentResult run_named_experiment(std::string_view name, const Overrides& overrides, std::uint64_t seed) {
  if (name == "ex36") return detail::ex36(overrides, seed);
  if (name == "ex38") return detail::ex38(overrides, seed);
  if (name == "ex43") return detail::ex43(overrides, seed);
  if (name == "thm51") return detail::thm51(overrides, seed);
  if (name == "thm54") return detail::thm54(overrides, seed);
  if (name == "ou_closed_form") return detail::ou_closed_form(overrides, seed);
  throw DomainError("unknown experiment '" + std::string(name) + "'");
}

}  // namespace retard

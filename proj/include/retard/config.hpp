#pragma once

// Line-oriented run configuration:
//
//   # comment
//   model.kind = retarded_diffusion
//   model.mu.atom = -1.0 @ -1.0          weight @ theta, repeatable
//   model.mu.density = 1.0 on [-1, 0]    repeatable
//   model.sigma.form = affine_endpoint
//   model.sigma.slope = 0.1
//   run.dt = 0.01
//
// parse_config reports every problem it finds, each tagged with its line.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "retard/errors.hpp"
#include "retard/measures.hpp"
#include "retard/noise.hpp"
#include "retard/simulate.hpp"

namespace retard {

// A named initial segment: constant c | linear a b | sine amp omega [phase] |
// cosine amp omega | values v_0 ... v_m (equally spaced on [-tau, 0]).
struct SegmentPreset {
  std::string kind = "constant";
  std::vector<double> params{1.0};

  Segment build(double tau, std::size_t n) const {
    if (kind == "constant") return Segment::constant(tau, n, params.at(0));
    if (kind == "linear") return Segment::linear(tau, n, params.at(0), params.at(1));
    if (kind == "sine") return Segment::sine(tau, n, params.at(0), params.at(1), params.size() > 2 ? params[2] : 0.0);
    if (kind == "cosine") {
      return Segment::sine(tau, n, params.at(0), params.at(1), std::numbers::pi / 2.0);
    }
    if (kind == "values") {
      const Segment coarse(tau, params);
      return Segment::from_function(tau, n, [&](double th) { return segment_eval(coarse, th); });
    }
    throw DomainError("unknown segment preset '" + kind + "'");
  }
};

struct RunConfig {
  ModelSpec model;
  double tau = 1.0;
  double T = 10.0;
  double dt = 0.01;
  std::size_t replicas = 1000;
  std::uint64_t seed = 1;
  std::vector<double> checkpoints;
  std::vector<double> offsets;
  SegmentPreset xi;
  SegmentPreset eta{"constant", {0.0}};
  std::string output_dir = ".";
  std::string output_format = "csv";

  std::size_t lag_steps() const { return steps_per_horizon(tau, dt); }
  Segment initial_xi() const { return xi.build(tau, lag_steps()); }
  Segment initial_eta() const { return eta.build(tau, lag_steps()); }
};

struct ConfigError {
  std::size_t line = 0;  // 0 when the problem is not tied to one line
  std::string message;

  std::string str() const { return line ? "line " + std::to_string(line) + ": " + message : message; }
};

struct ParseOutcome {
  std::optional<RunConfig> config;
  std::vector<ConfigError> errors;

  bool ok() const { return config.has_value() && errors.empty(); }
};

class ConfigInvalid : public DomainError {
 public:
  explicit ConfigInvalid(std::vector<ConfigError> errors)
      : DomainError(join(errors)), errors_(std::move(errors)) {}
  const std::vector<ConfigError>& errors() const { return errors_; }

 private:
  static std::string join(const std::vector<ConfigError>& errors) {
    std::string s;
    for (const auto& e : errors) s += (s.empty() ? "" : "\n") + e.str();
    return s;
  }
  std::vector<ConfigError> errors_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::optional<double> to_number(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t k = 0; k <= s.size(); ++k) {
    if (k == s.size() || s[k] == ',' || s[k] == ' ' || s[k] == '\t') {
      const auto piece = trim(s.substr(start, k - start));
      if (!piece.empty()) out.push_back(piece);
      start = k + 1;
    }
  }
  return out;
}

struct Entry {
  std::size_t line;
  std::string value;
};

class ConfigReader {
 public:
  explicit ConfigReader(std::string_view text) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const auto nl = text.find('\n', pos);
      std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
      ++line_no;
      pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
      if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) {
        error(line_no, "expected 'key = value', got '" + std::string(line) + "'");
        continue;
      }
      const std::string key(trim(line.substr(0, eq)));
      const std::string value(trim(line.substr(eq + 1)));
      if (!known(key)) {
        error(line_no, "unknown key '" + key + "'");
        continue;
      }
      if (value.empty()) {
        error(line_no, "key '" + key + "' has no value");
        continue;
      }
      if (!repeatable(key) && entries_.count(key)) {
        error(line_no, "key '" + key + "' repeated (first set on line " +
                           std::to_string(entries_[key].front().line) + ")");
        continue;
      }
      entries_[key].push_back({line_no, value});
    }
  }

  const std::vector<Entry>* all(const std::string& key) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second;
  }
  const Entry* get(const std::string& key) const {
    const auto* v = all(key);
    return v ? &v->front() : nullptr;
  }
  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  std::optional<double> number(const std::string& key) {
    const auto* e = get(key);
    if (!e) return std::nullopt;
    const auto v = to_number(e->value);
    if (!v) error(e->line, "'" + key + "' expects a number, got '" + e->value + "'");
    return v;
  }

  std::optional<std::string> text(const std::string& key) const {
    const auto* e = get(key);
    return e ? std::optional<std::string>(e->value) : std::nullopt;
  }

  std::size_t line_of(const std::string& key) const {
    const auto* e = get(key);
    return e ? e->line : 0;
  }

  void error(std::size_t line, std::string msg) { errors_.push_back({line, std::move(msg)}); }
  std::vector<ConfigError>& errors() { return errors_; }

 private:
  static bool repeatable(const std::string& key) {
    return key.ends_with(".atom") || key.ends_with(".density");
  }

  static bool known(const std::string& key) {
    static const std::set<std::string> keys = {
        "model.kind",        "model.tau",          "model.mu.atom",      "model.mu.density",
        "model.rho.atom",    "model.rho.density",  "model.sigma.form",   "model.sigma.level",
        "model.sigma.slope", "model.sigma.lag",    "model.sigma.bound",  "noise.kind",
        "noise.rate",        "noise.jump",         "noise.jump_mean",    "noise.jump_sd",
        "noise.jump_alpha",  "noise.jump_xmin",    "noise.alpha",        "noise.scale",
        "noise.drift",       "run.T",              "run.dt",             "run.replicas",
        "run.seed",          "run.checkpoints",    "run.offsets",        "init.xi",
        "init.eta",          "output.dir",         "output.format"};
    return keys.count(key) > 0;
  }

  std::map<std::string, std::vector<Entry>> entries_;
  std::vector<ConfigError> errors_;
};

struct MeasureParts {
  std::vector<Atom> atoms;
  std::vector<DensityPiece> density;
  double depth = 0.0;
  bool any = false;
};

inline MeasureParts read_measure(ConfigReader& r, const std::string& prefix) {
  MeasureParts m;
  if (const auto* atoms = r.all(prefix + ".atom")) {
    for (const auto& e : *atoms) {
      const auto at = e.value.find('@');
      const auto w = at == std::string::npos ? std::nullopt : to_number(std::string_view(e.value).substr(0, at));
      const auto th = at == std::string::npos ? std::nullopt : to_number(std::string_view(e.value).substr(at + 1));
      if (!w || !th) {
        r.error(e.line, prefix + ".atom expects 'weight @ theta', got '" + e.value + "'");
        continue;
      }
      if (*th > 0.0) {
        r.error(e.line, prefix + ".atom location must be <= 0");
        continue;
      }
      m.atoms.push_back({*th, *w});
      m.depth = std::max(m.depth, -*th);
      m.any = true;
    }
  }
  if (const auto* dens = r.all(prefix + ".density")) {
    for (const auto& e : *dens) {
      const std::string_view v(e.value);
      const auto on = v.find(" on ");
      const auto lb = v.find('['), rb = v.find(']'), comma = v.find(',');
      std::optional<double> val, lo, hi;
      if (on != std::string_view::npos && lb != std::string_view::npos && rb != std::string_view::npos &&
          comma != std::string_view::npos && lb < comma && comma < rb) {
        val = to_number(v.substr(0, on));
        lo = to_number(v.substr(lb + 1, comma - lb - 1));
        hi = to_number(v.substr(comma + 1, rb - comma - 1));
      }
      if (!val || !lo || !hi) {
        r.error(e.line, prefix + ".density expects 'value on [lo, hi]', got '" + e.value + "'");
        continue;
      }
      if (!(*lo < *hi) || *hi > 0.0) {
        r.error(e.line, prefix + ".density interval must satisfy lo < hi <= 0");
        continue;
      }
      m.density.push_back({*lo, *hi, *val});
      m.depth = std::max(m.depth, -*lo);
      m.any = true;
    }
  }
  return m;
}

inline std::optional<SegmentPreset> read_preset(ConfigReader& r, const std::string& key) {
  const auto* e = r.get(key);
  if (!e) return std::nullopt;
  const auto parts = split_list(e->value);
  SegmentPreset p;
  p.kind = std::string(parts.front());
  p.params.clear();
  for (std::size_t k = 1; k < parts.size(); ++k) {
    const auto v = to_number(parts[k]);
    if (!v) {
      r.error(e->line, key + ": '" + std::string(parts[k]) + "' is not a number");
      return std::nullopt;
    }
    p.params.push_back(*v);
  }
  const std::map<std::string, std::pair<std::size_t, std::size_t>> arity = {
      {"constant", {1, 1}}, {"linear", {2, 2}}, {"sine", {2, 3}}, {"cosine", {2, 2}}, {"values", {2, 1u << 30}}};
  const auto it = arity.find(p.kind);
  if (it == arity.end()) {
    r.error(e->line, key + ": unknown preset '" + p.kind + "' (constant, linear, sine, cosine, values)");
    return std::nullopt;
  }
  if (p.params.size() < it->second.first || p.params.size() > it->second.second) {
    r.error(e->line, key + ": wrong number of parameters for '" + p.kind + "'");
    return std::nullopt;
  }
  return p;
}

inline std::optional<std::vector<double>> read_list(ConfigReader& r, const std::string& key) {
  const auto* e = r.get(key);
  if (!e) return std::nullopt;
  std::vector<double> out;
  for (auto piece : split_list(e->value)) {
    const auto v = to_number(piece);
    if (!v) {
      r.error(e->line, key + ": '" + std::string(piece) + "' is not a number");
      return std::nullopt;
    }
    out.push_back(*v);
  }
  return out;
}

inline bool grid_aligned(double x, double dt) {
  const double k = x / dt;
  return std::abs(k - std::round(k)) <= 1e-7 * std::max(1.0, std::abs(k));
}

}  // namespace detail

inline ParseOutcome parse_config(std::string_view text) {
  detail::ConfigReader r(text);
  RunConfig cfg;

  // Model kind.
  std::optional<ModelKind> kind;
  if (const auto k = r.text("model.kind")) {
    static const std::map<std::string, ModelKind> kinds = {{"retarded_diffusion", ModelKind::retarded_diffusion},
                                                           {"neutral_diffusion", ModelKind::neutral_diffusion},
                                                           {"levy_ou", ModelKind::levy_ou},
                                                           {"levy_multiplicative", ModelKind::levy_multiplicative}};
    if (const auto it = kinds.find(*k); it != kinds.end()) {
      kind = it->second;
    } else {
      r.error(r.line_of("model.kind"), "unknown model.kind '" + *k + "'");
    }
  } else {
    r.error(0, "missing required key 'model.kind'");
  }

  const auto mu = detail::read_measure(r, "model.mu");
  const auto rho = detail::read_measure(r, "model.rho");

  // Diffusion functional.
  DiffusionFunctional sigma = DiffusionFunctional::constant(0.0);
  bool sigma_given = false;
  const auto level = r.number("model.sigma.level");
  const auto slope = r.number("model.sigma.slope");
  const auto lag = r.number("model.sigma.lag");
  const auto bound = r.number("model.sigma.bound");
  if (const auto form = r.text("model.sigma.form")) {
    sigma_given = true;
    const std::size_t line = r.line_of("model.sigma.form");
    try {
      if (*form == "constant") {
        sigma = DiffusionFunctional::constant(level.value_or(0.0));
      } else if (*form == "affine_endpoint") {
        sigma = DiffusionFunctional::affine_endpoint(level.value_or(0.0), slope.value_or(0.0), lag.value_or(mu.depth));
      } else if (*form == "affine_integral") {
        sigma = DiffusionFunctional::affine_integral(slope.value_or(0.0));
      } else if (*form == "bounded_saturating") {
        sigma = DiffusionFunctional::bounded_saturating(bound.value_or(1.0), lag.value_or(mu.depth));
      } else {
        r.error(line, "unknown model.sigma.form '" + *form + "'");
      }
    } catch (const DomainError& e) {
      r.error(line, e.what());
    }
  } else if (r.has("model.sigma.level") || r.has("model.sigma.slope") || r.has("model.sigma.lag") ||
             r.has("model.sigma.bound")) {
    r.error(0, "model.sigma.* parameters given without model.sigma.form");
  }

  // Noise.
  NoiseSpec noise = NoiseSpec::brownian();
  bool noise_given = false;
  if (const auto nk = r.text("noise.kind")) {
    noise_given = true;
    const std::size_t line = r.line_of("noise.kind");
    auto jump_law = [&]() -> std::optional<JumpLaw> {
      const auto j = r.text("noise.jump");
      if (!j) {
        r.error(line, "noise.kind '" + *nk + "' needs noise.jump");
        return std::nullopt;
      }
      const std::size_t jl = r.line_of("noise.jump");
      try {
        if (*j == "exponential") return JumpLaw::exponential(r.number("noise.jump_mean").value_or(1.0));
        if (*j == "normal") return JumpLaw::normal(r.number("noise.jump_sd").value_or(1.0));
        if (*j == "pareto") {
          return JumpLaw::pareto(r.number("noise.jump_alpha").value_or(2.5), r.number("noise.jump_xmin").value_or(1.0));
        }
        r.error(jl, "unknown noise.jump '" + *j + "' (exponential, normal, pareto)");
      } catch (const DomainError& e) {
        r.error(jl, e.what());
      }
      return std::nullopt;
    };
    try {
      if (*nk == "brownian") {
        noise = NoiseSpec::brownian();
      } else if (*nk == "compound_poisson") {
        if (const auto law = jump_law()) noise = NoiseSpec::compound_poisson(r.number("noise.rate").value_or(1.0), *law);
      } else if (*nk == "alpha_stable") {
        const auto a = r.number("noise.alpha");
        if (!a) {
          r.error(line, "noise.kind 'alpha_stable' needs noise.alpha");
        } else {
          noise = NoiseSpec::alpha_stable(*a, r.number("noise.scale").value_or(1.0));
        }
      } else if (*nk == "brownian_plus_compound_poisson") {
        if (const auto law = jump_law()) {
          noise = NoiseSpec::brownian_plus_compound_poisson(r.number("noise.drift").value_or(0.0),
                                                            r.number("noise.rate").value_or(1.0), *law);
        }
      } else {
        r.error(line, "unknown noise.kind '" + *nk + "'");
      }
    } catch (const DomainError& e) {
      r.error(line, e.what());
    }
  }

  // Horizon.
  const auto tau_in = r.number("model.tau");
  const double depth = std::max({mu.depth, rho.depth, sigma.reach()});
  cfg.tau = tau_in ? *tau_in : (depth > 0.0 ? depth : 1.0);
  if (tau_in && !(*tau_in > 0.0)) r.error(r.line_of("model.tau"), "model.tau must be positive");
  if (tau_in && depth > *tau_in * (1.0 + 1e-12)) {
    r.error(r.line_of("model.tau"), "model.tau is shorter than the deepest delay in model.mu/rho/sigma");
  }

  // Run section.
  if (const auto T = r.number("run.T")) {
    cfg.T = *T;
    if (!(*T > 0.0)) r.error(r.line_of("run.T"), "run.T must be positive");
  } else if (!r.has("run.T")) {
    r.error(0, "missing required key 'run.T'");
  }
  bool dt_ok = false;
  if (const auto dt = r.number("run.dt")) {
    cfg.dt = *dt;
    if (!(*dt > 0.0)) {
      r.error(r.line_of("run.dt"), "run.dt must be positive");
    } else if (cfg.tau > 0.0 && !detail::grid_aligned(cfg.tau, *dt)) {
      std::ostringstream msg;
      msg << "run.dt = " << *dt << " does not divide model.tau = " << cfg.tau
          << (tau_in ? "" : " (derived from the deepest delay)");
      r.error(r.line_of("run.dt"), msg.str());
    } else {
      dt_ok = true;
    }
  } else if (!r.has("run.dt")) {
    r.error(0, "missing required key 'run.dt'");
  }
  if (dt_ok && sigma.reach() > 0.0 && !detail::grid_aligned(sigma.reach(), cfg.dt)) {
    r.error(r.line_of("model.sigma.lag"), "model.sigma.lag is not a multiple of run.dt");
  }
  if (const auto rep = r.number("run.replicas")) {
    if (!(*rep >= 1.0) || *rep != std::floor(*rep)) {
      r.error(r.line_of("run.replicas"), "run.replicas must be a positive integer");
    } else {
      cfg.replicas = static_cast<std::size_t>(*rep);
    }
  }
  if (const auto* e = r.get("run.seed")) {
    std::uint64_t s = 0;
    const auto [p, ec] = std::from_chars(e->value.data(), e->value.data() + e->value.size(), s);
    if (ec != std::errc{} || p != e->value.data() + e->value.size()) {
      r.error(e->line, "run.seed expects an unsigned 64-bit integer");
    } else {
      cfg.seed = s;
    }
  }
  if (const auto cps = detail::read_list(r, "run.checkpoints")) {
    cfg.checkpoints = *cps;
    const std::size_t line = r.line_of("run.checkpoints");
    for (std::size_t k = 0; k < cps->size(); ++k) {
      if ((*cps)[k] < 0.0 || (*cps)[k] > cfg.T * (1.0 + 1e-12)) r.error(line, "run.checkpoints must lie in [0, run.T]");
      if (k > 0 && !((*cps)[k] > (*cps)[k - 1])) r.error(line, "run.checkpoints must increase");
      if (dt_ok && !detail::grid_aligned((*cps)[k], cfg.dt)) r.error(line, "run.checkpoints must be multiples of run.dt");
    }
  }
  if (const auto offs = detail::read_list(r, "run.offsets")) {
    cfg.offsets = *offs;
    const std::size_t line = r.line_of("run.offsets");
    for (double o : *offs) {
      if (o > 0.0 || o < -cfg.tau * (1.0 + 1e-12)) r.error(line, "run.offsets must lie in [-tau, 0]");
      if (dt_ok && !detail::grid_aligned(o, cfg.dt)) r.error(line, "run.offsets must be multiples of run.dt");
    }
  }
  if (const auto p = detail::read_preset(r, "init.xi")) cfg.xi = *p;
  if (const auto p = detail::read_preset(r, "init.eta")) cfg.eta = *p;
  if (const auto d = r.text("output.dir")) cfg.output_dir = *d;
  if (const auto f = r.text("output.format")) {
    if (*f != "csv" && *f != "json") r.error(r.line_of("output.format"), "output.format must be csv or json");
    cfg.output_format = *f;
  }

  // Kind-specific presence.
  if (kind) {
    const bool neutral = *kind == ModelKind::neutral_diffusion;
    const bool diffusion = *kind == ModelKind::retarded_diffusion || neutral;
    if (!mu.any) r.error(0, "missing required key 'model.mu.atom' or 'model.mu.density'");
    if (neutral && !rho.any) r.error(0, "neutral_diffusion needs model.rho.atom or model.rho.density");
    if (!neutral && rho.any) r.error(r.line_of(r.has("model.rho.atom") ? "model.rho.atom" : "model.rho.density"),
                                     "model.rho is only allowed for neutral_diffusion");
    if (diffusion && !sigma_given) r.error(0, "missing required key 'model.sigma.form'");
    if (diffusion && noise_given && noise.kind != NoiseKind::brownian) {
      r.error(r.line_of("noise.kind"), "diffusion models take noise.kind = brownian");
    }
    if (*kind == ModelKind::levy_ou && sigma_given) {
      r.error(r.line_of("model.sigma.form"), "levy_ou takes no model.sigma (the noise enters additively)");
    }
    if (!diffusion && !noise_given) r.error(0, "missing required key 'noise.kind'");
    if (*kind == ModelKind::levy_multiplicative && !sigma_given) r.error(0, "missing required key 'model.sigma.form'");
  }

  ParseOutcome out;
  if (r.errors().empty() && kind) {
    try {
      const SignedMeasure mu_m(cfg.tau, mu.atoms, mu.density);
      switch (*kind) {
        case ModelKind::retarded_diffusion: cfg.model = ModelSpec::retarded_diffusion(mu_m, sigma); break;
        case ModelKind::neutral_diffusion:
          cfg.model = ModelSpec::neutral_diffusion(mu_m, SignedMeasure(cfg.tau, rho.atoms, rho.density), sigma);
          break;
        case ModelKind::levy_ou: cfg.model = ModelSpec::levy_ou(mu_m, noise); break;
        case ModelKind::levy_multiplicative: cfg.model = ModelSpec::levy_multiplicative(mu_m, sigma, noise); break;
      }
      const std::size_t n = cfg.lag_steps();
      if (cfg.offsets.empty()) {
        cfg.offsets = {0.0, -static_cast<double>(n / 2) * cfg.dt, -cfg.tau};
      }
      if (cfg.checkpoints.empty()) {
        const std::size_t N = detail::horizon_steps(cfg.T, cfg.dt);
        for (std::size_t k = 1; k <= 8; ++k) cfg.checkpoints.push_back(static_cast<double>(N * k / 8) * cfg.dt);
      }
      (void)cfg.initial_xi();
      (void)cfg.initial_eta();
      out.config = std::move(cfg);
    } catch (const Error& e) {
      r.error(0, e.what());
    }
  }
  out.errors = std::move(r.errors());
  return out;
}

inline RunConfig parse_config_or_throw(std::string_view text) {
  auto out = parse_config(text);
  if (!out.ok()) throw ConfigInvalid(std::move(out.errors));
  return std::move(*out.config);
}

}  // namespace retard

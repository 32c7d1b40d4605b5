#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "retard/retard.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace retard;

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool strict = false;
  bool json_out = false;
};

RunConfig load(const Globals& g) {
  if (g.config_path.empty()) throw DomainError("this subcommand needs --config <file>");
  auto out = parse_config(read_text_file(g.config_path));
  if (!out.ok()) {
    std::string msg = g.config_path + ": invalid configuration";
    for (const auto& e : out.errors) msg += "\n  " + e.str();
    throw DomainError(msg);
  }
  auto cfg = std::move(*out.config);
  if (g.seed) cfg.seed = *g.seed;
  return cfg;
}

fs::path out_dir(const Globals& g, const RunConfig* cfg) {
  if (!g.out_dir.empty()) return g.out_dir;
  return cfg ? fs::path(cfg->output_dir) : fs::path(".");
}

json complex_json(Complex z) { return json{{"re", z.real()}, {"im", z.imag()}}; }

CharSpec char_spec(const ModelSpec& m) {
  return m.rho ? CharSpec::neutral(*m.rho, m.mu) : CharSpec::retarded(m.mu);
}

int cmd_roots(const Globals& g, int count) {
  const auto cfg = load(g);
  const auto spec = char_spec(cfg.model);
  const auto rep = rightmost_roots(spec, count);
  json j;
  j["roots"] = json::array();
  for (const auto& z : rep.roots) {
    auto e = complex_json(z);
    e["residual"] = std::abs(characteristic(spec, z).value);
    j["roots"].push_back(e);
  }
  j["v0_estimate"] = rep.v0_estimate;
  j["certified_negative"] = rep.certified_negative;
  j["complete"] = rep.complete;
  if (rep.essential_abscissa) j["essential_abscissa"] = *rep.essential_abscissa;
  j["box"] = {rep.box.re_lo, rep.box.re_hi, rep.box.im_lo, rep.box.im_hi};
  if (g.json_out) {
    std::cout << j.dump(2) << '\n';
  } else {
    std::printf("%4s %24s %24s %10s\n", "#", "re", "im", "residual");
    for (std::size_t k = 0; k < rep.roots.size(); ++k) {
      std::printf("%4zu %24.17g %24.17g %10.2e\n", k, rep.roots[k].real(), rep.roots[k].imag(),
                  std::abs(characteristic(spec, rep.roots[k]).value));
    }
    std::printf("v0 estimate        %.17g\n", rep.v0_estimate);
    if (rep.essential_abscissa) std::printf("essential abscissa %.17g\n", *rep.essential_abscissa);
    std::printf("certified negative %s\n", rep.certified_negative ? "yes" : "no");
    if (!rep.complete) std::printf("note: search box capped in |Im|; the list may miss far roots\n");
  }
  return rep.certified_negative ? 0 : 1;
}

int cmd_fundsol(const Globals& g, std::optional<double> T_flag, std::optional<double> dt_flag) {
  const auto cfg = load(g);
  const double T = T_flag.value_or(cfg.T), dt = dt_flag.value_or(cfg.dt);
  const auto& m = cfg.model;
  const auto r = m.rho ? fundamental_neutral(*m.rho, m.mu, T, dt) : fundamental_retarded(m.mu, T, dt);
  CsvWriter w({"t", "r"});
  for (long i = -static_cast<long>(r.lag_steps()); i <= static_cast<long>(r.steps()); ++i) {
    w.row(static_cast<double>(i) * dt, r[i]);
  }
  const auto dir = out_dir(g, &cfg);
  write_text_file(dir / "fundsol.csv", w.str());
  json j;
  if (r.steps() >= 5 * r.lag_steps()) {
    const auto fit = fit_decay(r);
    j["c"] = fit.c;
    j["gamma"] = fit.gamma;
  } else {
    j["fit"] = "skipped: horizon shorter than 5 tau";
  }
  write_text_file(dir / "fundsol.json", j.dump(2) + "\n");
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_voc(const Globals& g, bool identity, double tolerance) {
  const auto cfg = load(g);
  const auto& m = cfg.model;
  const auto xi = cfg.initial_xi();
  const auto dir = out_dir(g, &cfg);
  if (identity) {
    const auto gap = voc_identity_gap(m, xi, cfg.T, cfg.dt, cfg.seed);
    CsvWriter w({"t", "euler", "voc"});
    for (std::size_t k = 0; k < gap.euler.size(); ++k) {
      w.row(static_cast<double>(k) * cfg.dt, gap.euler[k], gap.rebuilt[k]);
    }
    write_text_file(dir / "voc_identity.csv", w.str());
    const bool pass = gap.rms < tolerance;
    json j{{"rms", gap.rms}, {"max_abs", gap.max_abs}, {"tolerance", tolerance}, {"pass", pass}};
    if (g.json_out) {
      std::cout << j.dump(2) << '\n';
    } else {
      std::printf("rms gap %.6e (max %.6e) tolerance %.3g: %s\n", gap.rms, gap.max_abs, tolerance,
                  pass ? "PASS" : "FAIL");
    }
    return pass ? 0 : 1;
  }
  const auto r = m.rho ? fundamental_neutral(*m.rho, m.mu, cfg.T, cfg.dt) : fundamental_retarded(m.mu, cfg.T, cfg.dt);
  const VocContext ctx(r, m.mu, m.rho, xi);
  CsvWriter w({"t", "x"});
  for (std::size_t i = 0; i <= r.steps(); ++i) {
    const double t = static_cast<double>(i) * cfg.dt;
    w.row(t, m.rho ? voc_neutral_deterministic(ctx, t) : voc_deterministic(ctx, t));
  }
  write_text_file(dir / "voc.csv", w.str());
  std::cout << "wrote " << (dir / "voc.csv").string() << '\n';
  return 0;
}

struct SimFlags {
  std::optional<double> T, dt;
  std::optional<std::size_t> replicas;
  std::string out;
  std::size_t thin = 1;
};

int cmd_simulate(const Globals& g, SimFlags f) {
  auto cfg = load(g);
  if (f.T) cfg.T = *f.T;
  if (f.dt) cfg.dt = *f.dt;
  if (f.replicas) cfg.replicas = *f.replicas;
  if (f.thin == 0) throw DomainError("--thin must be at least 1");
  const auto xi = cfg.initial_xi();
  CsvWriter w({"replica", "t", "x"});
  // Paths are produced in blocks so large runs do not hold every replica.
  const std::size_t block = 64;
  for (std::size_t start = 0; start < cfg.replicas; start += block) {
    const auto paths = simulate_replicas(cfg.model, xi, cfg.T, cfg.dt, std::min(block, cfg.replicas - start),
                                         cfg.seed, start);
    for (const auto& p : paths) {
      for (std::size_t k = 0; k < p.values.size(); k += f.thin) {
        w.row(p.replica, (static_cast<double>(k) - static_cast<double>(p.lag_steps)) * p.dt, p.values[k]);
      }
    }
  }
  const fs::path out = f.out.empty() ? out_dir(g, &cfg) / "paths.csv" : fs::path(f.out);
  write_text_file(out, w.str());
  std::cout << "wrote " << out.string() << '\n';
  return 0;
}

int cmd_stationarity(const Globals& g, int power) {
  const auto cfg = load(g);
  const auto xi = cfg.initial_xi(), eta = cfg.initial_eta();
  const auto& m = cfg.model;
  if (power == 0) {
    const bool second = m.kind == ModelKind::retarded_diffusion || m.kind == ModelKind::neutral_diffusion ||
                        m.noise.second_moment_condition();
    power = second ? 2 : 1;
  }
  const auto c = coupling_contraction(m, xi, eta, cfg.T, cfg.dt, cfg.replicas, cfg.seed);
  const auto mom = segment_moment_bound(m, xi, cfg.T, cfg.dt, cfg.replicas, cfg.seed, power);
  const auto conv =
      stationarity_convergence_test(m, xi, eta, cfg.checkpoints, cfg.dt, cfg.replicas, cfg.seed, cfg.offsets);

  CsvWriter w({"curve", "t", "value"});
  for (std::size_t k = 0; k < c.times.size(); ++k) w.row("msd", c.times[k], c.msd[k]);
  for (std::size_t k = 0; k < mom.times.size(); ++k) w.row("moment", mom.times[k], mom.moment[k]);
  for (std::size_t k = 0; k < mom.times.size(); ++k) w.row("running_max", mom.times[k], mom.running_max[k]);
  for (std::size_t k = 0; k < conv.consecutive.size(); ++k) {
    w.row("consecutive", conv.checkpoints[k + 1], conv.consecutive[k]);
  }
  for (std::size_t k = 0; k < conv.cross.size(); ++k) w.row("cross", conv.checkpoints[k], conv.cross[k]);
  for (std::size_t k = 0; k < conv.coupled.size(); ++k) w.row("coupled", conv.checkpoints[k], conv.coupled[k]);
  const auto dir = out_dir(g, &cfg);
  write_text_file(dir / "stationarity.csv", w.str());

  const bool contracting = c.fitted_rate < 0.0;
  const bool bounded = mom.verdict == MomentVerdict::Bounded;
  json j;
  j["coupling"] = {{"fitted_rate", c.fitted_rate}, {"fit_from", c.fit_from}, {"fit_to", c.fit_to},
                   {"contracting", contracting}};
  j["moment"] = {{"power", power},
                 {"verdict", to_string(mom.verdict)},
                 {"last_quarter_rise", mom.last_quarter_rise},
                 {"allowance", mom.allowance}};
  j["convergence"] = {{"floor", conv.floor},
                      {"consecutive", to_string(conv.consecutive_verdict)},
                      {"cross", to_string(conv.cross_verdict)},
                      {"coupled", to_string(conv.coupled_verdict)}};
  const bool all_ok = contracting && bounded && conv.all_converging();
  j["all_pass"] = all_ok;
  write_text_file(dir / "stationarity.json", j.dump(2) + "\n");
  std::cout << j.dump(2) << '\n';
  return g.strict && !all_ok ? 1 : 0;
}

int cmd_experiment(const Globals& g, const std::string& name, const std::vector<std::string>& params) {
  Overrides o;
  for (const auto& kv : params) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw DomainError("--param expects name=value, got '" + kv + "'");
    o[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
  }
  const auto res = run_named_experiment(name, o, g.seed.value_or(20240601));
  const auto dir = out_dir(g, nullptr) / name;
  for (const auto& [file, text] : res.artifacts) write_text_file(dir / file, text);
  json j;
  j["experiment"] = res.name;
  j["passed"] = res.passed();
  j["checks"] = json::array();
  j["failures"] = json::array();
  for (const auto& c : res.checks) {
    j["checks"].push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    if (!c.passed) j["failures"].push_back(c.name);
  }
  j["metrics"] = json::object();
  for (const auto& [k, v] : res.metrics) j["metrics"][k] = v;
  write_text_file(dir / "summary.json", j.dump(2) + "\n");
  if (g.json_out) {
    std::cout << j.dump(2) << '\n';
  } else {
    for (const auto& c : res.checks) {
      std::printf("%s  %s%s%s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.detail.empty() ? "" : "  ",
                  c.detail.c_str());
    }
    std::printf("%s: %s (artifacts in %s)\n", name.c_str(), res.passed() ? "PASS" : "FAIL", dir.string().c_str());
  }
  return res.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stationary behaviour of retarded and neutral stochastic delay equations"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "run configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "override the configured seed");
  app.add_option("--out-dir", g.out_dir, "directory for CSV/JSON output");
  app.add_flag("--strict", g.strict, "nonzero exit when any verdict fails");
  app.add_flag("--json", g.json_out, "print JSON instead of a table");

  auto* roots = app.add_subcommand("roots", "rightmost characteristic roots");
  int count = 6;
  roots->add_option("--count", count, "number of roots to report")->check(CLI::PositiveNumber);

  auto* fund = app.add_subcommand("fundsol", "fundamental solution and its decay fit");
  std::optional<double> fT, fdt;
  fund->add_option("--T", fT, "horizon");
  fund->add_option("--dt", fdt, "step");

  auto* voc = app.add_subcommand("voc", "deterministic solve by variation of constants");
  bool identity = false;
  double tolerance = 0.02;
  voc->add_flag("--identity", identity, "compare an Euler path with its reconstruction");
  voc->add_option("--tol", tolerance, "RMS tolerance for --identity");

  auto* sim = app.add_subcommand("simulate", "Euler-Maruyama paths");
  SimFlags sf;
  sim->add_option("--T", sf.T, "horizon");
  sim->add_option("--dt", sf.dt, "step");
  sim->add_option("--replicas", sf.replicas, "number of replicas");
  sim->add_option("--out", sf.out, "output CSV (replica,t,x)");
  sim->add_option("--thin", sf.thin, "emit every k-th grid point");

  auto* stat = app.add_subcommand("stationarity", "coupling, moment and convergence diagnostics");
  int power = 0;
  stat->add_option("--power", power, "moment power (1 or 2; default picks by noise)")->check(CLI::IsMember({1, 2}));

  auto* exp = app.add_subcommand("experiment", "run a named scenario");
  std::string name;
  std::vector<std::string> params;
  exp->add_option("name", name, "scenario name")->required()->check(CLI::IsMember(experiment_names()));
  exp->add_option("--param", params, "override name=value");

  for (auto* sub : {roots, fund, voc, sim, stat, exp}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*roots) return cmd_roots(g, count);
    if (*fund) return cmd_fundsol(g, fT, fdt);
    if (*voc) return cmd_voc(g, identity, tolerance);
    if (*sim) return cmd_simulate(g, sf);
    if (*stat) return cmd_stationarity(g, power);
    if (*exp) return cmd_experiment(g, name, params);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

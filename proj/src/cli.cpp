#include "skt/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace skt {

namespace {

enum Exit { kOk = 0, kConfig = 1, kNumerical = 2, kSelftest = 3 };

struct Source {
  std::string config;
  std::string preset;
  double param = std::numeric_limits<double>::quiet_NaN();

  void attach(CLI::App* app) {
    app->add_option("config", config, "scenario file (JSON)");
    app->add_option("--preset", preset, "use a shipped preset instead of a file");
    app->add_option("--param", param, "preset parameter (cyclic3: a_ii)");
  }

  ScenarioConfig load() const {
    if (!config.empty() && !preset.empty())
      throw ConfigError("give either a config file or --preset, not both");
    if (!preset.empty())
      return preset_config(preset, std::isnan(param) ? std::nullopt : std::optional<double>(param));
    if (config.empty()) throw ConfigError("a config file or --preset is required");
    return load_config(config);
  }
};

void print_presets() {
  for (const auto& p : scenario_presets()) std::printf("  %-22s %s\n", p.name.c_str(), p.description.c_str());
}

int do_simulate(const Source& src, const std::string& diag, const std::string& field) {
  ScenarioConfig cfg = src.load();
  if (!diag.empty()) cfg.output.diagnostics = diag;
  if (!field.empty()) cfg.output.field = field;
  const auto o = simulate(cfg);
  const auto& s = o.summary;
  std::printf("scenario %s: t = %.6g, %ld steps (%ld rejected)\n", cfg.label.c_str(), s.final_time,
              s.accepted_steps, s.rejected_steps);
  std::printf("kappa = %.10g, entropy check failures = %ld\n", o.weights.kappa, s.entropy_failures);
  if (!o.rows.empty()) {
    const auto& last = o.rows.back();
    std::printf("final entropy = %.10g, dissipation = %.6g, H_eta = %.6g\n", last.entropy,
                last.dissipation, last.h_eta);
  }
  if (!cfg.output.diagnostics.empty()) std::printf("diagnostics: %s\n", cfg.output.diagnostics.c_str());
  if (!cfg.output.field.empty()) std::printf("final state: %s\n", cfg.output.field.c_str());
  return s.entropy_failures == 0 ? kOk : kNumerical;
}

int do_check(const Source& src) {
  const ScenarioConfig cfg = src.load();
  std::cout << format_report(check_coefficients(cfg.coefficients()));
  return kOk;
}

int do_sweep(const std::string& family, double a_min, double a_max, int steps) {
  if (family != "cyclic3") throw ConfigError("sweep: unknown family '" + family + "' (expected cyclic3)");
  const auto r = sweep_cyclic3(a_min, a_max, steps, thread_count());
  std::printf("%-14s %-8s %-8s %s\n", "a", "lp", "closed", "kappa");
  for (const auto& p : r.points)
    std::printf("%-14.10f %-8s %-8s %.6g\n", p.a, p.lp_feasible ? "yes" : "no",
                p.closed_form_feasible ? "yes" : "no", p.kappa);
  if (r.lp_threshold)
    std::printf("threshold (lp): %.10f\n", *r.lp_threshold);
  else
    std::printf("threshold (lp): none in range\n");
  if (r.closed_form_threshold)
    std::printf("threshold (closed form): %.12f\n", *r.closed_form_threshold);
  else
    std::printf("threshold (closed form): none in range\n");
  return kOk;
}

int do_dereg(const Source& src, const std::vector<double>& eps_list, double t_end,
             const std::string& out) {
  const ScenarioConfig cfg = src.load();
  const double horizon = t_end > 0.0 ? t_end : cfg.t_end;
  const auto table = deregularization_study(make_initial(cfg.initial, cfg.grid.make(), cfg.species()),
                                            cfg.coefficients(), resolve_weights(cfg), cfg.scheme,
                                            eps_list, horizon, thread_count());
  std::ostringstream os;
  os << "# skt-dereg v1\neps_a,eps_b,distance\n";
  for (std::size_t i = 0; i < table.eps.size(); ++i)
    for (std::size_t j = i + 1; j < table.eps.size(); ++j) {
      char line[128];
      std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\n", table.eps[i], table.eps[j],
                    table.distance(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
      os << line;
    }
  std::cout << os.str();
  std::printf("consecutive distances strictly decreasing: %s\n", table.cauchy ? "YES" : "NO");
  if (!out.empty()) atomic_write(out, os.str());
  return kOk;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Entropy-stable finite-volume solver for SKT cross-diffusion systems"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "expand all help");

  Source sim_src, check_src, dereg_src;
  std::string diag_path, field_path, family, dereg_out;
  double a_min = 0.10, a_max = 0.15, dereg_t = -1.0;
  int steps = 64;
  std::vector<double> eps_list;
  std::uint64_t seed = 20240611;

  auto* sim = app.add_subcommand("simulate", "run a scenario and write diagnostics");
  sim_src.attach(sim);
  sim->add_option("--diagnostics", diag_path, "diagnostics CSV path (overrides config)");
  sim->add_option("--field", field_path, "final state path (overrides config)");

  auto* check = app.add_subcommand("check-coeffs", "print the coefficient certificates");
  check_src.attach(check);

  auto* sweep = app.add_subcommand("sweep", "kappa-condition feasibility sweep");
  sweep->add_option("family", family, "coefficient family")->required()->check(CLI::IsMember({"cyclic3"}));
  sweep->add_option("--a-min", a_min, "smallest a_ii");
  sweep->add_option("--a-max", a_max, "largest a_ii");
  sweep->add_option("--steps", steps, "sample count")->check(CLI::Range(2, 1000000));

  auto* dereg = app.add_subcommand("dereg", "distance between runs for decreasing eps");
  dereg_src.attach(dereg);
  dereg->add_option("--eps-list", eps_list, "comma-separated eps values, nonincreasing")
      ->required()
      ->delimiter(',');
  dereg->add_option("--t-end", dereg_t, "horizon (default: the scenario's)");
  dereg->add_option("--out", dereg_out, "also write the table here");

  auto* self = app.add_subcommand("selftest", "run the built-in property suite");
  self->add_option("--seed", seed, "random seed");

  auto* presets = app.add_subcommand("presets", "list shipped presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code == 0) return kOk;
    std::cerr << app.help();
    return kConfig;
  }

  try {
    if (*sim) return do_simulate(sim_src, diag_path, field_path);
    if (*check) return do_check(check_src);
    if (*sweep) return do_sweep(family, a_min, a_max, steps);
    if (*dereg) return do_dereg(dereg_src, eps_list, dereg_t, dereg_out);
    if (*self) return run_selftest(std::cout, seed).ok() ? kOk : kSelftest;
    if (*presets) {
      print_presets();
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  }
  return kConfig;
}

}  // namespace skt

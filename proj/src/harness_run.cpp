#include "skt/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <future>
#include <thread>

namespace skt {

int thread_count() {
  if (const char* env = std::getenv("SKT_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<int>(std::min(v, 256L));
  }
  return static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
}

SimulationOutcome simulate(const ScenarioConfig& cfg) {
  cfg.validate();
  const CoefficientSet coeffs = cfg.coefficients();
  const EntropyWeights weights = resolve_weights(cfg);
  const Grid grid = cfg.grid.make();
  const SpeciesField u0 = make_initial(cfg.initial, grid, cfg.species());

  std::vector<DiagnosticsRow> rows;
  const long cadence = cfg.output.cadence;
  const auto sink = [&](const StepReport& r) {
    if (r.index == 0 || r.final || r.index % cadence == 0) rows.push_back(make_row(r));
  };
  RunOptions opts;
  opts.eta = cfg.eta;
  RunSummary summary = run(u0, coeffs, weights, cfg.scheme, cfg.t_end, sink, opts);

  if (!cfg.output.diagnostics.empty()) write_diagnostics(rows, cfg.output.diagnostics);
  if (!cfg.output.field.empty())
    write_field(summary.final_state, cfg.output.field, summary.final_time);
  return {std::move(summary), std::move(rows), weights};
}

namespace {

bool lp_feasible(double a) {
  return find_pi_max_kappa(cyclic3_coefficients(a, a, a)).has_value();
}

bool closed_form_feasible(double a) { return cyclic3_pi(a, a, a).has_value(); }

template <typename Pred>
double bisect_transition(double lo, double hi, Pred&& feasible) {
  const bool at_lo = feasible(lo);
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (feasible(mid) == at_lo ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

SweepResult sweep_cyclic3(double a_min, double a_max, int steps, int threads) {
  detail::require(a_min > 0.0 && a_max > a_min && std::isfinite(a_max),
                  "sweep_cyclic3: need 0 < a_min < a_max");
  detail::require(steps >= 2, "sweep_cyclic3: need at least 2 steps");
  SweepResult out;
  out.points.resize(static_cast<std::size_t>(steps));
  const auto eval = [&](std::size_t k) {
    SweepPoint& p = out.points[k];
    p.a = a_min + (a_max - a_min) * static_cast<double>(k) / static_cast<double>(steps - 1);
    const auto w = find_pi_max_kappa(cyclic3_coefficients(p.a, p.a, p.a));
    p.lp_feasible = w.has_value();
    p.kappa = w ? w->kappa : 0.0;
    p.closed_form_feasible = closed_form_feasible(p.a);
  };
  const std::size_t workers = static_cast<std::size_t>(std::max(1, threads));
  std::vector<std::future<void>> jobs;
  for (std::size_t t = 0; t < workers; ++t)
    jobs.push_back(std::async(workers > 1 ? std::launch::async : std::launch::deferred, [&, t] {
      for (std::size_t k = t; k < out.points.size(); k += workers) eval(k);
    }));
  for (auto& j : jobs) j.get();

  for (std::size_t k = 0; k + 1 < out.points.size(); ++k) {
    const auto& p = out.points[k];
    const auto& q = out.points[k + 1];
    if (!out.lp_threshold && p.lp_feasible != q.lp_feasible)
      out.lp_threshold = bisect_transition(p.a, q.a, lp_feasible);
    if (!out.closed_form_threshold && p.closed_form_feasible != q.closed_form_feasible)
      out.closed_form_threshold = bisect_transition(p.a, q.a, closed_form_feasible);
  }
  return out;
}

}  // namespace skt

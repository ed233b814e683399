#pragma once

// Scenario configuration, presets, diagnostics/field files, and the
// drivers behind the command line tool.

#include "skt/stepper.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace skt {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr int kDefaultCadence = 10;
inline constexpr double kDefaultFloor = 1e-3;

enum class InitialProfile { constant, gaussian, step, random };

/// Per-species profile parameters; all positions are fractions of the
/// domain length along each axis.
struct InitialSpec {
  InitialProfile profile = InitialProfile::gaussian;
  Vector level;      // background value
  Vector amplitude;  // bump height, step height, or relative noise (< 1)
  Vector center;     // gaussian center
  Vector width;      // gaussian standard deviation
  Vector lo, hi;     // step support [lo, hi)
  double floor = kDefaultFloor;
  std::uint64_t seed = 0;
};

struct GridSpec {
  int dim = 1;
  int nx = 100;
  int ny = 1;
  double lx = 1.0;
  double ly = 1.0;

  Grid make() const;
};

struct OutputSpec {
  int cadence = kDefaultCadence;
  std::string diagnostics;  // empty: not written
  std::string field;        // final state; empty: not written
};

struct ScenarioConfig {
  std::string label;
  std::string preset;  // preset the config was built on, may be empty
  std::uint64_t seed = 0;
  Matrix a;
  Vector a0;
  std::optional<Vector> pi;  // explicit weights; otherwise derived
  GridSpec grid;
  SchemeConfig scheme;
  double t_end = 0.5;
  double eta = -1.0;  // < 0: default shift
  InitialSpec initial;
  OutputSpec output;

  CoefficientSet coefficients() const { return {a, a0}; }
  Eigen::Index species() const { return a.rows(); }
  void validate() const;
};

struct PresetInfo {
  std::string name;
  std::string description;
};

/// Names and one-line descriptions of every shipped preset.
std::vector<PresetInfo> scenario_presets();

/// A preset by name. `param` sets the self-diffusion a_ii of cyclic3 and is
/// ignored elsewhere. Throws ConfigError for unknown names.
ScenarioConfig preset_config(const std::string& name, std::optional<double> param = {});

/// Parses a JSON scenario document. Sections coefficients, grid, scheme,
/// initial and output are required; entries absent from a section keep the
/// value of the named preset (or the built-in defaults).
ScenarioConfig parse_config(std::string_view text);
ScenarioConfig load_config(const std::string& path);

/// Initial densities described by init on grid (n species).
SpeciesField make_initial(const InitialSpec& init, const Grid& grid, Eigen::Index n);

/// Weights for a scenario: explicit pi, else detailed balance when it gives
/// kappa > 0, else the max-kappa program, else uniform pi (kappa may be <= 0).
EntropyWeights resolve_weights(const ScenarioConfig& cfg);

// ---------------------------------------------------------------------------
// Coefficient certificates

struct CoefficientReport {
  std::optional<Vector> detailed_balance_pi;
  bool self_diffusion_dominance = false;
  std::optional<EntropyWeights> kappa_weights;
  std::optional<double> eta0;  // absent when some a_i0 = 0
};

CoefficientReport check_coefficients(const CoefficientSet& coeffs);
std::string format_report(const CoefficientReport& report);

// ---------------------------------------------------------------------------
// Diagnostics

struct DiagnosticsRow {
  long step = 0;
  double time = 0.0;
  double tau = 0.0;
  Vector mass;
  Vector l1, l2, l3;
  Vector fisher;
  double entropy = 0.0;
  double dissipation = 0.0;
  double h_eta = 0.0;
  Vector ck_bound;
  Vector l1_deviation;
  int newton_iters = 0;
  double entropy_margin = 0.0;
  bool entropy_ok = true;
};

DiagnosticsRow make_row(const StepReport& report);

/// Column names in file order for n species.
std::vector<std::string> diagnostics_columns(Eigen::Index n);

void write_diagnostics(const std::vector<DiagnosticsRow>& rows, const std::string& path);
std::vector<DiagnosticsRow> read_diagnostics(const std::string& path);

/// Plain-text field snapshot with a grid header; values at 17 digits.
void write_field(const SpeciesField& field, const std::string& path, double time = 0.0);
SpeciesField load_field(const std::string& path, double* time = nullptr);

/// Writes text to path through a temporary file and a rename.
void atomic_write(const std::string& path, const std::string& text);

// ---------------------------------------------------------------------------
// Drivers

struct SimulationOutcome {
  RunSummary summary;
  std::vector<DiagnosticsRow> rows;
  EntropyWeights weights;
};

/// Runs the scenario, keeps every cadence-th report plus the first and last,
/// and writes the files named in cfg.output.
SimulationOutcome simulate(const ScenarioConfig& cfg);

struct SweepPoint {
  double a = 0.0;
  bool lp_feasible = false;
  bool closed_form_feasible = false;
  double kappa = 0.0;  // max-kappa optimum, 0 when infeasible
};

struct SweepResult {
  std::vector<SweepPoint> points;
  std::optional<double> lp_threshold;           // refined by bisection
  std::optional<double> closed_form_threshold;  // refined by bisection
};

/// Feasibility of the kappa condition for cyclic3 with a_11 = a_22 = a_33 = a
/// on `steps` evenly spaced values in [a_min, a_max].
SweepResult sweep_cyclic3(double a_min, double a_max, int steps, int threads = 1);

/// Worker count from SKT_THREADS, else the hardware concurrency.
int thread_count();

struct SelftestResult {
  int passed = 0;
  int failed = 0;
  bool ok() const { return failed == 0; }
};

/// Reduced property suite over every module; deterministic for a seed.
SelftestResult run_selftest(std::ostream& out, std::uint64_t seed = 20240611);

/// Command line entry point; returns the process exit code.
int cli_main(int argc, char** argv);

}  // namespace skt

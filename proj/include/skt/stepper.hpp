#pragma once

// Regularized implicit Euler scheme in entropy variables.
//
// Unknowns are the entropy variables w = h_eps'(u) per cell; densities are
// recovered as u(w) and therefore stay strictly positive. One step solves,
// for every cell c and species i,
//
//   vol (u_i(w_c) - u_i^{k-1}) / tau
//     = sum over faces of +-area * (B_eps(u_face) grad w + delta grad w)_i
//       - delta vol w_{c,i},
//
// with B_eps = A_eps H_eps^{-1}, u_face the arithmetic mean of the adjacent
// cells and no flux through the boundary. Testing with w gives the discrete
// entropy identity that verify_entropy_step checks.

#include "skt/entropy.hpp"
#include "skt/grid.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <vector>

namespace skt {

enum class SchemeMode {
  standard,  // delta as configured
  tied,      // delta forced to eps (one-dimensional simplification)
};

struct NewtonOptions {
  double tol = 1e-12;   // on max|residual| relative to vol * max(u_prev) / tau
  int max_iters = 40;
  double damping = 0.5;  // backtracking factor
  int max_halvings = 30;
};

struct EntropyCheckOptions {
  bool enabled = true;
  double slack = 1e-8;
};

struct SchemeConfig {
  RegularizationParams reg;
  NewtonOptions newton;
  SchemeMode mode = SchemeMode::tied;
  EntropyCheckOptions entropy_check;

  /// Regularization with the mode applied (delta = eps when tied).
  RegularizationParams effective() const;
  void validate() const;
};

/// Per-species duality functionals: psi solves -Lap psi = u_i - mean(u_i).
struct DualityRecord {
  Vector grad_psi_sq;  // int |grad psi_i|^2
  Vector cubic;        // int u_i^2 p_i(u)
  Vector cubic_lower;  // a_ii int u_i^3
  bool pointwise_ok = true;  // u_i^2 p_i(u) >= a_ii u_i^3 on every cell
};

/// Diagnostics computed on one state (no time accumulation).
struct Monitors {
  DiscreteNorms norms;
  Vector fisher;
  DualityRecord duality;
  double eta = 0.0;     // shift used; 0 when the relative entropy is off
  double h_eta = 0.0;   // pi-weighted relative entropy to the mean
  Vector l1_deviation;  // ||u_i - mean_i||_{L1}
  Vector ck_bound;      // sqrt(8) ||mean_i + eta||_{L2} H_{eta,i}^{1/2}
};

struct StepReport {
  long index = 0;
  double time = 0.0;
  double tau = 0.0;
  double entropy = 0.0;       // int h_eps(u^k)
  double entropy_prev = 0.0;  // int h_eps(u^{k-1})
  double dissipation = 0.0;   // sum_faces face_vol grad w . B_eps grad w
  double delta_term = 0.0;    // delta (int |grad w|^2 + int |w|^2)
  Vector mass;
  Vector mass_prev;
  Vector mass_drift_predicted;  // -delta tau int w_i
  int newton_iters = 0;
  double newton_residual = 0.0;
  double entropy_margin = 0.0;  // rhs - lhs of the discrete entropy inequality
  bool entropy_ok = true;
  Monitors monitors;
  bool final = false;
};

struct StepResult {
  SpeciesField next;
  Matrix w;  // entropy variables of next, species x cells
  StepReport report;
};

/// Newton failure on one step; run() reacts by halving tau.
class StepRejected : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ImplicitEulerStepper {
 public:
  ImplicitEulerStepper(Grid grid, CoefficientSet coeffs, EntropyWeights weights,
                       SchemeConfig cfg);
  ~ImplicitEulerStepper();
  ImplicitEulerStepper(ImplicitEulerStepper&&) noexcept;
  ImplicitEulerStepper& operator=(ImplicitEulerStepper&&) noexcept;

  /// One implicit step of size tau from prev. Throws StepRejected when
  /// Newton does not reach the tolerance.
  StepResult step(const SpeciesField& prev, double tau);

  /// Residual of the discrete system (flattened, cell-major) at w.
  Vector residual(const SpeciesField& prev, const Matrix& w, double tau) const;
  /// Analytic Jacobian of residual() with respect to w (dense, for tests).
  Matrix jacobian_dense(const Matrix& w, double tau) const;

  const Grid& grid() const { return grid_; }
  const CoefficientSet& coeffs() const { return coeffs_; }
  const EntropyWeights& weights() const { return weights_; }
  const SchemeConfig& config() const { return cfg_; }

 private:
  struct Solver;

  Matrix densities(const Matrix& w) const;

  Grid grid_;
  CoefficientSet coeffs_;
  EntropyWeights weights_;
  SchemeConfig cfg_;
  RegularizationParams reg_;
  std::unique_ptr<Solver> solver_;
};

/// One step with tau = cfg.reg.tau.
StepResult implicit_step(const SpeciesField& prev, const CoefficientSet& coeffs,
                         const EntropyWeights& weights, const SchemeConfig& cfg);

struct EntropyVerdict {
  bool passed = false;
  double margin = 0.0;
  double slack = 0.0;
};

/// Recomputes both sides of
///   int h_eps(u^k) + tau D + delta tau (|grad w|^2 + |w|^2) <= int h_eps(u^{k-1})
/// from the fields and w, and compares with slack * (1 + |int h_eps(u^k)|).
EntropyVerdict verify_entropy_step(const SpeciesField& prev, const SpeciesField& next,
                                   const Matrix& w, const StepReport& report,
                                   const SchemeConfig& cfg, const CoefficientSet& coeffs,
                                   const EntropyWeights& weights);

DualityRecord duality_monitor(const SpeciesField& u, const CoefficientSet& coeffs);
DualityRecord duality_monitor(const SpeciesField& u, const CoefficientSet& coeffs,
                              const NeumannPoisson& poisson);

/// Default entropy shift min(eta0/2, 0.1); 0 when some a_i0 vanishes.
double default_eta(const CoefficientSet& coeffs);

Monitors compute_monitors(const SpeciesField& u, const CoefficientSet& coeffs,
                          const EntropyWeights& weights, double eta,
                          const NeumannPoisson& poisson);

/// Clamps to [1e-8, 1e8] per cell and rescales each species to keep its mass.
SpeciesField regularize_initial(const SpeciesField& u);

struct RunOptions {
  double eta = -1.0;   // < 0: default_eta
  bool record_trajectory = false;
  double min_tau_factor = 1e-8;
};

struct RunSummary {
  explicit RunSummary(SpeciesField state) : final_state(std::move(state)) {}

  SpeciesField final_state;
  double final_time = 0.0;
  long accepted_steps = 0;
  long rejected_steps = 0;
  long entropy_failures = 0;
  long h_eta_violations = 0;
  long ck_violations = 0;
  long pointwise_duality_violations = 0;
  double max_h_eta_increase = 0.0;  // relative, positive means increase
  double max_mass_error_delta0 = 0.0;  // relative per-step mass change
  double max_mass_drift_error = 0.0;   // relative mismatch to -delta tau int w
  Vector l3_cubed;        // int int u_i^3
  Vector fisher_integral; // int int |grad sqrt u_i|^2
  Vector cubic_integral;  // int int u_i^2 p_i
  Vector cubic_lower_integral;  // a_ii int int u_i^3
  Vector grad_psi_integral;     // int int |grad psi_i|^2
  std::vector<double> sample_times;
  std::vector<Matrix> trajectory;  // states at macro-step ends
  StepReport initial_report;
};

using ReportSink = std::function<void(const StepReport&)>;

/// Marches from t = 0 to t_end in macro steps of cfg.reg.tau. A rejected step
/// is replaced by two half steps, recursively, down to min_tau_factor * tau.
RunSummary run(const SpeciesField& initial, const CoefficientSet& coeffs,
               const EntropyWeights& weights, const SchemeConfig& cfg,
               double t_end, const ReportSink& sink = {},
               const RunOptions& options = {});

struct DeregularizationTable {
  std::vector<double> eps;
  Matrix distance;                 // pairwise L2(Q_T) distances
  std::vector<double> consecutive; // distance(eps_k, eps_{k+1})
  bool cauchy = true;              // consecutive distances strictly decreasing
};

/// Runs the same scenario for each eps (delta = eps) and compares the
/// trajectories in L2(Q_T). eps_list must be positive and nonincreasing.
DeregularizationTable deregularization_study(const SpeciesField& initial,
                                             const CoefficientSet& coeffs,
                                             const EntropyWeights& weights,
                                             const SchemeConfig& cfg,
                                             const std::vector<double>& eps_list,
                                             double t_end, int threads = 1);

/// L2(Q_T) distance between two recorded trajectories on the same grid.
double trajectory_distance(const RunSummary& a, const RunSummary& b, double cell_volume);

}  // namespace skt

#include "skt/stepper.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <future>
#include <string>

namespace skt {

RegularizationParams SchemeConfig::effective() const {
  RegularizationParams out = reg;
  if (mode == SchemeMode::tied) out.delta = out.eps;
  return out;
}

void SchemeConfig::validate() const {
  reg.validate();
  detail::require(reg.eps > 0.0, "SchemeConfig: eps must be > 0 for the entropy-variable scheme");
  detail::require(newton.tol > 0.0, "SchemeConfig: newton.tol must be > 0");
  detail::require(newton.max_iters >= 1, "SchemeConfig: newton.max_iters must be >= 1");
  detail::require(newton.damping > 0.0 && newton.damping < 1.0,
                  "SchemeConfig: newton.damping must lie in (0, 1)");
  detail::require(entropy_check.slack >= 0.0, "SchemeConfig: entropy slack must be >= 0");
}

namespace {

// Entropy variables at every cell, species x cells.
Matrix entropy_variables(const Matrix& u, const Vector& pi, double eps) {
  Matrix w(u.rows(), u.cols());
  for (Eigen::Index c = 0; c < u.cols(); ++c) w.col(c) = w_from_u(u.col(c), pi, eps);
  return w;
}

double integrated_entropy(const SpeciesField& u, const Vector& pi, double eps) {
  double total = 0.0;
  for (Eigen::Index c = 0; c < u.values.cols(); ++c)
    total += entropy_heps(u.values.col(c), pi, eps);
  return total * u.grid.cell_volume();
}

// d/du of u^2 / (pi + eps u), the inverse of the Hessian diagonal.
Vector inverse_hessian_slope(const Vector& u, const Vector& pi, double eps) {
  const auto denom = pi.array() + eps * u.array();
  return (u.array() * (2.0 * pi.array() + eps * u.array()) / denom.square()).matrix();
}

struct DissipationTerms {
  double mobility = 0.0;  // sum_faces face_vol G^T B G
  double gradient = 0.0;  // sum_faces face_vol |G|^2
  double value = 0.0;     // sum_cells vol |w|^2
};

DissipationTerms dissipation_terms(const SpeciesField& u, const Matrix& w,
                                   const CoefficientSet& coeffs,
                                   const EntropyWeights& weights, double eps) {
  DissipationTerms out;
  for (const auto& face : u.grid.faces()) {
    const double face_volume = face.area * face.spacing;
    const Vector mid = 0.5 * (u.values.col(face.left) + u.values.col(face.right));
    const Vector g = (w.col(face.right) - w.col(face.left)) / face.spacing;
    const Vector y = g.cwiseQuotient(hessian_Heps(mid, weights.pi, eps));
    out.mobility += face_volume * g.dot(diffusion_Aeps(mid, coeffs, weights, eps) * y);
    out.gradient += face_volume * g.squaredNorm();
  }
  out.value = w.squaredNorm() * u.grid.cell_volume();
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

struct ImplicitEulerStepper::Solver {
  Eigen::SparseMatrix<double> jac;
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  bool analyzed = false;
};

ImplicitEulerStepper::ImplicitEulerStepper(Grid grid, CoefficientSet coeffs,
                                           EntropyWeights weights, SchemeConfig cfg)
    : grid_(std::move(grid)),
      coeffs_(std::move(coeffs)),
      weights_(std::move(weights)),
      cfg_(cfg),
      reg_(cfg.effective()),
      solver_(std::make_unique<Solver>()) {
  cfg_.validate();
  detail::require(weights_.pi.size() == coeffs_.size() && weights_.mu.size() == coeffs_.size(),
                  "ImplicitEulerStepper: weights do not match coefficients");
  detail::require((weights_.pi.array() > 0.0).all(), "ImplicitEulerStepper: pi must be positive");
}

ImplicitEulerStepper::~ImplicitEulerStepper() = default;
ImplicitEulerStepper::ImplicitEulerStepper(ImplicitEulerStepper&&) noexcept = default;
ImplicitEulerStepper& ImplicitEulerStepper::operator=(ImplicitEulerStepper&&) noexcept = default;

Matrix ImplicitEulerStepper::densities(const Matrix& w) const {
  Matrix u(w.rows(), w.cols());
  for (Eigen::Index c = 0; c < w.cols(); ++c) u.col(c) = u_from_w(w.col(c), weights_.pi, reg_.eps);
  return u;
}

Vector ImplicitEulerStepper::residual(const SpeciesField& prev, const Matrix& w,
                                      double tau) const {
  const Eigen::Index n = coeffs_.size();
  const double vol = grid_.cell_volume();
  const Matrix u = densities(w);
  Matrix r = vol * ((u - prev.values) / tau + reg_.delta * w);
  for (const auto& face : grid_.faces()) {
    const Vector mid = 0.5 * (u.col(face.left) + u.col(face.right));
    const Vector g = (w.col(face.right) - w.col(face.left)) / face.spacing;
    const Vector y = g.cwiseQuotient(hessian_Heps(mid, weights_.pi, reg_.eps));
    const Vector flux =
        face.area * (diffusion_Aeps(mid, coeffs_, weights_, reg_.eps) * y + reg_.delta * g);
    r.col(face.left) -= flux;
    r.col(face.right) += flux;
  }
  return Eigen::Map<const Vector>(r.data(), n * r.cols());
}

namespace {

// Adds the Jacobian of the residual to a triplet list. Blocks are n x n,
// cell-major ordering (row = cell * n + species).
template <typename Sink>
void assemble_jacobian(const Grid& grid, const CoefficientSet& coeffs,
                       const EntropyWeights& weights, const RegularizationParams& reg,
                       const Matrix& u, const Matrix& w, double tau, Sink&& add_block) {
  const Eigen::Index n = coeffs.size();
  const double vol = grid.cell_volume();
  const double eps = reg.eps;
  const double delta = reg.delta;
  const Matrix identity = Matrix::Identity(n, n);
  const Vector mu_over_pi = weights.mu.cwiseQuotient(weights.pi);

  for (Eigen::Index c = 0; c < u.cols(); ++c) {
    const Vector dudw = hessian_Heps(u.col(c), weights.pi, eps).cwiseInverse();
    Matrix block = (vol / tau) * Matrix(dudw.asDiagonal()) + (vol * delta) * identity;
    add_block(c, c, block);
  }

  for (const auto& face : grid.faces()) {
    const Vector ul = u.col(face.left);
    const Vector ur = u.col(face.right);
    const Vector mid = 0.5 * (ul + ur);
    const Vector g = (w.col(face.right) - w.col(face.left)) / face.spacing;
    const Vector hinv = hessian_Heps(mid, weights.pi, eps).cwiseInverse();
    const Vector y = g.cwiseProduct(hinv);
    const Matrix A = diffusion_Aeps(mid, coeffs, weights, eps);
    const Matrix B = A * hinv.asDiagonal();

    // d(B g)/d(u_face): diag(y) a + diag(a y + 2 eps mu/pi u y) + A diag((1/H)' g)
    Matrix dflux = y.asDiagonal() * coeffs.a();
    dflux.diagonal() += coeffs.a() * y +
                        (2.0 * eps * mu_over_pi.array() * mid.array() * y.array()).matrix();
    dflux += A * inverse_hessian_slope(mid, weights.pi, eps).cwiseProduct(g).asDiagonal();

    const Vector dul = hessian_Heps(ul, weights.pi, eps).cwiseInverse();
    const Vector dur = hessian_Heps(ur, weights.pi, eps).cwiseInverse();
    const Matrix stiff = (B + delta * identity) / face.spacing;
    const Matrix d_right = face.area * (stiff + 0.5 * dflux * dur.asDiagonal());
    const Matrix d_left = face.area * (-stiff + 0.5 * dflux * dul.asDiagonal());

    add_block(face.left, face.right, -d_right);
    add_block(face.left, face.left, -d_left);
    add_block(face.right, face.right, d_right);
    add_block(face.right, face.left, d_left);
  }
}

}  // namespace

Matrix ImplicitEulerStepper::jacobian_dense(const Matrix& w, double tau) const {
  const Eigen::Index n = coeffs_.size();
  const Eigen::Index size = n * grid_.num_cells();
  Matrix jac = Matrix::Zero(size, size);
  assemble_jacobian(grid_, coeffs_, weights_, reg_, densities(w), w, tau,
                    [&](Eigen::Index row, Eigen::Index col, const Matrix& block) {
                      jac.block(row * n, col * n, n, n) += block;
                    });
  return jac;
}

StepResult ImplicitEulerStepper::step(const SpeciesField& prev, double tau) {
  detail::require(tau > 0.0, "implicit_step: tau must be > 0");
  detail::require(prev.grid == grid_ && prev.species() == coeffs_.size(),
                  "implicit_step: field does not match stepper");
  if (!(prev.values.array() > 0.0).all() || !prev.values.allFinite())
    throw std::invalid_argument("implicit_step: previous state must be positive and finite");

  const Eigen::Index n = coeffs_.size();
  const Eigen::Index size = n * grid_.num_cells();
  const double vol = grid_.cell_volume();
  const double scale = vol * prev.values.maxCoeff() / tau;
  const double target = cfg_.newton.tol * scale;

  Matrix w = entropy_variables(prev.values, weights_.pi, reg_.eps);
  Vector r = residual(prev, w, tau);
  double rnorm = r.lpNorm<Eigen::Infinity>();
  int iters = 0;

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>((grid_.num_cells() + 2 * grid_.faces().size()) * n * n));

  while (rnorm > target) {
    if (iters >= cfg_.newton.max_iters)
      throw StepRejected("Newton did not converge in " + std::to_string(iters) +
                         " iterations (residual " + std::to_string(rnorm / scale) + ")");
    ++iters;

    triplets.clear();
    const Matrix u = densities(w);
    assemble_jacobian(grid_, coeffs_, weights_, reg_, u, w, tau,
                      [&](Eigen::Index row, Eigen::Index col, const Matrix& block) {
                        for (Eigen::Index j = 0; j < n; ++j)
                          for (Eigen::Index i = 0; i < n; ++i)
                            triplets.emplace_back(row * n + i, col * n + j, block(i, j));
                      });
    auto& s = *solver_;
    s.jac.resize(size, size);
    s.jac.setFromTriplets(triplets.begin(), triplets.end());

    Vector dw;
    if (grid_.dim() == 1) {
      if (!s.analyzed) {
        s.lu.analyzePattern(s.jac);
        s.analyzed = true;
      }
      s.lu.factorize(s.jac);
      if (s.lu.info() != Eigen::Success) throw StepRejected("Jacobian factorization failed");
      dw = s.lu.solve(-r);
    } else {
      Eigen::BiCGSTAB<Eigen::SparseMatrix<double>, Eigen::DiagonalPreconditioner<double>> it;
      it.setTolerance(1e-13);
      it.setMaxIterations(static_cast<int>(20 * size));
      it.compute(s.jac);
      dw = it.solve(-r);
      if (it.info() != Eigen::Success) {
        // fall back to a direct solve when the iteration stalls
        Eigen::SparseLU<Eigen::SparseMatrix<double>> direct(s.jac);
        if (direct.info() != Eigen::Success) throw StepRejected("Jacobian solve failed");
        dw = direct.solve(-r);
      }
    }
    if (!dw.allFinite()) throw StepRejected("non-finite Newton update");

    // Backtracking on the residual 2-norm.
    const double r2 = r.norm();
    double alpha = 1.0;
    bool accepted = false;
    for (int k = 0; k <= cfg_.newton.max_halvings; ++k) {
      Matrix trial = w + alpha * Eigen::Map<const Matrix>(dw.data(), n, grid_.num_cells());
      if (trial.allFinite()) {
        Vector rt = residual(prev, trial, tau);
        if (rt.allFinite() && (rt.norm() <= (1.0 - 1e-4 * alpha) * r2 ||
                               rt.lpNorm<Eigen::Infinity>() <= target)) {
          w = std::move(trial);
          r = std::move(rt);
          accepted = true;
          break;
        }
      }
      alpha *= cfg_.newton.damping;
    }
    if (!accepted) {
      // Stagnation at rounding level is acceptable once close to the target.
      if (rnorm <= 100.0 * target) break;
      throw StepRejected("line search failed (residual " + std::to_string(rnorm / scale) + ")");
    }
    rnorm = r.lpNorm<Eigen::Infinity>();
  }

  StepResult out{SpeciesField{grid_, densities(w)}, std::move(w), {}};
  if (!out.next.values.allFinite()) throw NumericalError("non-finite state after Newton");

  StepReport& rep = out.report;
  rep.tau = tau;
  rep.newton_iters = iters;
  rep.newton_residual = rnorm / scale;
  rep.entropy_prev = integrated_entropy(prev, weights_.pi, reg_.eps);
  rep.entropy = integrated_entropy(out.next, weights_.pi, reg_.eps);
  const DissipationTerms terms = dissipation_terms(out.next, out.w, coeffs_, weights_, reg_.eps);
  rep.dissipation = terms.mobility;
  rep.delta_term = reg_.delta * (terms.gradient + terms.value);
  rep.mass_prev = prev.mass();
  rep.mass = out.next.mass();
  rep.mass_drift_predicted = -reg_.delta * tau * vol * out.w.rowwise().sum();
  rep.entropy_margin = rep.entropy_prev - (rep.entropy + tau * (rep.dissipation + rep.delta_term));
  rep.entropy_ok = !cfg_.entropy_check.enabled ||
                   rep.entropy_margin >= -cfg_.entropy_check.slack * (1.0 + std::abs(rep.entropy));
  return out;
}

StepResult implicit_step(const SpeciesField& prev, const CoefficientSet& coeffs,
                         const EntropyWeights& weights, const SchemeConfig& cfg) {
  ImplicitEulerStepper stepper(prev.grid, coeffs, weights, cfg);
  return stepper.step(prev, cfg.reg.tau);
}

EntropyVerdict verify_entropy_step(const SpeciesField& prev, const SpeciesField& next,
                                   const Matrix& w, const StepReport& report,
                                   const SchemeConfig& cfg, const CoefficientSet& coeffs,
                                   const EntropyWeights& weights) {
  const RegularizationParams reg = cfg.effective();
  const double before = integrated_entropy(prev, weights.pi, reg.eps);
  const double after = integrated_entropy(next, weights.pi, reg.eps);
  const DissipationTerms terms = dissipation_terms(next, w, coeffs, weights, reg.eps);
  const double lhs =
      after + report.tau * terms.mobility + reg.delta * report.tau * (terms.gradient + terms.value);
  EntropyVerdict out;
  out.margin = before - lhs;
  out.slack = cfg.entropy_check.slack * (1.0 + std::abs(after));
  out.passed = out.margin >= -out.slack;
  return out;
}

// ---------------------------------------------------------------------------

DualityRecord duality_monitor(const SpeciesField& u, const CoefficientSet& coeffs,
                              const NeumannPoisson& poisson) {
  const Eigen::Index n = u.species();
  detail::require(n == coeffs.size(), "duality_monitor: species mismatch");
  const double vol = u.grid.cell_volume();
  DualityRecord out;
  out.grad_psi_sq = Vector::Zero(n);
  out.cubic = Vector::Zero(n);
  out.cubic_lower = Vector::Zero(n);
  const Vector mean = u.mean();
  for (Eigen::Index i = 0; i < n; ++i) {
    Vector rhs = (u.values.row(i).array() - mean(i)).matrix().transpose();
    rhs.array() -= rhs.mean();  // rounding in mean(i) matters near equilibrium
    const Vector psi = poisson.solve(rhs);
    const Vector g = face_gradient(u.grid, psi.transpose());
    for (std::size_t f = 0; f < u.grid.faces().size(); ++f) {
      const auto& face = u.grid.faces()[f];
      out.grad_psi_sq(i) += g(static_cast<Eigen::Index>(f)) * g(static_cast<Eigen::Index>(f)) *
                            face.area * face.spacing;
    }
  }
  for (Eigen::Index c = 0; c < u.values.cols(); ++c) {
    const Vector uc = u.values.col(c);
    const Vector p = pressure_p(uc, coeffs);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double cubic = uc(i) * uc(i) * p(i);
      const double lower = coeffs.a(i, i) * uc(i) * uc(i) * uc(i);
      out.cubic(i) += cubic * vol;
      out.cubic_lower(i) += lower * vol;
      if (cubic < lower) out.pointwise_ok = false;
    }
  }
  return out;
}

DualityRecord duality_monitor(const SpeciesField& u, const CoefficientSet& coeffs) {
  return duality_monitor(u, coeffs, NeumannPoisson(u.grid));
}

double default_eta(const CoefficientSet& coeffs) {
  if ((coeffs.a0().array() <= 0.0).any()) return 0.0;
  const double e0 = eta0(coeffs);
  return std::isinf(e0) ? 0.1 : std::min(0.5 * e0, 0.1);
}

Monitors compute_monitors(const SpeciesField& u, const CoefficientSet& coeffs,
                          const EntropyWeights& weights, double eta,
                          const NeumannPoisson& poisson) {
  const Eigen::Index n = u.species();
  Monitors m;
  m.norms = discrete_norms(u);
  m.fisher = fisher(u);
  m.duality = duality_monitor(u, coeffs, poisson);
  m.eta = eta;
  const Vector mean = u.mean();
  const double vol = u.grid.cell_volume();
  m.l1_deviation = (u.values.colwise() - mean).cwiseAbs().rowwise().sum() * vol;
  m.ck_bound = Vector::Zero(n);
  if (eta > 0.0) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const Matrix row = u.values.row(i);
      const double h_i = relative_entropy_eta(Vector(mean.segment(i, 1)), row, eta,
                                              Vector(Vector::Ones(1)), vol);
      m.h_eta += weights.pi(i) * h_i;
      m.ck_bound(i) = csiszar_kullback_rhs(mean(i), eta, std::max(h_i, 0.0), u.grid.measure());
    }
  }
  return m;
}

SpeciesField regularize_initial(const SpeciesField& u) {
  constexpr double kClip = 1e-8;
  SpeciesField out{u.grid, u.values.cwiseMax(kClip).cwiseMin(1.0 / kClip)};
  const Vector target = u.mass();
  const Vector now = out.mass();
  for (Eigen::Index i = 0; i < out.species(); ++i)
    if (target(i) > 0.0 && now(i) > 0.0) out.values.row(i) *= target(i) / now(i);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

class RunDriver {
 public:
  RunDriver(const SpeciesField& initial, const CoefficientSet& coeffs,
            const EntropyWeights& weights, const SchemeConfig& cfg, const ReportSink& sink,
            const RunOptions& options)
      : stepper_(initial.grid, coeffs, weights, cfg),
        poisson_(initial.grid),
        coeffs_(coeffs),
        weights_(weights),
        cfg_(cfg),
        sink_(sink),
        options_(options),
        eta_(options.eta >= 0.0 ? options.eta : default_eta(coeffs)),
        summary_(regularize_initial(initial)) {
    const Eigen::Index n = coeffs.size();
    summary_.l3_cubed = Vector::Zero(n);
    summary_.fisher_integral = Vector::Zero(n);
    summary_.cubic_integral = Vector::Zero(n);
    summary_.cubic_lower_integral = Vector::Zero(n);
    summary_.grad_psi_integral = Vector::Zero(n);

    StepReport& init = summary_.initial_report;
    init.entropy = init.entropy_prev =
        integrated_entropy(summary_.final_state, weights.pi, cfg.effective().eps);
    init.mass = init.mass_prev = summary_.final_state.mass();
    init.mass_drift_predicted = Vector::Zero(n);
    init.monitors = compute_monitors(summary_.final_state, coeffs, weights, eta_, poisson_);
    last_h_eta_ = init.monitors.h_eta;
  }

  RunSummary finish(double t_end) {
    const double tau0 = cfg_.reg.tau;
    if (!(t_end > 0.0)) {
      summary_.initial_report.final = true;
      if (sink_) sink_(summary_.initial_report);
      return std::move(summary_);
    }
    if (sink_) sink_(summary_.initial_report);
    const long macro_steps = std::max(1L, static_cast<long>(std::ceil(t_end / tau0 - 1e-9)));
    for (long k = 0; k < macro_steps; ++k) {
      const double t_next = std::min(t_end, static_cast<double>(k + 1) * tau0);
      advance(t_next - time_, 0, k + 1 == macro_steps);
      time_ = sub_time_ = t_next;
      if (options_.record_trajectory) {
        summary_.sample_times.push_back(time_);
        summary_.trajectory.push_back(summary_.final_state.values);
      }
    }
    summary_.final_time = time_;
    return std::move(summary_);
  }

 private:
  void advance(double tau, int depth, bool last_macro) {
    try {
      StepResult res = stepper_.step(summary_.final_state, tau);
      accept(std::move(res), last_macro);
    } catch (const StepRejected&) {
      ++summary_.rejected_steps;
      if (tau * 0.5 < options_.min_tau_factor * cfg_.reg.tau)
        throw NumericalError("time step fell below the floor at t = " + std::to_string(time_));
      advance(0.5 * tau, depth + 1, false);
      advance(0.5 * tau, depth + 1, last_macro);
    }
  }

  void accept(StepResult res, bool last_macro) {
    const SpeciesField prev = summary_.final_state;
    StepReport& rep = res.report;
    sub_time_ += rep.tau;
    rep.index = ++summary_.accepted_steps;
    rep.time = sub_time_;
    rep.monitors = compute_monitors(res.next, coeffs_, weights_, eta_, poisson_);
    rep.final = last_macro;

    if (cfg_.entropy_check.enabled) {
      const EntropyVerdict v =
          verify_entropy_step(prev, res.next, res.w, rep, cfg_, coeffs_, weights_);
      rep.entropy_ok = v.passed;
      rep.entropy_margin = v.margin;
      if (!v.passed) ++summary_.entropy_failures;
    }

    const RegularizationParams reg = cfg_.effective();
    for (Eigen::Index i = 0; i < rep.mass.size(); ++i) {
      const double base = std::abs(rep.mass_prev(i));
      const double change = rep.mass(i) - rep.mass_prev(i);
      if (reg.delta == 0.0) {
        summary_.max_mass_error_delta0 =
            std::max(summary_.max_mass_error_delta0, std::abs(change) / base);
      } else {
        summary_.max_mass_drift_error = std::max(
            summary_.max_mass_drift_error, std::abs(change - rep.mass_drift_predicted(i)) / base);
      }
    }

    const Monitors& m = rep.monitors;
    if (eta_ > 0.0) {
      const double increase = (m.h_eta - last_h_eta_) / (1.0 + std::abs(last_h_eta_));
      summary_.max_h_eta_increase = std::max(summary_.max_h_eta_increase, increase);
      if (increase > 1e-10) ++summary_.h_eta_violations;
      last_h_eta_ = m.h_eta;
      const Vector mass = res.next.mass();
      for (Eigen::Index i = 0; i < m.ck_bound.size(); ++i)
        if (m.l1_deviation(i) > m.ck_bound(i) + 1e-14 * (1.0 + mass(i)))
          ++summary_.ck_violations;
    }
    if (!m.duality.pointwise_ok) ++summary_.pointwise_duality_violations;

    const double tau = rep.tau;
    summary_.l3_cubed += tau * m.norms.l3.array().cube().matrix();
    summary_.fisher_integral += tau * m.fisher;
    summary_.cubic_integral += tau * m.duality.cubic;
    summary_.cubic_lower_integral += tau * m.duality.cubic_lower;
    summary_.grad_psi_integral += tau * m.duality.grad_psi_sq;

    summary_.final_state = std::move(res.next);
    if (sink_) sink_(rep);
  }

  ImplicitEulerStepper stepper_;
  NeumannPoisson poisson_;
  const CoefficientSet& coeffs_;
  const EntropyWeights& weights_;
  SchemeConfig cfg_;
  const ReportSink& sink_;
  RunOptions options_;
  double eta_;
  double time_ = 0.0;
  double sub_time_ = 0.0;
  double last_h_eta_ = 0.0;
  RunSummary summary_;
};

}  // namespace

RunSummary run(const SpeciesField& initial, const CoefficientSet& coeffs,
               const EntropyWeights& weights, const SchemeConfig& cfg, double t_end,
               const ReportSink& sink, const RunOptions& options) {
  detail::require(t_end >= 0.0 && std::isfinite(t_end), "run: t_end must be >= 0");
  RunDriver driver(initial, coeffs, weights, cfg, sink, options);
  return driver.finish(t_end);
}

double trajectory_distance(const RunSummary& a, const RunSummary& b, double cell_volume) {
  detail::require(a.trajectory.size() == b.trajectory.size(),
                  "trajectory_distance: trajectories have different lengths");
  double total = 0.0;
  double t_prev = 0.0;
  for (std::size_t k = 0; k < a.trajectory.size(); ++k) {
    const double dt = a.sample_times[k] - t_prev;
    t_prev = a.sample_times[k];
    total += dt * (a.trajectory[k] - b.trajectory[k]).squaredNorm() * cell_volume;
  }
  return std::sqrt(total);
}

DeregularizationTable deregularization_study(const SpeciesField& initial,
                                             const CoefficientSet& coeffs,
                                             const EntropyWeights& weights,
                                             const SchemeConfig& cfg,
                                             const std::vector<double>& eps_list,
                                             double t_end, int threads) {
  for (std::size_t k = 0; k < eps_list.size(); ++k) {
    detail::require(eps_list[k] > 0.0, "deregularization_study: eps must be positive");
    if (k > 0)
      detail::require(eps_list[k] <= eps_list[k - 1],
                      "deregularization_study: eps_list must be nonincreasing");
  }
  const std::size_t m = eps_list.size();
  std::vector<std::optional<RunSummary>> runs(m);
  RunOptions opts;
  opts.record_trajectory = true;
  const auto job = [&](std::size_t k) {
    SchemeConfig local = cfg;
    local.reg.eps = eps_list[k];
    local.mode = SchemeMode::tied;
    return run(initial, coeffs, weights, local, t_end, {}, opts);
  };
  const std::size_t batch = static_cast<std::size_t>(std::max(1, threads));
  for (std::size_t start = 0; start < m; start += batch) {
    std::vector<std::future<RunSummary>> pending;
    for (std::size_t k = start; k < std::min(m, start + batch); ++k)
      pending.push_back(std::async(threads > 1 ? std::launch::async : std::launch::deferred, job, k));
    for (std::size_t k = 0; k < pending.size(); ++k) runs[start + k] = pending[k].get();
  }

  DeregularizationTable out;
  out.eps = eps_list;
  out.distance = Matrix::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  const double vol = initial.grid.cell_volume();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      const double d = trajectory_distance(*runs[i], *runs[j], vol);
      out.distance(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d;
      out.distance(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = d;
    }
  for (std::size_t k = 0; k + 1 < m; ++k)
    out.consecutive.push_back(out.distance(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k + 1)));
  for (std::size_t k = 0; k + 1 < out.consecutive.size(); ++k)
    if (!(out.consecutive[k + 1] < out.consecutive[k])) out.cauchy = false;
  return out;
}

}  // namespace skt

#include "oracles.hpp"

#include "skt/stepper.hpp"

#include <doctest.h>

#include <random>

using namespace skt;

namespace {

CoefficientSet two_species() {
  Matrix a(2, 2);
  a << 1.0, 0.5, 0.5, 1.0;
  return {a, Vector::Ones(2)};
}

SpeciesField bump_field(const Grid& grid, Eigen::Index n) {
  SpeciesField u{grid, Matrix(n, grid.num_cells())};
  for (Eigen::Index c = 0; c < grid.num_cells(); ++c) {
    const double x = grid.center(c, 0) / grid.length(0);
    for (Eigen::Index i = 0; i < n; ++i)
      u.values(i, c) = 0.5 + 0.4 * std::cos(3.14159265358979 * (x + 0.3 * static_cast<double>(i)));
  }
  return u;
}

SchemeConfig standard_config(double eps, double delta, double tau) {
  SchemeConfig cfg;
  cfg.mode = SchemeMode::standard;
  cfg.reg.eps = eps;
  cfg.reg.delta = delta;
  cfg.reg.tau = tau;
  return cfg;
}

}  // namespace

TEST_CASE("analytic Jacobian matches central differences in 1D") {
  const auto coeffs = two_species();
  const auto weights = make_weights(coeffs, Vector::Ones(2));
  const Grid grid = Grid::line(6, 1.0);
  const auto prev = bump_field(grid, 2);
  ImplicitEulerStepper stepper(grid, coeffs, weights, standard_config(0.05, 0.01, 0.02));

  std::mt19937_64 rng(7);
  Matrix w(2, grid.num_cells());
  for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = oracle::uniform(rng, -2.0, 0.5);

  const auto f = [&](const oracle::Vec& x) {
    return oracle::Vec(stepper.residual(prev, Eigen::Map<const Matrix>(x.data(), 2, grid.num_cells()), 0.02));
  };
  const oracle::Vec x = Eigen::Map<const oracle::Vec>(w.data(), w.size());
  const Matrix fd = oracle::fd_jacobian(f, x, 1e-6);
  const Matrix an = stepper.jacobian_dense(w, 0.02);
  CHECK((fd - an).cwiseAbs().maxCoeff() <= 1e-6 * (1.0 + an.cwiseAbs().maxCoeff()));
}

TEST_CASE("analytic Jacobian matches central differences in 2D with three species") {
  const auto coeffs = cyclic3_coefficients(0.3, 0.3, 0.3);
  const auto pi = *cyclic3_pi(0.3, 0.3, 0.3);
  const auto weights = make_weights(coeffs, pi);
  const Grid grid = Grid::rectangle(3, 3, 1.0, 2.0);
  SpeciesField prev{grid, Matrix::Constant(3, grid.num_cells(), 0.7)};
  ImplicitEulerStepper stepper(grid, coeffs, weights, standard_config(0.1, 0.0, 0.05));

  std::mt19937_64 rng(11);
  Matrix w(3, grid.num_cells());
  for (Eigen::Index i = 0; i < 3; ++i)
    for (Eigen::Index c = 0; c < grid.num_cells(); ++c)
      w(i, c) = pi(i) * oracle::uniform(rng, -1.0, 0.3);

  const auto f = [&](const oracle::Vec& x) {
    return oracle::Vec(stepper.residual(prev, Eigen::Map<const Matrix>(x.data(), 3, grid.num_cells()), 0.05));
  };
  const oracle::Vec x = Eigen::Map<const oracle::Vec>(w.data(), w.size());
  const Matrix fd = oracle::fd_jacobian(f, x, 1e-6);
  const Matrix an = stepper.jacobian_dense(w, 0.05);
  CHECK((fd - an).cwiseAbs().maxCoeff() <= 1e-6 * (1.0 + an.cwiseAbs().maxCoeff()));
}

TEST_CASE("one step solves the system, keeps positivity and mass with delta = 0") {
  const auto coeffs = two_species();
  const auto weights = make_weights(coeffs, Vector::Ones(2));
  const Grid grid = Grid::line(40, 1.0);
  const auto prev = bump_field(grid, 2);
  const auto cfg = standard_config(1e-3, 0.0, 1e-2);
  const auto res = implicit_step(prev, coeffs, weights, cfg);

  CHECK((res.next.values.array() > 0.0).all());
  CHECK(res.report.newton_residual <= 1e-11);
  const Vector drift = res.next.mass() - prev.mass();
  CHECK(drift.cwiseAbs().maxCoeff() <= 1e-12 * prev.mass().maxCoeff());
  CHECK(res.report.entropy_ok);
  CHECK(res.report.dissipation >= 0.0);

  // the residual at the returned w, recomputed, is at the Newton tolerance
  ImplicitEulerStepper stepper(grid, coeffs, weights, cfg);
  const double scale = grid.cell_volume() * prev.values.maxCoeff() / cfg.reg.tau;
  CHECK(stepper.residual(prev, res.w, cfg.reg.tau).lpNorm<Eigen::Infinity>() <= 1e-11 * scale);
}

TEST_CASE("delta > 0 drifts mass by -delta tau int w") {
  const auto coeffs = two_species();
  const auto weights = make_weights(coeffs, Vector::Ones(2));
  const Grid grid = Grid::line(30, 1.0);
  const auto prev = bump_field(grid, 2);
  const auto res = implicit_step(prev, coeffs, weights, standard_config(1e-2, 1e-2, 1e-2));
  const Vector drift = res.next.mass() - prev.mass();
  // independent recomputation of the prediction from w
  Vector predicted(2);
  for (Eigen::Index i = 0; i < 2; ++i) {
    double s = 0.0;
    for (Eigen::Index c = 0; c < grid.num_cells(); ++c) s += res.w(i, c);
    predicted(i) = -1e-2 * 1e-2 * s * grid.cell_volume();
  }
  CHECK((drift - predicted).cwiseAbs().maxCoeff() <= 1e-10 * prev.mass().maxCoeff());
  CHECK(drift.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("a constant state with delta = 0 is a fixed point") {
  const auto coeffs = two_species();
  const auto weights = make_weights(coeffs, Vector::Ones(2));
  const Grid grid = Grid::line(10, 2.0);
  SpeciesField u{grid, Matrix::Constant(2, 10, 0.8)};
  const auto res = implicit_step(u, coeffs, weights, standard_config(1e-3, 0.0, 0.1));
  CHECK((res.next.values.array() - 0.8).abs().maxCoeff() <= 1e-13);
  CHECK(res.report.newton_iters == 0);
}

TEST_CASE("entropy verification rejects a tampered state") {
  const auto coeffs = two_species();
  const auto weights = make_weights(coeffs, Vector::Ones(2));
  const Grid grid = Grid::line(20, 1.0);
  const auto prev = bump_field(grid, 2);
  const auto cfg = standard_config(1e-3, 1e-3, 1e-2);
  const auto res = implicit_step(prev, coeffs, weights, cfg);
  CHECK(verify_entropy_step(prev, res.next, res.w, res.report, cfg, coeffs, weights).passed);

  // swapping the states turns a decrease into an increase
  CHECK_FALSE(verify_entropy_step(res.next, prev, res.w, res.report, cfg, coeffs, weights).passed);
}

TEST_CASE("tied mode uses delta = eps") {
  SchemeConfig cfg;
  cfg.mode = SchemeMode::tied;
  cfg.reg.eps = 3e-3;
  cfg.reg.delta = 0.0;
  CHECK(cfg.effective().delta == doctest::Approx(3e-3));
  cfg.mode = SchemeMode::standard;
  CHECK(cfg.effective().delta == 0.0);
}

TEST_CASE("config validation") {
  SchemeConfig cfg;
  cfg.reg.eps = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.reg.eps = 1e-3;
  cfg.reg.tau = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.reg.tau = 1e-3;
  cfg.newton.damping = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("step rejects bad input") {
  const auto coeffs = two_species();
  const auto weights = make_weights(coeffs, Vector::Ones(2));
  const Grid grid = Grid::line(5, 1.0);
  SpeciesField u{grid, Matrix::Constant(2, 5, 1.0)};
  u.values(1, 2) = 0.0;
  CHECK_THROWS_AS(implicit_step(u, coeffs, weights, standard_config(1e-3, 0.0, 1e-2)),
                  std::invalid_argument);
  SpeciesField wrong{grid, Matrix::Constant(3, 5, 1.0)};
  CHECK_THROWS_AS(implicit_step(wrong, coeffs, weights, standard_config(1e-3, 0.0, 1e-2)),
                  std::invalid_argument);
}

TEST_CASE("run reports every accepted step and marks the last") {
  const auto coeffs = two_species();
  const auto weights = make_weights(coeffs, Vector::Ones(2));
  const Grid grid = Grid::line(20, 1.0);
  const auto u0 = bump_field(grid, 2);
  std::vector<StepReport> reports;
  const auto summary = run(u0, coeffs, weights, standard_config(1e-3, 0.0, 0.01), 0.1,
                           [&](const StepReport& r) { reports.push_back(r); });
  CHECK(summary.accepted_steps == 10);
  REQUIRE(reports.size() == 11);
  CHECK(reports.front().index == 0);
  CHECK(reports.back().final);
  for (std::size_t k = 0; k + 1 < reports.size(); ++k) CHECK_FALSE(reports[k].final);
  CHECK(summary.final_time == doctest::Approx(0.1));
  CHECK(summary.entropy_failures == 0);
  CHECK(summary.max_mass_error_delta0 <= 1e-12);
}

TEST_CASE("run halves rejected steps and still reaches t_end") {
  const auto coeffs = two_species();
  const auto weights = make_weights(coeffs, Vector::Ones(2));
  const Grid grid = Grid::line(30, 1.0);
  SpeciesField u0{grid, Matrix::Constant(2, 30, 0.05)};
  for (Eigen::Index c = 0; c < 10; ++c) u0.values.col(c).setConstant(4.0);
  auto cfg = standard_config(1e-4, 0.0, 0.5);
  cfg.newton.max_iters = 4;
  const auto summary = run(u0, coeffs, weights, cfg, 1.0);
  CHECK(summary.rejected_steps > 0);
  CHECK(summary.final_time == doctest::Approx(1.0));
  CHECK(summary.entropy_failures == 0);

  cfg.newton.max_iters = 1;
  RunOptions opts;
  opts.min_tau_factor = 0.1;
  CHECK_THROWS_AS(run(u0, coeffs, weights, cfg, 1.0, {}, opts), NumericalError);
}

TEST_CASE("duality monitor agrees with the discrete energy identity") {
  const auto coeffs = two_species();
  const Grid grid = Grid::rectangle(8, 6, 1.0, 1.5);
  SpeciesField u{grid, Matrix(2, grid.num_cells())};
  std::mt19937_64 rng(3);
  for (Eigen::Index k = 0; k < u.values.size(); ++k) u.values.data()[k] = oracle::uniform(rng, 0.1, 2.0);
  const auto rec = duality_monitor(u, coeffs);
  const NeumannPoisson poisson(grid);
  for (Eigen::Index i = 0; i < 2; ++i) {
    const Vector f = (u.values.row(i).array() - u.mean()(i)).matrix().transpose();
    const Vector psi = poisson.solve(f);
    // int |grad psi|^2 = int psi f for the discrete Neumann problem
    const double energy = psi.dot(f) * grid.cell_volume();
    CHECK(rec.grad_psi_sq(i) == doctest::Approx(energy).epsilon(1e-10));
    double cubic = 0.0;
    for (Eigen::Index c = 0; c < grid.num_cells(); ++c) {
      double p = coeffs.a0(i);
      for (Eigen::Index k = 0; k < 2; ++k) p += coeffs.a(i, k) * u.values(k, c);
      cubic += u.values(i, c) * u.values(i, c) * p * grid.cell_volume();
    }
    CHECK(rec.cubic(i) == doctest::Approx(cubic).epsilon(1e-12));
    CHECK(rec.cubic(i) >= rec.cubic_lower(i));
  }
  CHECK(rec.pointwise_ok);
}

TEST_CASE("default eta") {
  CHECK(default_eta(two_species()) == doctest::Approx(0.1));
  Matrix a(1, 1);
  a << 10.0;
  CHECK(default_eta(CoefficientSet(a, Vector::Ones(1))) == doctest::Approx(0.025));
  CHECK(default_eta(CoefficientSet(a, Vector::Zero(1))) == 0.0);
}

TEST_CASE("regularize_initial clamps and keeps mass") {
  const Grid grid = Grid::line(4, 1.0);
  SpeciesField u{grid, Matrix(1, 4)};
  u.values << 0.0, 1.0, 2.0, 1.0;
  const auto r = regularize_initial(u);
  CHECK((r.values.array() > 0.0).all());
  CHECK(r.mass()(0) == doctest::Approx(u.mass()(0)).epsilon(1e-14));
}

TEST_CASE("deregularization study input checks and identical eps") {
  const auto coeffs = two_species();
  const auto weights = make_weights(coeffs, Vector::Ones(2));
  const Grid grid = Grid::line(10, 1.0);
  const auto u0 = bump_field(grid, 2);
  SchemeConfig cfg;
  cfg.reg.tau = 0.01;
  CHECK_THROWS_AS(deregularization_study(u0, coeffs, weights, cfg, {1e-3, 1e-2}, 0.05),
                  std::invalid_argument);
  CHECK_THROWS_AS(deregularization_study(u0, coeffs, weights, cfg, {1e-3, 0.0}, 0.05),
                  std::invalid_argument);
  const auto table = deregularization_study(u0, coeffs, weights, cfg, {1e-3, 1e-3, 1e-4}, 0.05, 2);
  CHECK(table.distance(0, 1) == 0.0);
  CHECK(table.distance(1, 2) > 0.0);
  CHECK(table.distance(0, 2) == table.distance(2, 0));
}

#include "skt/coeffmodel.hpp"

#include "skt/simplex.hpp"

#include <queue>
#include <vector>

namespace skt {

std::optional<Vector> check_detailed_balance(const CoefficientSet& coeffs,
                                             double tol) {
  detail::require(tol > 0.0, "check_detailed_balance: tol must be positive");
  const Eigen::Index n = coeffs.size();
  const auto& a = coeffs.a();

  // Propagate ratios pi_j / pi_i = a_ij / a_ji along pairs coupled in both
  // directions. One-sided couplings are left to the residual check below.
  Vector pi = Vector::Zero(n);
  std::vector<int> component(static_cast<std::size_t>(n), -1);
  std::vector<Eigen::Index> members_count;
  int ncomp = 0;
  for (Eigen::Index root = 0; root < n; ++root) {
    if (component[static_cast<std::size_t>(root)] >= 0) continue;
    std::vector<Eigen::Index> members{root};
    component[static_cast<std::size_t>(root)] = ncomp;
    pi(root) = 1.0;
    std::queue<Eigen::Index> frontier;
    frontier.push(root);
    while (!frontier.empty()) {
      const Eigen::Index i = frontier.front();
      frontier.pop();
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i || a(i, j) <= 0.0 || a(j, i) <= 0.0) continue;
        const double candidate = pi(i) * a(i, j) / a(j, i);
        if (component[static_cast<std::size_t>(j)] < 0) {
          component[static_cast<std::size_t>(j)] = ncomp;
          pi(j) = candidate;
          members.push_back(j);
          frontier.push(j);
        }
      }
    }
    double sum = 0.0;
    for (auto k : members) sum += pi(k);
    const double share = static_cast<double>(members.size()) / static_cast<double>(n);
    for (auto k : members) pi(k) *= share / sum;
    ++ncomp;
  }

  // Cycle inconsistencies and one-sided couplings both show up here.
  const Matrix flux = pi.asDiagonal() * a;
  const double residual = (flux - flux.transpose()).cwiseAbs().maxCoeff();
  if (!(residual <= tol)) return std::nullopt;
  return pi;
}

std::optional<EntropyWeights> find_pi_max_kappa(const CoefficientSet& coeffs) {
  const Eigen::Index n = coeffs.size();
  const auto& a = coeffs.a();

  // Variables x = (p, s) with pi = p + floor and t = s - shift. The shift
  // keeps s >= 0 at the optimum because t >= -max_i sum_{j!=i} a_ji there.
  Vector inflow(n);
  for (Eigen::Index i = 0; i < n; ++i) inflow(i) = a.col(i).sum() - a(i, i);
  const double shift = inflow.maxCoeff() + 1.0;

  LinearProgram lp;
  lp.objective = Vector::Zero(n + 1);
  lp.objective(n) = 1.0;
  lp.a_ub = Matrix::Zero(n, n + 1);
  lp.b_ub = Vector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) lp.a_ub(i, j) = a(j, i);
    lp.a_ub(i, i) = -8.0 * a(i, i);
    lp.a_ub(i, n) = 1.0;
    lp.b_ub(i) = shift + kPiFloor * (8.0 * a(i, i) - inflow(i));
  }
  lp.a_eq = Matrix::Zero(1, n + 1);
  lp.a_eq.row(0).head(n).setOnes();
  lp.b_eq = Vector::Constant(1, 1.0 - static_cast<double>(n) * kPiFloor);

  const LpSolution sol = solve_lp(lp);
  if (sol.status != LpStatus::optimal) return std::nullopt;
  Vector pi = (sol.x.head(n).array() + kPiFloor).matrix();
  pi /= pi.sum();
  const double k = kappa(coeffs, pi);
  if (!(k > 0.0)) return std::nullopt;
  return EntropyWeights{pi, mu_defaults(coeffs), k};
}

EntropyWeights make_weights(const CoefficientSet& coeffs, const Vector& pi) {
  detail::require_same_size(pi, coeffs.a0(), "make_weights");
  return EntropyWeights{pi, mu_defaults(coeffs), kappa(coeffs, pi)};
}

bool mu_admissible(const CoefficientSet& coeffs, const Vector& mu) {
  if (mu.size() != coeffs.size()) return false;
  const auto& a = coeffs.a();
  for (Eigen::Index i = 0; i < coeffs.size(); ++i) {
    const double need =
        0.5 * (a.row(i).sum() + a.col(i).sum()) - a(i, i);
    if (mu(i) < need * (1.0 - 1e-14)) return false;
  }
  return true;
}

}  // namespace skt

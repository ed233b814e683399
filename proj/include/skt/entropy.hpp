#pragma once

// Entropy densities, the entropy-variable transform and its inverse, the
// (regularized) diffusion matrices, and the quadratic-form lower bounds
// that make the entropy method work for the SKT system.
//
// Everything here is pointwise in space: u is the vector of the n species
// densities at one location.

#include "skt/coeffmodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace skt {

/// eps: entropy/mobility regularization, delta: H^1 stabilization of the
/// scheme, eta: entropy shift, tau: time step.
struct RegularizationParams {
  double eps = 1e-4;
  double delta = 1e-4;
  double eta = 0.0;
  double tau = 1e-3;

  void validate() const {
    detail::require(eps >= 0.0 && delta >= 0.0 && eta >= 0.0,
                    "RegularizationParams: eps, delta, eta must be >= 0");
    detail::require(tau > 0.0, "RegularizationParams: tau must be > 0");
  }
};

/// Value of z^T M z next to the lower bound claimed for it.
struct QuadformCheck {
  double value = 0.0;
  double bound = 0.0;

  double slack() const { return 1e-10 * (1.0 + std::abs(value)); }
  bool holds() const { return value >= bound - slack(); }
};

// ---------------------------------------------------------------------------
// Entropy densities

/// h(u) = sum_i pi_i (u_i - log u_i).
template <typename DU, typename DP>
typename DU::Scalar entropy_h(const Eigen::MatrixBase<DU>& u,
                              const Eigen::MatrixBase<DP>& pi) {
  detail::require_same_size(u, pi, "entropy_h");
  return (pi.array() * (u.array() - u.array().log())).sum();
}

/// h_eps(u) = h(u) + eps sum_i u_i (log u_i - 1).
template <typename DU, typename DP>
typename DU::Scalar entropy_heps(const Eigen::MatrixBase<DU>& u,
                                 const Eigen::MatrixBase<DP>& pi,
                                 typename DU::Scalar eps) {
  using S = typename DU::Scalar;
  detail::require_same_size(u, pi, "entropy_heps");
  return entropy_h(u, pi) + eps * (u.array() * (u.array().log() - S(1))).sum();
}

// ---------------------------------------------------------------------------
// Entropy variables

/// w = h_eps'(u) for one species.
template <typename Scalar>
Scalar entropy_derivative(Scalar u, Scalar pi, Scalar eps) {
  return pi * (Scalar(1) - Scalar(1) / u) + eps * std::log(u);
}

/// Unique u > 0 with pi (1 - 1/u) + eps log u = w.
///
/// Works in s = log u, where g(s) = pi (1 - e^-s) + eps s is increasing and
/// concave. The bracket comes from the asymptotics of g; bisection narrows it
/// to width 1e-3 and a bracketed Newton iteration finishes.
template <typename Scalar>
Scalar invert_entropy_derivative(Scalar w, Scalar pi, Scalar eps) {
  using std::exp;
  using std::log;
  detail::require(eps > Scalar(0),
                  "u_from_w: eps must be > 0 for the transform to be onto");
  detail::require(pi > Scalar(0), "u_from_w: pi must be positive");
  detail::require(std::isfinite(static_cast<double>(w)),
                  "u_from_w: w must be finite");

  const auto g = [&](Scalar s) { return pi * (-std::expm1(-s)) + eps * s; };

  // g(0) = 0, so the root sits on the side of 0 given by the sign of w.
  Scalar lo;
  Scalar hi;
  if (w < Scalar(0)) {
    // eps s < 0 there, so pi(1 - e^-s) >= w at the root
    lo = -std::log1p(-w / pi);
    hi = Scalar(0);
  } else if (w < pi) {
    // u = pi / (pi - w) solves the eps = 0 equation; eps log u >= 0 on top
    lo = Scalar(0);
    hi = log(pi / (pi - w));
  } else {
    // eps s = w - pi + pi e^-s with s >= (w - pi)/eps
    const Scalar base = (w - pi) / eps;
    lo = base;
    hi = base + (pi / eps) * exp(-base);
  }

  while (hi - lo > Scalar(1e-3)) {
    const Scalar mid = Scalar(0.5) * (lo + hi);
    (g(mid) < w ? lo : hi) = mid;
  }

  Scalar s = Scalar(0.5) * (lo + hi);
  const Scalar target_tol =
      Scalar(1e-15) * (Scalar(1) + std::abs(w));
  for (int it = 0; it < 60; ++it) {
    const Scalar r = g(s) - w;
    if (std::abs(r) <= target_tol) break;
    (r < Scalar(0) ? lo : hi) = s;
    const Scalar slope = pi * exp(-s) + eps;
    Scalar next = s - r / slope;
    if (!(next > lo && next < hi)) next = Scalar(0.5) * (lo + hi);
    if (next == s) break;
    s = next;
  }
  return exp(s);
}

/// Componentwise entropy variables w_i = pi_i (1 - 1/u_i) + eps log u_i.
template <typename DU, typename DP>
VectorX<typename DU::Scalar> w_from_u(const Eigen::MatrixBase<DU>& u,
                                      const Eigen::MatrixBase<DP>& pi,
                                      typename DU::Scalar eps) {
  using S = typename DU::Scalar;
  detail::require_same_size(u, pi, "w_from_u");
  detail::require(eps > S(0), "w_from_u: eps must be > 0");
  return (pi.array() * (S(1) - u.array().inverse()) + eps * u.array().log())
      .matrix();
}

/// Inverse of w_from_u; always strictly positive.
template <typename DW, typename DP>
VectorX<typename DW::Scalar> u_from_w(const Eigen::MatrixBase<DW>& w,
                                      const Eigen::MatrixBase<DP>& pi,
                                      typename DW::Scalar eps) {
  using S = typename DW::Scalar;
  detail::require_same_size(w, pi, "u_from_w");
  VectorX<S> u(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i)
    u(i) = invert_entropy_derivative<S>(w(i), pi(i), eps);
  return u;
}

/// Diagonal of H_eps(u): pi_i / u_i^2 + eps / u_i.
template <typename DU, typename DP>
VectorX<typename DU::Scalar> hessian_Heps(const Eigen::MatrixBase<DU>& u,
                                          const Eigen::MatrixBase<DP>& pi,
                                          typename DU::Scalar eps) {
  detail::require_same_size(u, pi, "hessian_Heps");
  return (pi.array() / u.array().square() + eps / u.array()).matrix();
}

// ---------------------------------------------------------------------------
// Diffusion matrices

/// A_ij(u) = delta_ij (a_i0 + sum_k a_ik u_k) + a_ij u_i.
template <typename Scalar, typename DU>
MatrixX<Scalar> diffusion_A(const Eigen::MatrixBase<DU>& u,
                            const BasicCoefficientSet<Scalar>& coeffs) {
  detail::require_same_size(u, coeffs.a0(), "diffusion_A");
  MatrixX<Scalar> A = u.asDiagonal() * coeffs.a();
  A.diagonal() += coeffs.a0() + coeffs.a() * u;
  return A;
}

/// A_eps(u) = A(u) + eps diag(mu_i / pi_i u_i^2).
template <typename Scalar, typename DU>
MatrixX<Scalar> diffusion_Aeps(const Eigen::MatrixBase<DU>& u,
                               const BasicCoefficientSet<Scalar>& coeffs,
                               const BasicEntropyWeights<Scalar>& weights,
                               Scalar eps) {
  detail::require_same_size(weights.mu, weights.pi, "diffusion_Aeps");
  MatrixX<Scalar> A = diffusion_A(u, coeffs);
  A.diagonal().array() +=
      eps * weights.mu.array() / weights.pi.array() * u.array().square();
  return A;
}

/// p_i(u) = a_i0 + sum_k a_ik u_k.
template <typename Scalar, typename DU>
VectorX<Scalar> pressure_p(const Eigen::MatrixBase<DU>& u,
                           const BasicCoefficientSet<Scalar>& coeffs) {
  detail::require_same_size(u, coeffs.a0(), "pressure_p");
  return coeffs.a0() + coeffs.a() * u;
}

// ---------------------------------------------------------------------------
// Quadratic-form lower bounds

namespace detail {

template <typename Scalar>
VectorX<Scalar> kappa_rows(const BasicCoefficientSet<Scalar>& coeffs,
                           const VectorX<Scalar>& pi) {
  const auto& a = coeffs.a();
  return (Scalar(8) * pi.array() * a.diagonal().array()).matrix() -
         (a.transpose() * pi - (a.diagonal().array() * pi.array()).matrix());
}

}  // namespace detail

/// z^T H(u) A(u) z against
///   sum_i pi_i a_i0 z_i^2/u_i^2 + 1/4 sum_i (8 pi_i a_ii - sum_{j!=i} pi_j a_ji) z_i^2/u_i.
template <typename Scalar>
QuadformCheck quadform_bound_HA(const VectorX<Scalar>& u,
                                const VectorX<Scalar>& z,
                                const BasicCoefficientSet<Scalar>& coeffs,
                                const VectorX<Scalar>& pi) {
  detail::require_same_size(u, z, "quadform_bound_HA");
  detail::require_same_size(u, pi, "quadform_bound_HA");
  detail::require((u.array() > Scalar(0)).all(),
                  "quadform_bound_HA: u must be positive");
  const VectorX<Scalar> hdiag = (pi.array() / u.array().square()).matrix();
  const MatrixX<Scalar> A = diffusion_A(u, coeffs);
  const Scalar value = z.dot(hdiag.asDiagonal() * (A * z));
  const auto z2 = z.array().square();
  const Scalar bound =
      (pi.array() * coeffs.a0().array() * z2 / u.array().square()).sum() +
      Scalar(0.25) *
          (detail::kappa_rows(coeffs, pi).array() * z2 / u.array()).sum();
  return {static_cast<double>(value), static_cast<double>(bound)};
}

/// z^T H_eps(u) A_eps(u) z against the HA bound + 2 eps sum a_ii z_i^2
/// + eps^2 sum (mu_i/pi_i) u_i z_i^2. Requires admissible mu.
template <typename Scalar>
QuadformCheck quadform_bound_HepsAeps(const VectorX<Scalar>& u,
                                      const VectorX<Scalar>& z,
                                      const BasicCoefficientSet<Scalar>& coeffs,
                                      const BasicEntropyWeights<Scalar>& weights,
                                      Scalar eps) {
  if (!mu_admissible(coeffs, weights.mu))
    throw std::invalid_argument(
        "quadform_bound_HepsAeps: mu_i < sum_{j!=i}(a_ij + a_ji)/2");
  const VectorX<Scalar> hdiag = hessian_Heps(u, weights.pi, eps);
  const MatrixX<Scalar> A = diffusion_Aeps(u, coeffs, weights, eps);
  const Scalar value = z.dot(hdiag.asDiagonal() * (A * z));
  const auto z2 = z.array().square();
  const Scalar bound =
      static_cast<Scalar>(quadform_bound_HA(u, z, coeffs, weights.pi).bound) +
      Scalar(2) * eps * (coeffs.a().diagonal().array() * z2).sum() +
      eps * eps *
          (weights.mu.array() / weights.pi.array() * u.array() * z2).sum();
  return {static_cast<double>(value), static_cast<double>(bound)};
}

/// z^T H_eps(u + eta) A_eps(u) z against
///   kappa/4 sum z_i^2/(u_i+eta) - eta eps C1 sum z_i^2/(u_i+eta) - eta eps^2 C2 sum z_i^2
/// with C1 = 2 max_i(sum_j a_ij + mu_i) and C2 = 2 max_i(mu_i/pi_i).
/// Requires 0 < eta <= eta0(coeffs).
template <typename Scalar>
QuadformCheck quadform_bound_shifted(const VectorX<Scalar>& u,
                                     const VectorX<Scalar>& z,
                                     const BasicCoefficientSet<Scalar>& coeffs,
                                     const BasicEntropyWeights<Scalar>& weights,
                                     Scalar eps, Scalar eta) {
  detail::require(eta > Scalar(0), "quadform_bound_shifted: eta must be > 0");
  if (eta > eta0(coeffs)) throw std::invalid_argument("shift exceeds eta0");
  if (!mu_admissible(coeffs, weights.mu))
    throw std::invalid_argument(
        "quadform_bound_shifted: mu_i < sum_{j!=i}(a_ij + a_ji)/2");
  const VectorX<Scalar> shifted = (u.array() + eta).matrix();
  const VectorX<Scalar> hdiag = hessian_Heps(shifted, weights.pi, eps);
  const MatrixX<Scalar> A = diffusion_Aeps(u, coeffs, weights, eps);
  const Scalar value = z.dot(hdiag.asDiagonal() * (A * z));

  const Scalar k = kappa(coeffs, weights.pi);
  const Scalar c1 =
      Scalar(2) * (coeffs.a().rowwise().sum() + weights.mu).maxCoeff();
  const Scalar c2 =
      Scalar(2) * (weights.mu.array() / weights.pi.array()).maxCoeff();
  const Scalar weighted = (z.array().square() / shifted.array()).sum();
  const Scalar bound = (k / Scalar(4)) * weighted -
                       eta * eps * c1 * weighted -
                       eta * eps * eps * c2 * z.squaredNorm();
  return {static_cast<double>(value), static_cast<double>(bound)};
}

// ---------------------------------------------------------------------------
// Relative entropy

namespace detail {

template <typename Scalar>
Scalar x_minus_log1p(Scalar x) {
  using std::abs;
  using std::log1p;
  if (abs(x) < Scalar(1e-3)) {
    // x^2/2 - x^3/3 + x^4/4 - x^5/5 + x^6/6
    const Scalar x2 = x * x;
    return x2 * (Scalar(1) / 2 -
                 x * (Scalar(1) / 3 -
                      x * (Scalar(1) / 4 - x * (Scalar(1) / 5 - x / 6))));
  }
  return x - log1p(x);
}

}  // namespace detail

/// H_eta(u | ubar) = sum_i pi_i sum_cells (log(ubar_i + eta) - log(u_i + eta)) vol,
/// valid when each species of `values` (rows = species, cols = cells) has
/// mass ubar_i * (cells * vol).
template <typename Scalar>
Scalar relative_entropy_eta(const VectorX<Scalar>& ubar,
                            const MatrixX<Scalar>& values, Scalar eta,
                            const VectorX<Scalar>& pi, Scalar cell_volume) {
  detail::require(eta > Scalar(0), "relative_entropy_eta: eta must be > 0");
  detail::require(values.rows() == ubar.size() && pi.size() == ubar.size(),
                  "relative_entropy_eta: dimension mismatch");
  const Scalar measure = cell_volume * static_cast<Scalar>(values.cols());
  Scalar total = 0;
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    const Scalar mass = values.row(i).sum() * cell_volume;
    const Scalar expected = ubar(i) * measure;
    if (std::abs(mass - expected) >
        Scalar(1e-10) * std::max(std::abs(expected), Scalar(1e-300)))
      throw std::invalid_argument(
          "relative_entropy_eta: mass does not match ubar (formula invalid)");
    // The deviations integrate to zero, so adding x = (u - ubar)/(ubar + eta)
    // leaves the sum unchanged and makes every term x - log(1 + x) >= 0.
    const Scalar base = ubar(i) + eta;
    Scalar acc = 0;
    for (Eigen::Index c = 0; c < values.cols(); ++c)
      acc += detail::x_minus_log1p((values(i, c) - ubar(i)) / base);
    total += pi(i) * acc * cell_volume;
  }
  return total;
}

/// sqrt(8) ||ubar + eta||_{L2} sqrt(H): the L1 distance bound to the mean.
template <typename Scalar>
Scalar csiszar_kullback_rhs(Scalar ubar, Scalar eta, Scalar rel_entropy,
                            Scalar domain_measure) {
  detail::require(rel_entropy >= Scalar(0),
                  "csiszar_kullback_rhs: relative entropy must be >= 0");
  using std::sqrt;
  return sqrt(Scalar(8)) * (ubar + eta) * sqrt(domain_measure) *
         sqrt(rel_entropy);
}

}  // namespace skt

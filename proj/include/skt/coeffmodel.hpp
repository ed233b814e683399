#pragma once

// Diffusion coefficients of the n-species SKT system and the structural
// conditions on them: detailed balance, self-diffusion dominance, and the
// weighted kappa condition min_i(8 pi_i a_ii - sum_{j!=i} pi_j a_ji) > 0.

#include "skt/types.hpp"

#include <cmath>
#include <limits>
#include <optional>

namespace skt {

/// Floor on every pi_i inside the max-kappa linear program.
inline constexpr double kPiFloor = 1e-9;
/// Lower bound on mu_i so the epsilon-regularization never vanishes.
inline constexpr double kMuFloor = 1e-8;
/// Default absolute tolerance for detailed balance after normalization.
inline constexpr double kDetailedBalanceTol = 1e-10;

/// Coefficients (a_ij) and (a_i0). All entries finite and nonnegative.
template <typename Scalar>
class BasicCoefficientSet {
 public:
  BasicCoefficientSet(MatrixX<Scalar> a, VectorX<Scalar> a0)
      : a_(std::move(a)), a0_(std::move(a0)) {
    detail::require(a_.rows() >= 1, "CoefficientSet: need at least one species");
    detail::require(a_.rows() == a_.cols(), "CoefficientSet: a must be square");
    detail::require(a0_.size() == a_.rows(),
                    "CoefficientSet: a0 length must equal species count");
    detail::require(a_.allFinite() && a0_.allFinite(),
                    "CoefficientSet: entries must be finite");
    detail::require((a_.array() >= Scalar(0)).all() &&
                        (a0_.array() >= Scalar(0)).all(),
                    "CoefficientSet: entries must be nonnegative");
  }

  Eigen::Index size() const { return a_.rows(); }
  const MatrixX<Scalar>& a() const { return a_; }
  const VectorX<Scalar>& a0() const { return a0_; }
  Scalar a(Eigen::Index i, Eigen::Index j) const { return a_(i, j); }
  Scalar a0(Eigen::Index i) const { return a0_(i); }

 private:
  MatrixX<Scalar> a_;
  VectorX<Scalar> a0_;
};

using CoefficientSet = BasicCoefficientSet<double>;

/// The entropy-structure certificate: pi > 0, mu large enough for the
/// regularized mobility to stay positive, and the kappa margin for pi.
template <typename Scalar>
struct BasicEntropyWeights {
  VectorX<Scalar> pi;
  VectorX<Scalar> mu;
  Scalar kappa{};
};

using EntropyWeights = BasicEntropyWeights<double>;

/// min_i (8 pi_i a_ii - sum_{j != i} pi_j a_ji).
template <typename Scalar, typename Derived>
Scalar kappa(const BasicCoefficientSet<Scalar>& coeffs,
             const Eigen::MatrixBase<Derived>& pi) {
  detail::require(pi.size() == coeffs.size(), "kappa: dimension mismatch");
  detail::require((pi.array() > Scalar(0)).all(),
                  "kappa: pi entries must be positive");
  const auto& a = coeffs.a();
  // column i of a weighted by pi, minus the diagonal contribution
  const VectorX<Scalar> inflow =
      (a.transpose() * pi.template cast<Scalar>()).eval() -
      (a.diagonal().array() * pi.array().template cast<Scalar>()).matrix();
  const VectorX<Scalar> margin =
      (Scalar(8) * pi.array().template cast<Scalar>() * a.diagonal().array())
          .matrix() -
      inflow;
  return margin.minCoeff();
}

/// Self-diffusion dominance: 4 a_ii > sum_j (sqrt a_ij - sqrt a_ji)^2 for all i.
template <typename Scalar>
bool check_wcd(const BasicCoefficientSet<Scalar>& coeffs) {
  const auto root = coeffs.a().array().sqrt().matrix().eval();
  const MatrixX<Scalar> diff = root - root.transpose();
  const VectorX<Scalar> asym = diff.array().square().rowwise().sum();
  return ((Scalar(4) * coeffs.a().diagonal().array()) > asym.array()).all();
}

/// mu_i = max(sum_{j != i} (a_ij + a_ji) / 2, kMuFloor).
template <typename Scalar>
VectorX<Scalar> mu_defaults(const BasicCoefficientSet<Scalar>& coeffs) {
  const auto& a = coeffs.a();
  const VectorX<Scalar> sym =
      (a.rowwise().sum() + a.colwise().sum().transpose()) / Scalar(2) -
      a.diagonal();
  return sym.cwiseMax(Scalar(kMuFloor));
}

/// Largest admissible entropy shift: min_i a_i0 / (sum_j a_ij + a_ii).
/// Rows with no diffusion at all contribute +infinity; the result is
/// +infinity only when every row is identically zero.
template <typename Scalar>
Scalar eta0(const BasicCoefficientSet<Scalar>& coeffs) {
  if ((coeffs.a0().array() <= Scalar(0)).any())
    throw std::invalid_argument("eta0 undefined: requires a_i0 > 0");
  Scalar best = std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index i = 0; i < coeffs.size(); ++i) {
    const Scalar denom = coeffs.a().row(i).sum() + coeffs.a(i, i);
    if (denom > Scalar(0)) best = std::min(best, coeffs.a0(i) / denom);
  }
  return best;
}

/// The three-species cyclic coefficient set: a_13 = a_21 = a_32 = 1, the
/// reverse couplings zero, with the given self-diffusion and a_i0.
template <typename Scalar = double>
BasicCoefficientSet<Scalar> cyclic3_coefficients(Scalar a11, Scalar a22,
                                                 Scalar a33,
                                                 Scalar a0 = Scalar(1)) {
  MatrixX<Scalar> a = MatrixX<Scalar>::Zero(3, 3);
  a(0, 0) = a11;
  a(1, 1) = a22;
  a(2, 2) = a33;
  a(0, 2) = a(1, 0) = a(2, 1) = Scalar(1);
  return {a, VectorX<Scalar>::Constant(3, a0)};
}

/// Constructive weights for the cyclic three-species set. Present iff
/// a11 a22 a33 > 8^-3; then pi = (1, pi2, pi3) gives kappa > 0.
template <typename Scalar>
std::optional<VectorX<Scalar>> cyclic3_pi(Scalar a11, Scalar a22, Scalar a33) {
  detail::require(a11 > 0 && a22 > 0 && a33 > 0,
                  "cyclic3_pi: self-diffusion coefficients must be positive");
  if (!(Scalar(512) * a11 * a22 * a33 > Scalar(1))) return std::nullopt;
  VectorX<Scalar> pi(3);
  pi(0) = Scalar(1);
  pi(1) = (Scalar(8) * a11 + Scalar(1) / (Scalar(64) * a22 * a33)) / Scalar(2);
  pi(2) = (Scalar(8) * pi(1) * a22 + Scalar(1) / (Scalar(8) * a33)) / Scalar(2);
  return pi;
}

/// Finds pi > 0 with pi_i a_ij = pi_j a_ji, normalized to sum 1 with each
/// connected component of the coupling graph carrying weight
/// |component| / n. Absent when the ratios are inconsistent.
std::optional<Vector> check_detailed_balance(const CoefficientSet& coeffs,
                                             double tol = kDetailedBalanceTol);

/// Maximizes kappa over pi on the simplex with pi_i >= kPiFloor. Returns
/// weights only when the optimum is strictly positive.
std::optional<EntropyWeights> find_pi_max_kappa(const CoefficientSet& coeffs);

/// Assembles weights from a user-supplied pi (mu from mu_defaults).
EntropyWeights make_weights(const CoefficientSet& coeffs, const Vector& pi);

/// True when mu_i >= sum_{j != i}(a_ij + a_ji)/2 for every i.
bool mu_admissible(const CoefficientSet& coeffs, const Vector& mu);

}  // namespace skt

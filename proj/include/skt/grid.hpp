#pragma once

// Cell-centered uniform grids on a line or a rectangle with no-flux
// boundaries. Only interior faces are stored; boundary faces carry zero
// gradient and zero flux, which makes every conservative operator here
// telescope exactly.

#include "skt/coeffmodel.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <array>
#include <memory>
#include <vector>

namespace skt {

class Grid {
 public:
  struct Face {
    Eigen::Index left;   // cell on the low side
    Eigen::Index right;  // cell on the high side
    double spacing;      // center-to-center distance
    double area;         // face measure (1 in 1D)
    int axis;
  };

  static Grid line(int cells, double length);
  static Grid rectangle(int nx, int ny, double lx, double ly);

  int dim() const { return dim_; }
  int cells(int axis) const { return cells_[static_cast<std::size_t>(axis)]; }
  double length(int axis) const { return lengths_[static_cast<std::size_t>(axis)]; }
  double spacing(int axis) const { return length(axis) / cells(axis); }
  Eigen::Index num_cells() const;
  double cell_volume() const;
  double measure() const;
  const std::vector<Face>& faces() const { return faces_; }

  /// Cell-center coordinate along `axis` of flat cell index c.
  double center(Eigen::Index c, int axis) const;

  bool operator==(const Grid& other) const {
    return dim_ == other.dim_ && cells_ == other.cells_ &&
           lengths_ == other.lengths_;
  }

 private:
  Grid(int dim, std::array<int, 2> cells, std::array<double, 2> lengths);

  int dim_;
  std::array<int, 2> cells_;
  std::array<double, 2> lengths_;
  std::vector<Face> faces_;
};

/// Densities of n species on a grid; rows are species, columns cells.
struct SpeciesField {
  Grid grid;
  Matrix values;

  Eigen::Index species() const { return values.rows(); }
  Vector mass() const { return values.rowwise().sum() * grid.cell_volume(); }
  Vector mean() const { return mass() / grid.measure(); }
};

/// Sum of cell values times cell volume.
double integrate(const Grid& grid, const Eigen::Ref<const Eigen::RowVectorXd>& values);

/// (v_right - v_left) / spacing on every interior face.
Vector face_gradient(const Grid& grid, const Eigen::Ref<const Eigen::RowVectorXd>& values);

/// Per-cell rates div(A_eps(u) grad u) with the face state taken as the
/// arithmetic mean of the neighbouring cells. Rows = species.
Matrix flux_divergence(const SpeciesField& u, const CoefficientSet& coeffs,
                       const EntropyWeights& weights, double eps);

/// Per-cell rates div(B_eps grad w) with B_eps = A_eps H_eps^{-1} evaluated
/// at the arithmetic face mean of u and w the entropy variables of u. This is
/// the form the time stepper discretizes.
Matrix mobility_flux_divergence(const SpeciesField& u, const Matrix& w,
                                const CoefficientSet& coeffs,
                                const EntropyWeights& weights, double eps);

/// Telescoping diagnostics of a flux operator: |sum rate*vol| per species and
/// the sum of |face flux * area| per species.
struct ConservationCheck {
  Vector net;
  Vector gross;
};
ConservationCheck conservation_check(const Grid& grid, const Matrix& rates,
                                     const Matrix& face_fluxes);

/// Face fluxes of flux_divergence (rows species, cols interior faces).
Matrix primitive_face_fluxes(const SpeciesField& u, const CoefficientSet& coeffs,
                             const EntropyWeights& weights, double eps);

/// Discrete Neumann Laplacian with a cached factorization.
class NeumannPoisson {
 public:
  explicit NeumannPoisson(const Grid& grid);
  NeumannPoisson(const NeumannPoisson&) = delete;
  NeumannPoisson& operator=(const NeumannPoisson&) = delete;

  /// Solves -Lap psi = rhs with zero-flux closure and zero mean. Throws when
  /// rhs does not integrate to zero (relative 1e-10).
  Vector solve(const Eigen::Ref<const Vector>& rhs) const;

  /// -Lap psi per cell, the operator solve() inverts.
  Vector apply(const Eigen::Ref<const Vector>& psi) const;

  const Grid& grid() const { return grid_; }

 private:
  Grid grid_;
  Eigen::SparseMatrix<double> stiffness_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> pinned_;
};

Vector neumann_poisson_solve(const Grid& grid, const Eigen::Ref<const Vector>& rhs);

struct DiscreteNorms {
  Vector l1;
  Vector l2;
  Vector l3;
};

DiscreteNorms discrete_norms(const SpeciesField& u);

/// Per-species sum over faces of |grad sqrt(u)|^2 times face volume.
Vector fisher(const SpeciesField& u);

}  // namespace skt

#include "skt/grid.hpp"

#include "skt/entropy.hpp"

#include <cmath>

namespace skt {

Grid::Grid(int dim, std::array<int, 2> cells, std::array<double, 2> lengths)
    : dim_(dim), cells_(cells), lengths_(lengths) {
  detail::require(dim == 1 || dim == 2, "Grid: dimension must be 1 or 2");
  for (int ax = 0; ax < dim; ++ax) {
    detail::require(cells_[static_cast<std::size_t>(ax)] >= 2,
                    "Grid: need at least 2 cells per axis");
    detail::require(lengths_[static_cast<std::size_t>(ax)] > 0.0 &&
                        std::isfinite(lengths_[static_cast<std::size_t>(ax)]),
                    "Grid: lengths must be positive");
  }
  const int nx = cells_[0];
  const int ny = dim == 2 ? cells_[1] : 1;
  const double hx = spacing(0);
  const double hy = dim == 2 ? spacing(1) : 1.0;
  faces_.reserve(static_cast<std::size_t>((nx - 1) * ny + (dim == 2 ? nx * (ny - 1) : 0)));
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix + 1 < nx; ++ix) {
      const Eigen::Index c = static_cast<Eigen::Index>(iy) * nx + ix;
      faces_.push_back({c, c + 1, hx, hy, 0});
    }
  if (dim == 2)
    for (int iy = 0; iy + 1 < ny; ++iy)
      for (int ix = 0; ix < nx; ++ix) {
        const Eigen::Index c = static_cast<Eigen::Index>(iy) * nx + ix;
        faces_.push_back({c, c + nx, hy, hx, 1});
      }
}

Grid Grid::line(int cells, double length) {
  return Grid(1, {cells, 1}, {length, 1.0});
}

Grid Grid::rectangle(int nx, int ny, double lx, double ly) {
  return Grid(2, {nx, ny}, {lx, ly});
}

Eigen::Index Grid::num_cells() const {
  return static_cast<Eigen::Index>(cells_[0]) * (dim_ == 2 ? cells_[1] : 1);
}

double Grid::cell_volume() const {
  return dim_ == 2 ? spacing(0) * spacing(1) : spacing(0);
}

double Grid::measure() const {
  return dim_ == 2 ? lengths_[0] * lengths_[1] : lengths_[0];
}

double Grid::center(Eigen::Index c, int axis) const {
  const Eigen::Index idx = axis == 0 ? c % cells_[0] : c / cells_[0];
  return (static_cast<double>(idx) + 0.5) * spacing(axis);
}

double integrate(const Grid& grid, const Eigen::Ref<const Eigen::RowVectorXd>& values) {
  return values.sum() * grid.cell_volume();
}

Vector face_gradient(const Grid& grid, const Eigen::Ref<const Eigen::RowVectorXd>& values) {
  detail::require(values.size() == grid.num_cells(), "face_gradient: size mismatch");
  const auto& faces = grid.faces();
  Vector g(static_cast<Eigen::Index>(faces.size()));
  for (std::size_t f = 0; f < faces.size(); ++f)
    g(static_cast<Eigen::Index>(f)) =
        (values(faces[f].right) - values(faces[f].left)) / faces[f].spacing;
  return g;
}

namespace {

void require_positive(const SpeciesField& u, const char* what) {
  if (!(u.values.array() > 0.0).all())
    throw std::invalid_argument(std::string(what) + ": nonpositive cell density");
}

Matrix divergence(const Grid& grid, const Matrix& face_fluxes) {
  Matrix rates = Matrix::Zero(face_fluxes.rows(), grid.num_cells());
  const double inv_vol = 1.0 / grid.cell_volume();
  const auto& faces = grid.faces();
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const auto col = face_fluxes.col(static_cast<Eigen::Index>(f)) * faces[f].area;
    rates.col(faces[f].left) += col * inv_vol;
    rates.col(faces[f].right) -= col * inv_vol;
  }
  return rates;
}

}  // namespace

Matrix primitive_face_fluxes(const SpeciesField& u, const CoefficientSet& coeffs,
                             const EntropyWeights& weights, double eps) {
  detail::require(u.species() == coeffs.size(), "flux_divergence: species mismatch");
  require_positive(u, "flux_divergence");
  const auto& faces = u.grid.faces();
  Matrix fluxes(u.species(), static_cast<Eigen::Index>(faces.size()));
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const auto& face = faces[f];
    const Vector mid = 0.5 * (u.values.col(face.left) + u.values.col(face.right));
    const Vector grad = (u.values.col(face.right) - u.values.col(face.left)) / face.spacing;
    fluxes.col(static_cast<Eigen::Index>(f)) =
        diffusion_Aeps(mid, coeffs, weights, eps) * grad;
  }
  return fluxes;
}

Matrix flux_divergence(const SpeciesField& u, const CoefficientSet& coeffs,
                       const EntropyWeights& weights, double eps) {
  return divergence(u.grid, primitive_face_fluxes(u, coeffs, weights, eps));
}

Matrix mobility_flux_divergence(const SpeciesField& u, const Matrix& w,
                                const CoefficientSet& coeffs,
                                const EntropyWeights& weights, double eps) {
  detail::require(u.species() == coeffs.size() && w.rows() == u.species() &&
                      w.cols() == u.values.cols(),
                  "mobility_flux_divergence: shape mismatch");
  require_positive(u, "mobility_flux_divergence");
  const auto& faces = u.grid.faces();
  Matrix fluxes(u.species(), static_cast<Eigen::Index>(faces.size()));
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const auto& face = faces[f];
    const Vector mid = 0.5 * (u.values.col(face.left) + u.values.col(face.right));
    const Vector grad = (w.col(face.right) - w.col(face.left)) / face.spacing;
    const Vector hinv = hessian_Heps(mid, weights.pi, eps).cwiseInverse();
    fluxes.col(static_cast<Eigen::Index>(f)) =
        diffusion_Aeps(mid, coeffs, weights, eps) * hinv.asDiagonal() * grad;
  }
  return divergence(u.grid, fluxes);
}

ConservationCheck conservation_check(const Grid& grid, const Matrix& rates,
                                     const Matrix& face_fluxes) {
  ConservationCheck out;
  out.net = (rates.rowwise().sum() * grid.cell_volume()).cwiseAbs();
  out.gross = Vector::Zero(face_fluxes.rows());
  const auto& faces = grid.faces();
  for (std::size_t f = 0; f < faces.size(); ++f)
    out.gross += face_fluxes.col(static_cast<Eigen::Index>(f)).cwiseAbs() * faces[f].area;
  return out;
}

// ---------------------------------------------------------------------------

NeumannPoisson::NeumannPoisson(const Grid& grid) : grid_(grid) {
  const Eigen::Index n = grid.num_cells();
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(grid.faces().size() * 4);
  for (const auto& face : grid.faces()) {
    const double k = face.area / face.spacing;
    entries.emplace_back(face.left, face.left, k);
    entries.emplace_back(face.right, face.right, k);
    entries.emplace_back(face.left, face.right, -k);
    entries.emplace_back(face.right, face.left, -k);
  }
  stiffness_.resize(n, n);
  stiffness_.setFromTriplets(entries.begin(), entries.end());

  // Fixing psi at cell 0 removes the constant null space; the remaining
  // block is SPD. The dropped equation holds automatically for zero-mean rhs.
  Eigen::SparseMatrix<double> reduced = stiffness_.bottomRightCorner(n - 1, n - 1);
  pinned_.compute(reduced);
  if (pinned_.info() != Eigen::Success)
    throw NumericalError("NeumannPoisson: factorization failed");
}

Vector NeumannPoisson::solve(const Eigen::Ref<const Vector>& rhs) const {
  const Eigen::Index n = grid_.num_cells();
  detail::require(rhs.size() == n, "neumann_poisson_solve: size mismatch");
  const double vol = grid_.cell_volume();
  const double net = rhs.sum() * vol;
  const double scale = rhs.cwiseAbs().sum() * vol;
  if (std::abs(net) > 1e-10 * std::max(scale, 1e-300) && scale > 0.0)
    throw std::invalid_argument("neumann_poisson_solve: rhs mean not zero");
  Vector psi = Vector::Zero(n);
  if (scale == 0.0) return psi;
  const Vector load = rhs * vol;
  psi.tail(n - 1) = pinned_.solve(load.tail(n - 1));
  psi.array() -= psi.mean();
  return psi;
}

Vector NeumannPoisson::apply(const Eigen::Ref<const Vector>& psi) const {
  return (stiffness_ * psi) / grid_.cell_volume();
}

Vector neumann_poisson_solve(const Grid& grid, const Eigen::Ref<const Vector>& rhs) {
  return NeumannPoisson(grid).solve(rhs);
}

DiscreteNorms discrete_norms(const SpeciesField& u) {
  const double vol = u.grid.cell_volume();
  const auto abs = u.values.array().abs();
  DiscreteNorms out;
  out.l1 = abs.rowwise().sum().matrix() * vol;
  out.l2 = (abs.square().rowwise().sum() * vol).sqrt().matrix();
  out.l3 = (abs.cube().rowwise().sum() * vol).pow(1.0 / 3.0).matrix();
  return out;
}

Vector fisher(const SpeciesField& u) {
  const Matrix roots = u.values.array().sqrt().matrix();
  Vector out = Vector::Zero(u.species());
  for (const auto& face : u.grid.faces()) {
    const double face_volume = face.area * face.spacing;
    const Vector g = (roots.col(face.right) - roots.col(face.left)) / face.spacing;
    out += g.cwiseAbs2() * face_volume;
  }
  return out;
}

}  // namespace skt

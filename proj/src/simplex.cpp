#include "skt/simplex.hpp"

#include <limits>
#include <vector>

namespace skt {
namespace {

constexpr double kPivotTol = 1e-12;

// Tableau with the objective in the last row. Maximization convention: the
// objective row stores -c, so a negative reduced cost means "can improve".
class Tableau {
 public:
  Tableau(Eigen::Index rows, Eigen::Index cols)
      : t_(Matrix::Zero(rows + 1, cols + 1)), basis_(rows, -1) {}

  Matrix& data() { return t_; }
  std::vector<Eigen::Index>& basis() { return basis_; }
  Eigen::Index rows() const { return t_.rows() - 1; }
  Eigen::Index cols() const { return t_.cols() - 1; }
  double rhs(Eigen::Index r) const { return t_(r, cols()); }
  double value() const { return t_(rows(), cols()); }

  void pivot(Eigen::Index r, Eigen::Index c) {
    t_.row(r) /= t_(r, c);
    for (Eigen::Index k = 0; k <= rows(); ++k) {
      if (k == r) continue;
      const double f = t_(k, c);
      if (f != 0.0) t_.row(k) -= f * t_.row(r);
    }
    basis_[static_cast<std::size_t>(r)] = c;
  }

  // Runs simplex iterations over columns [0, active_cols). Returns false on
  // an unbounded direction.
  bool optimize(Eigen::Index active_cols) {
    for (int guard = 0; guard < 100000; ++guard) {
      Eigen::Index enter = -1;
      for (Eigen::Index c = 0; c < active_cols; ++c) {
        if (t_(rows(), c) < -kPivotTol) {
          enter = c;
          break;
        }
      }
      if (enter < 0) return true;
      Eigen::Index leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index r = 0; r < rows(); ++r) {
        const double coef = t_(r, enter);
        if (coef > kPivotTol) {
          const double ratio = rhs(r) / coef;
          if (ratio < best - 1e-15 ||
              (ratio <= best + 1e-15 && leave >= 0 &&
               basis_[static_cast<std::size_t>(r)] <
                   basis_[static_cast<std::size_t>(leave)])) {
            best = ratio;
            leave = r;
          }
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
    }
    throw NumericalError("simplex: iteration limit reached");
  }

 private:
  Matrix t_;
  std::vector<Eigen::Index> basis_;
};

}  // namespace

LpSolution solve_lp(const LinearProgram& lp) {
  const Eigen::Index nvar = lp.objective.size();
  const Eigen::Index mub = lp.a_ub.rows();
  const Eigen::Index meq = lp.a_eq.rows();
  detail::require(mub == 0 || lp.a_ub.cols() == nvar, "solve_lp: A_ub shape");
  detail::require(meq == 0 || lp.a_eq.cols() == nvar, "solve_lp: A_eq shape");
  detail::require(lp.b_ub.size() == mub && lp.b_eq.size() == meq,
                  "solve_lp: rhs length");

  const Eigen::Index m = mub + meq;
  // Columns: original variables, one slack per inequality, one artificial
  // per row that lacks a natural basic variable.
  std::vector<bool> needs_art(static_cast<std::size_t>(m), false);
  Eigen::Index nart = 0;
  for (Eigen::Index r = 0; r < m; ++r) {
    const bool art = r >= mub || lp.b_ub(r) < 0.0;
    needs_art[static_cast<std::size_t>(r)] = art;
    nart += art ? 1 : 0;
  }
  const Eigen::Index art0 = nvar + mub;
  Tableau tab(m, nvar + mub + nart);
  Matrix& t = tab.data();
  const Eigen::Index rhs_col = tab.cols();

  Eigen::Index next_art = art0;
  for (Eigen::Index r = 0; r < m; ++r) {
    const bool is_ub = r < mub;
    double sign = 1.0;
    double b = is_ub ? lp.b_ub(r) : lp.b_eq(r - mub);
    if (b < 0.0) sign = -1.0;
    if (is_ub) {
      t.row(r).head(nvar) = sign * lp.a_ub.row(r);
      t(r, nvar + r) = sign;
    } else {
      t.row(r).head(nvar) = sign * lp.a_eq.row(r - mub);
    }
    t(r, rhs_col) = sign * b;
    if (needs_art[static_cast<std::size_t>(r)]) {
      t(r, next_art) = 1.0;
      tab.basis()[static_cast<std::size_t>(r)] = next_art++;
    } else {
      tab.basis()[static_cast<std::size_t>(r)] = nvar + r;
    }
  }

  LpSolution out;
  if (nart > 0) {
    // Phase I: maximize -(sum of artificials).
    t.row(m).setZero();
    for (Eigen::Index c = art0; c < art0 + nart; ++c) t(m, c) = 1.0;
    for (Eigen::Index r = 0; r < m; ++r)
      if (needs_art[static_cast<std::size_t>(r)]) t.row(m) -= t.row(r);
    tab.optimize(tab.cols());
    if (tab.value() < -1e-9) return out;  // infeasible
    // Drive remaining artificials out of the basis where possible.
    for (Eigen::Index r = 0; r < m; ++r) {
      if (tab.basis()[static_cast<std::size_t>(r)] < art0) continue;
      for (Eigen::Index c = 0; c < art0; ++c) {
        if (std::abs(t(r, c)) > kPivotTol) {
          tab.pivot(r, c);
          break;
        }
      }
    }
  }

  // Phase II over non-artificial columns.
  t.row(m).setZero();
  t.row(m).head(nvar) = -lp.objective.transpose();
  for (Eigen::Index r = 0; r < m; ++r) {
    const Eigen::Index b = tab.basis()[static_cast<std::size_t>(r)];
    if (b < art0 && t(m, b) != 0.0) t.row(m) -= t(m, b) * t.row(r);
  }
  if (!tab.optimize(art0)) {
    out.status = LpStatus::unbounded;
    return out;
  }

  out.status = LpStatus::optimal;
  out.x = Vector::Zero(nvar);
  for (Eigen::Index r = 0; r < m; ++r) {
    const Eigen::Index b = tab.basis()[static_cast<std::size_t>(r)];
    if (b < nvar) out.x(b) = tab.rhs(r);
  }
  out.value = lp.objective.dot(out.x);
  return out;
}

}  // namespace skt

#pragma once

// Dense two-phase simplex for small linear programs:
//   maximize c^T x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  x >= 0.
// Bland's rule is used throughout, so the method terminates on degenerate
// problems at the cost of speed. Intended for n up to a few dozen.

#include "skt/types.hpp"

namespace skt {

struct LinearProgram {
  Vector objective;
  Matrix a_ub;
  Vector b_ub;
  Matrix a_eq;
  Vector b_eq;
};

enum class LpStatus { optimal, infeasible, unbounded };

struct LpSolution {
  LpStatus status = LpStatus::infeasible;
  Vector x;
  double value = 0.0;
};

LpSolution solve_lp(const LinearProgram& lp);

}  // namespace skt

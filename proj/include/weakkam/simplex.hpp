#pragma once

#include <Eigen/Dense>

namespace weakkam {

/// minimize c.x subject to A x = b, x >= 0.
struct LinearProgram {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
};

struct SimplexOptions {
  double tolerance = 1e-9;
  long max_pivots = 2'000'000;
};

struct LPSolution {
  Eigen::VectorXd x;
  double value = 0.0;
  long pivots = 0;
};

/// Two-phase revised primal simplex. Pricing is Dantzig's rule, switching to
/// Bland's rule during runs of degenerate pivots, so it cannot cycle and the
/// pivot sequence (hence the returned vertex) is deterministic.
/// Throws LPInfeasible, or NoConvergence when unbounded or out of pivots.
LPSolution solve_lp(const LinearProgram& lp, const SimplexOptions& opts = {});

}  // namespace weakkam

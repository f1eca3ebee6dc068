#pragma once

#include <Eigen/Dense>

namespace fads {

struct LpResult {
  bool feasible = false;
  Eigen::VectorXd x;       // primal solution when feasible, length = cols(A)
  double objective = 0.0;  // c'x at the solution
  int iterations = 0;      // total simplex pivots across both phases
};

/**
 * Solves  min c'x  subject to  A x <= b,  x >= 0.
 *
 * Two-phase dense tableau simplex. Pricing is steepest-negative reduced cost
 * with a switch to Bland's rule after a long degenerate stall, so the method
 * terminates on every input. Throws std::runtime_error if the objective is
 * unbounded below on the feasible set.
 */
LpResult solve_lp(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c,
                  int max_iterations = 200000);

}  // namespace fads

#pragma once

#include <Eigen/Dense>

namespace fads {

/**
 * Column-wise l1-minimal projection of the factor-score direction onto the
 * span of the nuisance covariates: column k solves
 *
 *   min ||w||_1   subject to   ||h_bg_k - h_bb w||_inf <= lambda2.
 */
struct ProjectionMatrix {
  Eigen::MatrixXd w;            // (p - p_m) x K_m, one column per factor
  double lambda2 = 0.0;
  Eigen::VectorXd feasibility;  // per column: ||h_bg_k - h_bb w_k||_inf at the solution
  Eigen::VectorXd l1_norms;     // per column: ||w_k||_1
  int lp_iterations = 0;        // simplex pivots summed over columns
};

/**
 * Solves the constrained l1 problem above for every column of h_bg via the
 * split-variable linear program (w = w+ - w-). Columns whose right-hand side
 * already satisfies ||h_bg_k||_inf <= lambda2 return the zero vector without
 * invoking the solver. Columns are independent; `threads` > 1 solves them
 * concurrently. Throws if a column cannot be made feasible within tol.
 */
ProjectionMatrix estimate_projection(const Eigen::MatrixXd& h_bb, const Eigen::MatrixXd& h_bg,
                                     double lambda2, double tol = 1e-8, int threads = 1);

/**
 * Default regularization level for the projection, shrinking at the rate
 * (sqrt(log(p_m) log(n) / n) + sqrt(log(n) / p_m) + 1) * sqrt(log(d) / n)
 * scaled by c, where d is the number of nuisance covariates.
 */
double lambda2_rate(int n, int p_m, int d, double c = 0.5);

}  // namespace fads
